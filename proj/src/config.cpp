#include "ialpha/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace ialpha {

namespace {

bool get_mat(const Json& j, const std::string& key, int n, Mat* out,
             std::vector<std::string>& issues) {
  if (!j.contains(key)) return false;
  const auto& v = j.at(key);
  if (!v.is_array() || static_cast<int>(v.size()) != n * n) {
    issues.push_back("group field '" + key + "' must be a row-major array of " +
                     std::to_string(n * n) + " numbers");
    return false;
  }
  out->resize(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) (*out)(r, c) = v.at(r * n + c).get<double>();
  return true;
}

bool get_vec(const Json& j, const std::string& key, int n, Vec* out,
             std::vector<std::string>& issues) {
  if (!j.contains(key)) return false;
  const auto& v = j.at(key);
  if (!v.is_array() || static_cast<int>(v.size()) != n) {
    issues.push_back("group field '" + key + "' must be an array of " +
                     std::to_string(n) + " numbers");
    return false;
  }
  out->resize(n);
  for (int r = 0; r < n; ++r) (*out)[r] = v.at(r).get<double>();
  return true;
}

}  // namespace

KleinianGroup parse_group(const Json& j, std::vector<std::string>& issues) {
  static const std::set<std::string> allowed = {"n", "type", "k", "rotation",
                                                "generators", "max_word_length"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) issues.push_back("group: unknown key '" + it.key() + "'");

  int n = j.value("n", 3);
  if (n < 2) issues.push_back("group field 'n' must be >= 2");

  std::string type = j.value("type", j.contains("generators") ? "generators" : "trivial");
  if (type == "trivial") {
    if (!issues.empty()) throw ConfigError(issues);
    return KleinianGroup::trivial(n);
  }
  if (type == "dilation") {
    double k = 0.0;
    if (!j.contains("k"))
      issues.push_back("group: dilation type requires field 'k'");
    else
      k = j.at("k").get<double>();
    if (j.contains("k") && !(k > 1.0)) issues.push_back("group field 'k' must exceed 1");
    Mat rot = Mat::Identity(n, n);
    get_mat(j, "rotation", n, &rot, issues);
    if (!issues.empty()) throw ConfigError(issues);
    return KleinianGroup::cyclic_dilation(n, k, rot);
  }
  if (type == "generators") {
    if (!j.contains("generators") || !j.at("generators").is_array() ||
        j.at("generators").empty()) {
      issues.push_back("group: field 'generators' must be a non-empty array");
      throw ConfigError(issues);
    }
    std::vector<MoebiusMap> gens;
    int gi = 0;
    for (const auto& gj : j.at("generators")) {
      std::string where = "generators[" + std::to_string(gi++) + "]";
      static const std::set<std::string> gkeys = {"inversion", "scale", "rotation", "a",
                                                  "b"};
      for (auto it = gj.begin(); it != gj.end(); ++it)
        if (!gkeys.count(it.key()))
          issues.push_back(where + ": unknown key '" + it.key() + "'");
      bool inv = gj.value("inversion", false);
      double scale = gj.value("scale", 1.0);
      if (!(scale > 0.0)) issues.push_back(where + ": field 'scale' must be positive");
      Mat rot = Mat::Identity(n, n);
      get_mat(gj, "rotation", n, &rot, issues);
      Vec a = Vec::Zero(n), b = Vec::Zero(n);
      get_vec(gj, "a", n, &a, issues);
      get_vec(gj, "b", n, &b, issues);
      if (issues.empty()) {
        try {
          gens.push_back(inv ? MoebiusMap::inversion_form(scale, rot, a, b)
                             : MoebiusMap::similarity(scale, rot, b));
        } catch (const std::exception& e) {
          issues.push_back(where + ": " + e.what());
        }
      }
    }
    if (!issues.empty()) throw ConfigError(issues);
    int maxlen = j.value("max_word_length", 8);
    if (gens.size() == 1) return KleinianGroup::cyclic(gens.front());
    return KleinianGroup::from_generators(std::move(gens), maxlen);
  }
  issues.push_back("group: unknown type '" + type + "'");
  throw ConfigError(issues);
}

KleinianGroup load_group_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"group file '" + path + "' cannot be opened"});
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError({"group file '" + path + "' is not valid JSON: " + e.what()});
  }
  std::vector<std::string> issues;
  return parse_group(j, issues);
}

namespace {

const std::set<std::string>& allowed_keys() {
  static const std::set<std::string> keys = {
      "group_file", "group",  "n",          "alpha",       "alpha_range",
      "resolution", "res0",   "res1",       "res2",        "chart_kind",
      "tolerances", "output_dir", "cutoff", "threads",     "seed",
      "u0",         "lambdas", "rescale_lambdas", "window", "step",
      "bound",      "p0_index", "samples_per_axis", "box_halfwidth",
      "floor",      "projection_center", "kernel_format", "base_point"};
  return keys;
}

void apply_override(Json& j, const std::string& kv, std::vector<std::string>& issues) {
  auto eq = kv.find('=');
  if (eq == std::string::npos) {
    issues.push_back("override '" + kv + "' is not of the form key=value");
    return;
  }
  std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
  try {
    j[key] = Json::parse(val);
  } catch (...) {
    j[key] = val;  // bare string
  }
}

std::vector<double> get_list(const Json& j, const std::string& key,
                             std::vector<std::string>& issues) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  if (!j.at(key).is_array()) {
    issues.push_back("'" + key + "' must be an array of numbers");
    return out;
  }
  for (const auto& v : j.at(key)) out.push_back(v.get<double>());
  return out;
}

}  // namespace

RunConfig load_config(const std::string& config_path,
                      const std::vector<std::string>& overrides) {
  std::vector<std::string> issues;
  Json j = Json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError({"config file '" + config_path + "' cannot be opened"});
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw ConfigError({"config file is not valid JSON: " + std::string(e.what())});
    }
  }
  for (const auto& kv : overrides) apply_override(j, kv, issues);

  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed_keys().count(it.key()))
      issues.push_back("unknown configuration key '" + it.key() + "'");

  RunConfig cfg;
  cfg.n = j.value("n", 3);
  if (cfg.n < 3) issues.push_back("'n' must be >= 3");
  cfg.alpha = j.value("alpha", 2.0);
  if (j.contains("alpha_range")) {
    auto r = get_list(j, "alpha_range", issues);
    if (r.size() != 2)
      issues.push_back("'alpha_range' must be [alpha_lo, alpha_hi]");
    else {
      cfg.has_alpha_range = true;
      cfg.alpha_lo = r[0];
      cfg.alpha_hi = r[1];
      if (!(r[0] < r[1])) issues.push_back("'alpha_range' must be increasing");
      if (r[0] < 2.0 || r[1] >= cfg.n)
        issues.push_back("'alpha_range' must lie inside [2, n)");
    }
  }
  if (!(cfg.alpha >= 2.0 && cfg.alpha < cfg.n))
    issues.push_back("'alpha' must lie in [2, n)");
  cfg.resolution = j.value("resolution", 10);
  if (cfg.resolution < 4) issues.push_back("'resolution' must be >= 4");
  cfg.res0 = j.value("res0", 0);
  cfg.res1 = j.value("res1", 0);
  cfg.res2 = j.value("res2", 0);
  cfg.chart_kind = j.value("chart_kind", std::string("auto"));
  if (cfg.chart_kind != "auto" && cfg.chart_kind != "sphere-full-chart" &&
      cfg.chart_kind != "dilation-shell")
    issues.push_back("'chart_kind' must be auto, sphere-full-chart or dilation-shell");

  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    static const std::set<std::string> tkeys = {"tail_tol", "solve_tol", "quad_tol"};
    for (auto it = t.begin(); it != t.end(); ++it)
      if (!tkeys.count(it.key()))
        issues.push_back("tolerances: unknown key '" + it.key() + "'");
    cfg.tol.tail_tol = t.value("tail_tol", cfg.tol.tail_tol);
    cfg.tol.solve_tol = t.value("solve_tol", cfg.tol.solve_tol);
    cfg.tol.quad_tol = t.value("quad_tol", cfg.tol.quad_tol);
    for (double v : {cfg.tol.tail_tol, cfg.tol.solve_tol, cfg.tol.quad_tol})
      if (!(v > 0.0)) issues.push_back("tolerances must be positive");
  }

  cfg.output_dir = j.value("output_dir", std::string("out"));
  cfg.group_file = j.value("group_file", std::string());
  if (j.contains("group")) {
    cfg.group_json = j.at("group");
    cfg.has_group = true;
    if (!cfg.group_file.empty())
      issues.push_back("'group' and 'group_file' are mutually exclusive");
  }
  cfg.cutoff = j.value("cutoff", 0);
  cfg.threads = j.value("threads", 0);
  cfg.seed = j.value("seed", std::uint64_t{12345});
  cfg.u0 = j.value("u0", std::string("constant"));
  if (cfg.u0 != "constant" && cfg.u0 != "ones")
    issues.push_back("'u0' must be constant or ones");
  cfg.lambdas = get_list(j, "lambdas", issues);
  for (std::size_t i = 1; i < cfg.lambdas.size(); ++i)
    if (!(cfg.lambdas[i] < cfg.lambdas[i - 1]))
      issues.push_back("'lambdas' must be strictly decreasing");
  cfg.rescale_lambdas = get_list(j, "rescale_lambdas", issues);
  if (cfg.rescale_lambdas.empty()) cfg.rescale_lambdas = {2.0, 4.0, 8.0};
  cfg.window = j.value("window", 2.0);
  cfg.step = j.value("step", 0.1);
  if (!(cfg.step > 0.0)) issues.push_back("'step' must be positive");
  cfg.bound = j.value("bound", 10.0);
  cfg.p0_index = j.value("p0_index", -1);
  cfg.samples_per_axis = j.value("samples_per_axis", 24);
  cfg.box_halfwidth = j.value("box_halfwidth", 3.0);
  cfg.floor = j.value("floor", 1e-3);
  cfg.projection_center = get_list(j, "projection_center", issues);
  cfg.base_point = get_list(j, "base_point", issues);
  cfg.kernel_format = j.value("kernel_format", std::string("csv"));
  if (cfg.kernel_format != "csv" && cfg.kernel_format != "binary")
    issues.push_back("'kernel_format' must be csv or binary");

  // Group syntax is validated here too, so every problem is reported at once.
  if (cfg.has_group) {
    try {
      parse_group(cfg.group_json, issues);
    } catch (const ConfigError& e) {
      issues.insert(issues.end(), e.issues.begin(), e.issues.end());
    }
  } else if (!cfg.group_file.empty()) {
    try {
      load_group_file(cfg.group_file);
    } catch (const ConfigError& e) {
      issues.insert(issues.end(), e.issues.begin(), e.issues.end());
    }
  }

  if (!issues.empty()) throw ConfigError(issues);

  // Echo the fully resolved configuration.
  Json r = j;
  r["n"] = cfg.n;
  r["alpha"] = cfg.alpha;
  r["resolution"] = cfg.resolution;
  r["chart_kind"] = cfg.chart_kind;
  r["tolerances"] =
      Json{{"tail_tol", cfg.tol.tail_tol}, {"solve_tol", cfg.tol.solve_tol},
           {"quad_tol", cfg.tol.quad_tol}};
  r["output_dir"] = cfg.output_dir;
  r["cutoff"] = cfg.cutoff;
  r["threads"] = cfg.threads;
  r["seed"] = cfg.seed;
  r["u0"] = cfg.u0;
  r["window"] = cfg.window;
  r["step"] = cfg.step;
  r["bound"] = cfg.bound;
  r["samples_per_axis"] = cfg.samples_per_axis;
  r["box_halfwidth"] = cfg.box_halfwidth;
  r["floor"] = cfg.floor;
  r["kernel_format"] = cfg.kernel_format;
  r["rescale_lambdas"] = cfg.rescale_lambdas;
  cfg.resolved = r;
  return cfg;
}

KleinianGroup config_group(const RunConfig& cfg) {
  if (cfg.has_group) {
    std::vector<std::string> issues;
    return parse_group(cfg.group_json, issues);
  }
  if (!cfg.group_file.empty()) return load_group_file(cfg.group_file);
  return KleinianGroup::trivial(cfg.n);
}

Chart config_chart(const RunConfig& cfg, const KleinianGroup& group) {
  if (cfg.chart_kind == "sphere-full-chart" && group.domain_kind() != DomainKind::FullChart)
    throw ConfigError({"chart_kind sphere-full-chart requires a trivial group"});
  if (cfg.chart_kind == "dilation-shell" &&
      group.domain_kind() != DomainKind::DilationShell)
    throw ConfigError({"chart_kind dilation-shell requires a cyclic dilation group"});
  int r0 = cfg.res0 > 0 ? cfg.res0 : cfg.resolution;
  int r1 = cfg.res1 > 0 ? cfg.res1 : cfg.resolution;
  int r2 = cfg.res2 > 0 ? cfg.res2 : cfg.resolution;
  return build_chart(group, r0, r1, r2, cfg.n);
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < columns.size(); ++i)
    out << (i ? "," : "") << columns[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << format_double(row[i]);
    out << "\n";
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_field_csv(const std::filesystem::path& path, const Mat& nodes,
                     const Vec& values) {
  std::vector<std::string> cols = {"index"};
  for (int d = 0; d < nodes.cols(); ++d) cols.push_back("x" + std::to_string(d));
  cols.push_back("value");
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < nodes.rows(); ++i) {
    std::vector<double> row;
    row.push_back(i);
    for (int d = 0; d < nodes.cols(); ++d) row.push_back(nodes(i, d));
    row.push_back(values[i]);
    rows.push_back(std::move(row));
  }
  write_csv(path, cols, rows);
}

void write_chart_csv(const std::filesystem::path& path, const Chart& chart) {
  std::vector<std::string> cols;
  for (int d = 0; d < chart.n; ++d) cols.push_back("x" + std::to_string(d));
  cols.push_back("weight");
  cols.push_back("eta_hat");
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < chart.size(); ++i) {
    std::vector<double> row;
    for (int d = 0; d < chart.n; ++d) row.push_back(chart.nodes(i, d));
    row.push_back(chart.weights[i]);
    row.push_back(chart.eta[i]);
    rows.push_back(std::move(row));
  }
  write_csv(path, cols, rows);
}

}  // namespace ialpha
