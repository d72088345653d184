#include "ialpha/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>

namespace ialpha {

namespace fs = std::filesystem;

Mat random_orthogonal(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = gauss(rng);
  Eigen::HouseholderQR<Mat> qr(A);
  Mat Q = qr.householderQ();
  return Q;
}

MoebiusMap random_moebius(std::mt19937_64& rng, int n, int factors) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::uniform_real_distribution<double> logs(-0.7, 0.7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto rvec = [&] {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    return v;
  };
  int count = 1 + static_cast<int>(uni(rng) * factors);
  MoebiusMap g = MoebiusMap::identity(n);
  for (int i = 0; i < count; ++i) {
    MoebiusMap f = uni(rng) < 0.5
                       ? MoebiusMap::similarity(std::exp(logs(rng)),
                                                random_orthogonal(rng, n), rvec())
                       : MoebiusMap::inversion_form(std::exp(logs(rng)),
                                                    random_orthogonal(rng, n), rvec(),
                                                    rvec());
    g = compose(f, g);
  }
  return g;
}

IdentitySuite run_identity_suite(std::uint64_t seed, int n, double alpha,
                                 int mobius_samples, int covariance_samples,
                                 int spectral_fields) {
  IdentitySuite out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.2);
  auto rpoint = [&](const MoebiusMap& g) {
    // A sample point at a safe distance from the pole.
    while (true) {
      Vec x(n);
      for (int i = 0; i < n; ++i) x[i] = gauss(rng);
      ExtPoint pole = g.pole();
      if (!pole.infinite && (x - pole.x).norm() < 0.2) continue;
      if (g(ExtPoint::at(x)).x.norm() > 1e8) continue;
      return x;
    }
  };

  for (int i = 0; i < mobius_samples; ++i) {
    MoebiusMap g = random_moebius(rng, n);
    Vec x = rpoint(g), y = rpoint(g);
    if ((x - y).norm() < 1e-6) continue;
    Vec gx = g(x), gy = g(y);
    double de_x = g.euclidean_derivative(x), de_y = g.euclidean_derivative(y);
    double lhs = (gx - gy).norm();
    double rhs = std::sqrt(de_x * de_y) * (x - y).norm();
    out.distance_identity = std::max(out.distance_identity, std::abs(lhs / rhs - 1.0));

    double ds_x = g.spherical_derivative(x), ds_y = g.spherical_derivative(y);
    double clhs = chordal_distance(gx, gy);
    double crhs = std::sqrt(ds_x * ds_y) * chordal_distance(x, y);
    out.chordal_identity = std::max(out.chordal_identity, std::abs(clhs / crhs - 1.0));

    MoebiusMap h = random_moebius(rng, n, 2);
    if (!h.pole().infinite && (x - h.pole().x).norm() < 0.2) continue;
    Vec hx = h(ExtPoint::at(x)).infinite ? x : h(x);
    MoebiusMap gh = compose(g, h);
    ExtPoint ghpole = gh.pole();
    if (!ghpole.infinite && (x - ghpole.x).norm() < 0.1) continue;
    if (!g.pole().infinite && (hx - g.pole().x).norm() < 0.1) continue;
    double chain = gh.spherical_derivative(x) /
                   (g.spherical_derivative(hx) * h.spherical_derivative(x));
    out.chain_rule = std::max(out.chain_rule, std::abs(chain - 1.0));

    double invr = g.inverse().spherical_derivative(gx) * g.spherical_derivative(x);
    out.inverse_rule = std::max(out.inverse_rule, std::abs(invr - 1.0));

    Vec P = stereographic_lift(x);
    ExtPoint back = stereographic_chart(P);
    out.stereographic_roundtrip =
        std::max(out.stereographic_roundtrip, (back.x - x).norm());
  }

  ProblemSpec spec(n, alpha);
  for (int i = 0; i < covariance_samples; ++i) {
    MoebiusMap g = random_moebius(rng, n);
    Vec x = rpoint(g), y = rpoint(g);
    if ((x - y).norm() < 1e-3) {
      --i;
      continue;
    }
    out.covariance = std::max(out.covariance, covariance_deviation(spec, g, x, y));
  }

  const double alphas[3] = {2.0, 2.5, 3.0 - 1e-3};
  std::uint64_t sub = seed;
  for (int dim = 2; dim <= 3; ++dim) {
    PeriodicGrid grid(dim, dim == 2 ? 64 : 32);
    for (double a : alphas) {
      for (int f = 0; f < spectral_fields; ++f) {
        Vec field = random_band_limited(grid, grid.m / 4, ++sub);
        Vec g = frac_laplacian_periodic(grid, field, a);
        Vec h = riesz_apply_periodic(grid, g, a);
        double rel = (h - field).cwiseAbs().maxCoeff() / field.cwiseAbs().maxCoeff();
        out.spectral_inverse = std::max(out.spectral_inverse, rel);
      }
    }
  }

  out.pass = out.distance_identity < 1e-10 && out.chordal_identity < 1e-10 &&
             out.chain_rule < 1e-10 && out.inverse_rule < 1e-10 &&
             out.covariance < 1e-10 && out.spectral_inverse < 1e-6 &&
             out.stereographic_roundtrip < 1e-12;
  return out;
}

namespace {

fs::path ensure_outdir(const RunConfig& cfg) {
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  return dir;
}

Json report_base(const RunConfig& cfg) {
  Json j;
  j["config"] = cfg.resolved;
  return j;
}

Json solve_report_json(const SolveReport& rep) {
  Json j;
  j["converged"] = rep.converged;
  j["iterations"] = rep.iterations;
  j["final_residual"] = rep.final_residual;
  j["min_value"] = rep.min_value;
  j["max_value"] = rep.max_value;
  j["yamabe_alpha_estimate"] = rep.yamabe_alpha_estimate;
  j["integral_bound_lhs"] = rep.integral_bound_lhs;
  j["integral_bound_rhs"] = rep.integral_bound_rhs;
  j["condition_estimate"] = rep.condition_estimate;
  if (!rep.failure.empty()) j["failure"] = rep.failure;
  return j;
}

struct SolvedProblem {
  KleinianGroup group;
  Chart chart;
  ProblemSpec spec;
  KernelMatrix K;
  SolutionField field;
  SolveReport report;
};

SolvedProblem solve_from_config(const RunConfig& cfg) {
  SolvedProblem s;
  s.group = config_group(cfg);
  s.chart = config_chart(cfg, s.group);
  s.spec = ProblemSpec(cfg.n, cfg.alpha, cfg.tol);
  AssemblyOptions aopts;
  aopts.threads = cfg.threads;
  aopts.forced_cutoff = cfg.cutoff;
  s.K = assemble(s.chart, s.spec, aopts);
  KernelOperator op(s.K, s.chart);
  Vec u0 = cfg.u0 == "ones" ? Vec::Ones(s.chart.size())
                            : default_initial_guess(s.spec, s.chart, op);
  auto [field, report] = solve_integral_equation(s.spec, s.chart, op, u0);
  s.field = std::move(field);
  s.report = report;
  return s;
}

int cmd_verify(const RunConfig& cfg) {
  IdentitySuite s = run_identity_suite(cfg.seed, cfg.n, cfg.alpha);
  fs::path dir = ensure_outdir(cfg);
  Json j = report_base(cfg);
  j["residuals"] = {{"distance_identity", s.distance_identity},
                    {"chordal_identity", s.chordal_identity},
                    {"chain_rule", s.chain_rule},
                    {"inverse_rule", s.inverse_rule},
                    {"covariance", s.covariance},
                    {"spectral_inverse", s.spectral_inverse},
                    {"stereographic_roundtrip", s.stereographic_roundtrip}};
  j["limits"] = {{"distance_identity", 1e-10}, {"chordal_identity", 1e-10},
                 {"chain_rule", 1e-10},        {"inverse_rule", 1e-10},
                 {"covariance", 1e-10},        {"spectral_inverse", 1e-6},
                 {"stereographic_roundtrip", 1e-12}};
  j["pass"] = s.pass;
  write_json(dir / "verify.json", j);
  std::cout << (s.pass ? "verify: all identity residuals within tolerance\n"
                       : "verify: FAILED\n");
  return s.pass ? 0 : 3;
}

int cmd_kernel(const RunConfig& cfg) {
  KleinianGroup group = config_group(cfg);
  Chart chart = config_chart(cfg, group);
  ProblemSpec spec(cfg.n, cfg.alpha, cfg.tol);
  AssemblyOptions aopts;
  aopts.threads = cfg.threads;
  aopts.forced_cutoff = cfg.cutoff;
  KernelMatrix K = assemble(chart, spec, aopts);

  fs::path dir = ensure_outdir(cfg);
  Json j = report_base(cfg);
  j["n"] = cfg.n;
  j["alpha"] = cfg.alpha;
  j["cutoff"] = K.group_cutoff;
  j["tail_bound"] = K.tail_bound;
  j["size"] = chart.size();
  j["asymmetry"] = matrix_asymmetry(K);
  j["format"] = cfg.kernel_format;
  write_json(dir / "kernel.json", j);
  write_chart_csv(dir / "chart.csv", chart);

  if (cfg.kernel_format == "binary") {
    std::ofstream out(dir / "kernel.bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(K.entries.data()),
              sizeof(double) * K.entries.size());
  } else {
    std::ofstream out(dir / "kernel.csv");
    int N = chart.size();
    for (int p = 0; p < N; ++p) {
      for (int q = 0; q < N; ++q)
        out << (q ? "," : "") << format_double(K.entries(p, q));
      out << "\n";
    }
  }
  std::cout << "kernel: " << chart.size() << " nodes, cutoff " << K.group_cutoff
            << ", tail bound " << K.tail_bound << "\n";
  return 0;
}

int cmd_poincare(const RunConfig& cfg) {
  KleinianGroup group = config_group(cfg);
  ProblemSpec spec(cfg.n, cfg.alpha, cfg.tol);
  double s = 0.5 * (cfg.n - cfg.alpha);
  Vec base;
  if (!cfg.base_point.empty()) {
    if (static_cast<int>(cfg.base_point.size()) != cfg.n)
      throw ConfigError({"'base_point' must have n entries"});
    base = Eigen::Map<const Vec>(cfg.base_point.data(), cfg.n);
  } else {
    base = group.interior_point();
  }

  fs::path dir = ensure_outdir(cfg);
  std::vector<std::vector<double>> rows;
  int maxc = group.is_trivial() ? 1 : std::min(group.max_word_length(), 200);
  PoincareSum last;
  for (int cutoff = 1; cutoff <= maxc; ++cutoff) {
    PoincareSum ps = group.is_trivial() ? PoincareSum{}
                                        : poincare_sum(group, s, base, cutoff);
    rows.push_back({double(cutoff), ps.sum, ps.tail_bound});
    last = ps;
  }
  write_csv(dir / "poincare.csv", {"cutoff", "partial_sum", "tail_bound"}, rows);

  Json j = report_base(cfg);
  j["s"] = s;
  j["base_point"] = std::vector<double>(base.data(), base.data() + base.size());
  j["partial_sum"] = last.sum;
  j["tail_bound"] = last.tail_bound;
  j["divergent"] = last.divergent;
  j["exponent_estimate"] = group.is_trivial() ? 0.0 : exponent_estimate(group, base);
  write_json(dir / "poincare.json", j);
  std::cout << "poincare: sum " << last.sum << ", tail " << last.tail_bound
            << ", exponent estimate " << j["exponent_estimate"].get<double>() << "\n";
  return 0;
}

int cmd_solve(const RunConfig& cfg) {
  SolvedProblem s = solve_from_config(cfg);
  fs::path dir = ensure_outdir(cfg);
  write_field_csv(dir / "solution.csv", s.chart.nodes, s.field.values);
  Json j = report_base(cfg);
  j["report"] = solve_report_json(s.report);
  j["tail_bound"] = s.K.tail_bound;
  j["cutoff"] = s.K.group_cutoff;
  j["volume"] = chart_volume(s.chart);
  j["nodes"] = s.chart.size();
  Json hist = Json::array();
  for (double r : s.field.residual_history) hist.push_back(r);
  j["residual_history"] = hist;
  write_json(dir / "report.json", j);
  std::cout << "solve: " << (s.report.converged ? "converged" : "FAILED") << ", residual "
            << s.report.final_residual << ", range [" << s.report.min_value << ", "
            << s.report.max_value << "]\n";
  return s.report.converged ? 0 : 3;
}

int cmd_moving_plane(const RunConfig& cfg) {
  SolvedProblem s = solve_from_config(cfg);
  Vec vhat = unfold(s.field.values, s.chart, cfg.alpha);

  FieldFn field;
  std::vector<Vec> limit_points;
  std::vector<double> lambdas = cfg.lambdas;
  if (s.group.is_trivial()) {
    field = make_chart_field(s.chart, vhat, 0.5 * (cfg.n - cfg.alpha));
    if (lambdas.empty()) lambdas = {2.0, 1.5, 1.0, 0.5, 0.0};
  } else {
    Vec c(cfg.n);
    if (!cfg.projection_center.empty()) {
      if (static_cast<int>(cfg.projection_center.size()) != cfg.n)
        throw ConfigError({"'projection_center' must have n entries"});
      c = Eigen::Map<const Vec>(cfg.projection_center.data(), cfg.n);
    } else {
      c = Vec::Zero(cfg.n);
      c[cfg.n - 1] = -1.5;
    }
    FieldFn base = make_chart_field(s.chart, vhat, 0.5 * (cfg.n - cfg.alpha));
    MoebiusMap mu = MoebiusMap::inversion_form(1.0, Mat::Identity(cfg.n, cfg.n), c,
                                               Vec::Zero(cfg.n));
    field = kelvin_transform(base, mu, s.spec);
    for (const auto& l : s.group.limit_point_samples())
      limit_points.push_back(mu(l));
    if (s.group.limit_contains_infinity())
      limit_points.push_back(mu.image_of_infinity().x);
    if (lambdas.empty()) {
      double top = -std::numeric_limits<double>::infinity();
      for (const auto& l : limit_points) top = std::max(top, l[cfg.n - 1]);
      lambdas = {top + 1.4, top + 1.0, top + 0.7, top + 0.45, top + 0.25, top + 0.12};
    }
  }

  MovingPlaneOptions mopts;
  mopts.n = cfg.n;
  mopts.box_halfwidth = cfg.box_halfwidth;
  mopts.samples_per_axis = cfg.samples_per_axis;
  mopts.floor = cfg.floor;
  MovingPlaneReport rep = moving_plane_scan(field, lambdas, limit_points, mopts);

  fs::path dir = ensure_outdir(cfg);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < rep.lambdas.size(); ++i)
    rows.push_back({rep.lambdas[i], rep.clearance[i], rep.scanned[i] ? 1.0 : 0.0,
                    rep.min_gap[i], rep.sigma_minus_measure[i]});
  write_csv(dir / "moving_plane.csv",
            {"lambda", "clearance", "scanned", "min_gap", "sigma_minus_measure"}, rows);

  Json j = report_base(cfg);
  j["tail_bound"] = s.K.tail_bound;
  j["boundary_derivative"] = rep.boundary_derivative;
  j["boundary_derivative_evaluated"] = rep.boundary_derivative_evaluated;
  j["limit_set_clearance"] = rep.limit_set_clearance;
  Json lp = Json::array();
  for (const auto& l : limit_points)
    lp.push_back(std::vector<double>(l.data(), l.data() + l.size()));
  j["limit_points"] = lp;
  j["solve"] = solve_report_json(s.report);
  write_json(dir / "moving_plane.json", j);
  std::cout << "moving-plane: " << rep.lambdas.size() << " planes scanned\n";
  return 0;
}

int cmd_rescale(const RunConfig& cfg) {
  SolvedProblem s = solve_from_config(cfg);
  int p0 = cfg.p0_index;
  if (p0 < 0) {
    Eigen::Index argmax;
    s.field.values.maxCoeff(&argmax);
    p0 = static_cast<int>(argmax);
  }

  fs::path dir = ensure_outdir(cfg);
  Json j = report_base(cfg);
  j["tail_bound"] = s.K.tail_bound;
  j["p0_index"] = p0;
  Json per = Json::array();
  RescaledField finest;
  int idx = 0;
  for (double lambda : cfg.rescale_lambdas) {
    RescaledField rf = rescale(s.field, s.chart, s.spec, p0, lambda, cfg.window);
    write_field_csv(dir / ("rescale_" + std::to_string(idx++) + ".csv"), rf.points,
                    rf.values);
    Json entry;
    entry["lambda"] = lambda;
    entry["window"] = rf.window;
    entry["clipped"] = rf.clipped;
    entry["center_value"] = rf.center_value;
    if (!s.group.is_trivial()) {
      Vec z0 = s.chart.nodes.row(p0).transpose();
      entry["kernel_flat_gap"] = kernel_flat_limit_gap(
          s.spec, s.group, z0, lambda, std::min(cfg.window, 2.0), s.K.group_cutoff);
    }
    per.push_back(entry);
    finest = rf;
  }
  j["rescaled"] = per;

  BubbleFit fit = bubble_fit(finest.points, finest.values, s.spec);
  j["bubble_fit"] = {{"t", fit.bubble.t},
                     {"amplitude", fit.bubble.amplitude},
                     {"center", std::vector<double>(fit.bubble.center.data(),
                                                    fit.bubble.center.data() +
                                                        fit.bubble.center.size())},
                     {"fit_residual", fit.fit_residual},
                     {"converged", fit.converged}};
  write_json(dir / "rescale.json", j);
  std::cout << "rescale: " << cfg.rescale_lambdas.size() << " zoom levels\n";
  return 0;
}

int cmd_continue(const RunConfig& cfg) {
  KleinianGroup group = config_group(cfg);
  Chart chart = config_chart(cfg, group);
  ContinuationOptions copts;
  copts.step = cfg.step;
  copts.bound = cfg.bound;
  copts.tol = cfg.tol;
  copts.assembly.threads = cfg.threads;
  copts.solve.yamabe_starts = 2;
  copts.solve.yamabe_iterations = 80;
  double lo = cfg.has_alpha_range ? cfg.alpha_lo : 2.0;
  double hi = cfg.has_alpha_range ? cfg.alpha_hi : 2.8;
  ContinuationPath path = continue_alpha(chart, lo, hi, copts);

  fs::path dir = ensure_outdir(cfg);
  std::vector<std::vector<double>> rows;
  for (const auto& st : path.steps)
    rows.push_back({st.alpha, st.sup_norm, st.inf_value, st.residual, st.yamabe});
  write_csv(dir / "continuation.csv",
            {"alpha", "sup_norm", "inf_value", "residual", "yamabe_alpha"}, rows);

  Json j = report_base(cfg);
  j["completed"] = path.completed;
  j["compact"] = path.compact;
  j["last_good_alpha"] = path.last_good_alpha;
  if (!path.failure.empty()) j["failure"] = path.failure;
  j["steps"] = path.steps.size();
  write_json(dir / "continuation.json", j);
  std::cout << "continue: " << path.steps.size() << " steps, "
            << (path.completed ? "completed" : "stopped") << "\n";
  return path.completed ? 0 : 3;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Conformally covariant integral operators on Kleinian quotients"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  int threads_override = -1;
  std::vector<std::string> sets;

  const char* names[] = {"solve",        "kernel",  "poincare", "verify",
                         "moving-plane", "rescale", "continue"};
  std::vector<CLI::App*> subs;
  for (const char* name : names) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--out", out_override, "output directory");
    sub->add_option("--threads", threads_override, "worker threads");
    sub->add_option("--set", sets, "config override key=value (JSON value)");
    subs.push_back(sub);
  }

  std::vector<const char*> argv;
  argv.push_back("ialpha");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    Json err;
    err["error"] = {{"message", e.what()}};
    std::cout << err.dump(2) << "\n";
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    std::vector<std::string> overrides = sets;
    if (!out_override.empty()) overrides.push_back("output_dir=\"" + out_override + "\"");
    if (threads_override >= 0)
      overrides.push_back("threads=" + std::to_string(threads_override));
    RunConfig cfg = load_config(config_path, overrides);

    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      std::string name = names[i];
      if (name == "verify") return cmd_verify(cfg);
      if (name == "kernel") return cmd_kernel(cfg);
      if (name == "poincare") return cmd_poincare(cfg);
      if (name == "solve") return cmd_solve(cfg);
      if (name == "moving-plane") return cmd_moving_plane(cfg);
      if (name == "rescale") return cmd_rescale(cfg);
      if (name == "continue") return cmd_continue(cfg);
    }
    return 2;
  } catch (const ConfigError& e) {
    Json err;
    err["error"] = {{"message", "configuration error"}, {"issues", e.issues}};
    std::cout << err.dump(2) << "\n";
    return 2;
  } catch (const std::exception& e) {
    Json err;
    err["error"] = {{"message", e.what()}};
    std::cout << err.dump(2) << "\n";
    return 1;
  }
}

}  // namespace ialpha
