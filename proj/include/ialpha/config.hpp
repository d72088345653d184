#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "ialpha/analysis.hpp"

namespace ialpha {

using Json = nlohmann::ordered_json;

/// Exhaustive list of configuration problems; thrown instead of failing on
/// the first issue.
struct ConfigError : std::runtime_error {
  std::vector<std::string> issues;
  explicit ConfigError(std::vector<std::string> list)
      : std::runtime_error(list.empty() ? "configuration error" : list.front()),
        issues(std::move(list)) {}
};

/// Parses a group description: {"n": 3, "type": "trivial"},
/// {"n": 3, "type": "dilation", "k": 2.0, "rotation": [row-major n*n]} or
/// {"n": 3, "generators": [{"inversion": bool, "scale": s,
///  "rotation": [n*n], "a": [n], "b": [n]}, ...]}.
KleinianGroup parse_group(const Json& j, std::vector<std::string>& issues);
KleinianGroup load_group_file(const std::string& path);

/// Fully resolved run configuration; unknown keys are rejected and every
/// tolerance is explicit after resolution.
struct RunConfig {
  int n = 3;
  double alpha = 2.0;
  bool has_alpha_range = false;
  double alpha_lo = 2.0, alpha_hi = 2.8;
  int resolution = 10;
  int res0 = 0, res1 = 0, res2 = 0;  // optional per-axis override
  std::string chart_kind = "auto";
  Tolerances tol;
  std::string output_dir = "out";
  std::string group_file;
  Json group_json;  // inline group (or loaded from group_file)
  bool has_group = false;

  int cutoff = 0;  // forced kernel cutoff; 0 = automatic
  int threads = 0;
  std::uint64_t seed = 12345;
  std::string u0 = "constant";  // or "ones"

  std::vector<double> lambdas;           // moving-plane planes
  std::vector<double> rescale_lambdas;   // zoom factors
  double window = 2.0;
  double step = 0.1;
  double bound = 10.0;
  int p0_index = -1;
  int samples_per_axis = 24;
  double box_halfwidth = 3.0;
  double floor = 1e-3;
  std::vector<double> projection_center;  // Kelvin re-projection center
  std::vector<double> base_point;          // Poincare-series base point
  std::string kernel_format = "csv";      // or "binary"

  Json resolved;  // the full configuration echoed into every report
};

/// Loads, overrides, validates. `overrides` holds flag-style key=value pairs
/// applied on top of the file.
RunConfig load_config(const std::string& config_path,
                      const std::vector<std::string>& overrides);

/// Builds the group described by the config (trivial group of dimension n
/// when none is given).
KleinianGroup config_group(const RunConfig& cfg);

/// Chart from config (resolution + chart_kind checks).
Chart config_chart(const RunConfig& cfg, const KleinianGroup& group);

// --- deterministic writers ---

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);
void write_json(const std::filesystem::path& path, const Json& j);
void write_field_csv(const std::filesystem::path& path, const Mat& nodes,
                     const Vec& values);
void write_chart_csv(const std::filesystem::path& path, const Chart& chart);

}  // namespace ialpha
