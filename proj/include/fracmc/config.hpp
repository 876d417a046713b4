#pragma once

// Experiment configuration read from a small TOML subset: [section] headers,
// `key = value` pairs with strings, numbers, booleans and one-line arrays,
// and # comments. Unknown sections and keys are rejected.

#include "fracmc/common.hpp"
#include "fracmc/solver.hpp"
#include "fracmc/timestep.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace fracmc {

namespace toml {

struct Value;
using Array = std::vector<Value>;

struct Value {
  std::variant<bool, std::int64_t, double, std::string, Array> data;
  int line = 0;
};

using Table = std::map<std::string, Value>;
using Document = std::map<std::string, Table>;

/// Throws InputError with the offending line number.
Document parse(const std::string& text);

}  // namespace toml

struct MediumSpec {
  std::string kind = "periodic-bars";  // periodic-bars | nonperiodic-demo | file
  std::filesystem::path path;          // for kind = file
  double eps = 0.1;                    // microscale; periods per side = 1/eps for periodic-bars
};

struct SourceSpec {
  std::string kind = "linear";  // zero | linear | semilinear
  double center_x = 0.5;
  double center_y = 0.5;
  double width = 50.0;  // exp(-width |x - center|^2)
  double amplitude = 1.0;
};

struct InitialSpec {
  std::string kind = "sine";  // zero | sine | bubble
  double amplitude = 5e-3;
};

struct ExperimentConfig {
  MediumSpec medium;
  Index n = 100;
  Index hinv = 10;
  Index oversampling = 1;

  std::vector<double> alphas{0.9};
  double T = 1e-3;
  Index N = 100;
  Index reference_factor = 5;

  SourceSpec source;
  InitialSpec initial;

  std::vector<std::string> methods{"ei", "l1-implicit", "l1-explicit"};
  std::filesystem::path output = "out";
  bool snapshots = true;
  std::uint64_t seed = 1;

  SolverTolerances tolerances;
  PicardOptions picard;

  /// Throws InputError describing the first violated invariant.
  void validate() const;
  /// Periods per side of the periodic medium (1 / eps, rounded).
  Index eps_inv() const;
};

/// Parses and validates. Relative paths are resolved against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical TOML rendering; parse_config(to_toml(c)) reproduces c.
std::string to_toml(const ExperimentConfig& config);

double source_value(const SourceSpec& s, double x, double y);
double initial_value(const InitialSpec& s, double x, double y);

}  // namespace fracmc
