#pragma once

// Experiment driver: fine reference solves, block-and-continuum averages,
// relative errors of the coarse solutions and the on-disk artifacts.

#include "fracmc/config.hpp"
#include "fracmc/grid.hpp"
#include "fracmc/timestep.hpp"
#include "fracmc/upscale.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fracmc {

/// The medium of a configuration: labels, conductivity and the grid.
struct Medium {
  FineGrid grid;
  ContinuumMap map;
  PermeabilityField kappa;
  double eps = 0.0;
};

Medium build_medium(const ExperimentConfig& config);

/// Fine reference for one alpha: implicit L1 with reference_factor * N steps,
/// subsampled to the N coarse step times. States are full nodal vectors.
/// A non-finite reference is a NumericalError.
Trajectory run_reference(const ExperimentConfig& config, const Medium& medium, double alpha);

/// Per block and continuum mean of a cell field; blocks where the continuum
/// has no cells are masked (present = 0, value 0).
struct BlockAverages {
  std::array<Vector<double>, 2> value;
  std::array<std::vector<char>, 2> present;
};

BlockAverages continuum_average(const Vector<double>& cell_values, const CoarsePartition& partition,
                                const ContinuumMap& map);
/// Same for a nodal fine field, using cell midpoint values.
BlockAverages continuum_average_nodal(const Vector<double>& nodal, const FineGrid& grid,
                                      const CoarsePartition& partition, const ContinuumMap& map);

enum class ErrorFlag { ok, nonfinite, undefined };
const char* to_string(ErrorFlag flag);

struct StepError {
  std::array<double, 2> e{0.0, 0.0};
  std::array<ErrorFlag, 2> flag{ErrorFlag::ok, ErrorFlag::ok};
  ErrorFlag combined() const;
};

/// Discrete L2 relative error over blocks where each continuum is present;
/// the coarse solution is sampled at block centres.
StepError relative_error(const BlockAverages& reference, const CoarseModel& model, const Vector<double>& U);
/// Same with both sides given as block values.
StepError relative_error(const BlockAverages& reference, const std::array<Vector<double>, 2>& approx);

struct MethodResult {
  std::string tag;  // method name, with the alpha appended when several are run
  std::string method;
  double alpha = 0.0;
  std::vector<StepError> errors;  // n = 0..N
  Index first_nonfinite = -1;
  Index inner_iterations = 0;
  Trajectory trajectory;
  std::array<Vector<double>, 2> terminal_blocks;  // block-centre values at T
};

struct PhaseTimer {
  std::vector<std::pair<std::string, double>> phases;  // seconds, in order of first use
  double total = 0.0;
  void add(const std::string& name, double seconds);
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<MethodResult> methods;
  PhaseTimer timings;
  double max_constraint_residual = 0.0;
  Index coarse_size = 0;
  Medium medium;
  std::vector<std::pair<double, Trajectory>> references;  // per alpha, nodal states at the coarse step times
};

/// medium -> reference -> upscaling -> coarse solves -> errors. Instability of
/// a method is recorded in its flags, not thrown.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// errors.csv, summary.json and (if enabled) snapshots under config.output.
void write_artifacts(const ExperimentResult& result);
void write_errors_csv(std::ostream& os, const ExperimentResult& result);

/// Runs the experiment for each value of `axis` ("N" or "hinv") and writes
/// sweep.csv with terminal errors and observed rates. Per-point failures are
/// recorded and the sweep continues.
struct SweepRow {
  double value = 0.0;
  std::string tag;
  StepError terminal;
  std::array<double, 2> rate{0.0, 0.0};  // NaN when unavailable
  std::string status = "ok";
};

std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::string& axis, const std::vector<double>& values);
void write_sweep_csv(std::ostream& os, const std::string& axis, const std::vector<SweepRow>& rows);

/// Version string baked in at build time.
const char* version();

/// "%.17g".
std::string format_double(double v);

}  // namespace fracmc
