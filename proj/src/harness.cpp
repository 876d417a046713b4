#include "fracmc/harness.hpp"

#include "fracmc/fem.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#ifndef FRACMC_VERSION
#define FRACMC_VERSION "unknown"
#endif

namespace fracmc {

const char* version() { return FRACMC_VERSION; }

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string alpha_label(double alpha) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", alpha);
  return buf;
}

}  // namespace

void PhaseTimer::add(const std::string& name, double seconds) {
  for (auto& [n, s] : phases)
    if (n == name) {
      s += seconds;
      return;
    }
  phases.emplace_back(name, seconds);
}

Medium build_medium(const ExperimentConfig& config) {
  config.validate();
  Medium m;
  m.grid = build_fine_grid(config.n);
  m.eps = config.medium.eps;
  if (config.medium.kind == "periodic-bars") {
    const Index p = config.eps_inv();
    const auto pattern = centered_square_pattern(config.n / p);
    m.map = build_periodic_medium(m.grid, p, pattern);
  } else if (config.medium.kind == "nonperiodic-demo") {
    m.map = build_nonperiodic_demo(config.n);
  } else {
    m.map = load_medium(config.medium.path, m.grid);
  }
  m.kappa = kappa_from_continuum(m.map, m.eps);
  return m;
}

Trajectory run_reference(const ExperimentConfig& config, const Medium& medium, double alpha) {
  const FineGrid& grid = medium.grid;
  const InteriorMap interior = interior_map(grid);
  const SparseMatrix<double> A = interior.restrict_matrix(assemble_stiffness(grid, medium.kappa));
  const SparseMatrix<double> M = interior.restrict_matrix(assemble_mass<double>(grid));
  const Vector<double> b = interior.restrict_vector(
      assemble_load(grid, [&](double x, double y) { return source_value(config.source, x, y); }));
  const Vector<double> U0 = interior.restrict_vector(
      interpolate(grid, [&](double x, double y) { return initial_value(config.initial, x, y); }));
  const Source source = config.source.kind == "semilinear" ? semilinear_source(M, b) : constant_source(b);

  const Index steps = config.N * config.reference_factor;
  const L1Coeffs coeffs = l1_coeffs(alpha, config.T / static_cast<double>(steps), steps);
  Trajectory fine;
  try {
    fine = l1_implicit_solve(M, A, source, U0, coeffs, config.picard);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("reference solve: ") + e.what());
  }
  if (const Index bad = fine.first_nonfinite(); bad >= 0)
    throw NumericalError("reference solve: non-finite state at fine step " + std::to_string(bad));

  Trajectory out = fine.subsample(config.reference_factor);
  out.method = "reference";
  for (auto& U : out.U) U = interior.extend(U);
  return out;
}

BlockAverages continuum_average(const Vector<double>& cell_values, const CoarsePartition& partition,
                                const ContinuumMap& map) {
  const Index n = partition.fine_n();
  if (cell_values.size() != n * n || map.n() != n) throw InputError("continuum_average: size mismatch");
  BlockAverages avg;
  const Index nb = partition.block_count();
  for (int i = 0; i < 2; ++i) {
    avg.value[i] = Vector<double>::Zero(nb);
    avg.present[i].assign(static_cast<std::size_t>(nb), 0);
  }
  for (Index b = 0; b < nb; ++b) {
    const CellBox box = partition.cells(b);
    std::array<double, 2> sum{0.0, 0.0};
    std::array<Index, 2> count{0, 0};
    for (Index cy = box.y0; cy < box.y1; ++cy)
      for (Index cx = box.x0; cx < box.x1; ++cx) {
        const int k = map(cx, cy);
        sum[k] += cell_values[cy * n + cx];
        ++count[k];
      }
    for (int i = 0; i < 2; ++i)
      if (count[i] > 0) {
        avg.value[i][b] = sum[i] / static_cast<double>(count[i]);
        avg.present[i][static_cast<std::size_t>(b)] = 1;
      }
  }
  return avg;
}

BlockAverages continuum_average_nodal(const Vector<double>& nodal, const FineGrid& grid,
                                      const CoarsePartition& partition, const ContinuumMap& map) {
  return continuum_average(cell_midpoints(grid, nodal), partition, map);
}

const char* to_string(ErrorFlag flag) {
  switch (flag) {
    case ErrorFlag::ok: return "ok";
    case ErrorFlag::nonfinite: return "nonfinite";
    case ErrorFlag::undefined: return "undefined";
  }
  return "?";
}

ErrorFlag StepError::combined() const {
  if (flag[0] == ErrorFlag::nonfinite || flag[1] == ErrorFlag::nonfinite) return ErrorFlag::nonfinite;
  if (flag[0] == ErrorFlag::undefined || flag[1] == ErrorFlag::undefined) return ErrorFlag::undefined;
  return ErrorFlag::ok;
}

StepError relative_error(const BlockAverages& reference, const std::array<Vector<double>, 2>& approx) {
  StepError out;
  for (int i = 0; i < 2; ++i) {
    const auto& ref = reference.value[i];
    if (approx[i].size() != ref.size()) throw InputError("relative_error: block counts differ");
    double num = 0.0, den = 0.0;
    bool finite = true;
    for (Index b = 0; b < ref.size(); ++b) {
      if (!reference.present[i][static_cast<std::size_t>(b)]) continue;
      if (!std::isfinite(ref[b]) || !std::isfinite(approx[i][b])) finite = false;
      const double d = ref[b] - approx[i][b];
      num += d * d;
      den += ref[b] * ref[b];
    }
    if (!finite) {
      out.flag[i] = ErrorFlag::nonfinite;
      out.e[i] = std::numeric_limits<double>::quiet_NaN();
    } else if (den == 0.0) {
      out.flag[i] = ErrorFlag::undefined;
      out.e[i] = std::numeric_limits<double>::quiet_NaN();
    } else {
      out.e[i] = std::sqrt(num / den);
    }
  }
  return out;
}

StepError relative_error(const BlockAverages& reference, const CoarseModel& model, const Vector<double>& U) {
  const Index nb = model.partition.block_count();
  std::array<Vector<double>, 2> approx{Vector<double>(nb), Vector<double>(nb)};
  for (int i = 0; i < 2; ++i)
    for (Index b = 0; b < nb; ++b) approx[i][b] = model.block_center_value(U, i, b);
  return relative_error(reference, approx);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto t_start = Clock::now();
  ExperimentResult result;
  result.config = config;
  auto& timer = result.timings;

  auto t0 = Clock::now();
  result.medium = build_medium(config);
  const Medium& medium = result.medium;
  timer.add("medium", seconds_since(t0));

  t0 = Clock::now();
  const CoarsePartition partition = build_coarse_partition(medium.grid, config.hinv, config.oversampling);
  CellProblemOptions cell_options;
  cell_options.constraint_tol = config.tolerances.constraint_residual;
  const Upscaling up = upscale(partition, medium.map, medium.kappa, medium.eps, cell_options);
  for (const auto& basis : up.bases)
    result.max_constraint_residual = std::max(result.max_constraint_residual, basis.constraint_residual);
  timer.add("upscale", seconds_since(t0));

  t0 = Clock::now();
  CoarseModel model = assemble_coarse(partition, up.blocks);
  result.coarse_size = model.size;
  const Vector<double> load =
      assemble_coarse_load(model, up.bases, [&](double x, double y) { return source_value(config.source, x, y); });
  auto u0 = [&](double x, double y) { return initial_value(config.initial, x, y); };
  const Vector<double> U0 = model.interpolate(u0);
  const Source source =
      config.source.kind == "semilinear" ? semilinear_source(model.mass, load) : constant_source(load);
  timer.add("coarse_assembly", seconds_since(t0));

  const bool needs_eig = std::find(config.methods.begin(), config.methods.end(), "ei") != config.methods.end();
  if (needs_eig) {
    t0 = Clock::now();
    model.eigen();
    timer.add("eigendecomposition", seconds_since(t0));
  }

  const double tau = config.T / static_cast<double>(config.N);
  for (double alpha : config.alphas) {
    t0 = Clock::now();
    const Trajectory reference = run_reference(config, medium, alpha);
    timer.add("reference", seconds_since(t0));

    t0 = Clock::now();
    std::vector<BlockAverages> ref_avg;
    ref_avg.reserve(reference.U.size());
    for (const auto& u : reference.U) ref_avg.push_back(continuum_average_nodal(u, medium.grid, partition, medium.map));
    timer.add("errors", seconds_since(t0));

    for (const auto& method : config.methods) {
      t0 = Clock::now();
      MethodResult mr;
      mr.method = method;
      mr.alpha = alpha;
      mr.tag = config.alphas.size() > 1 ? method + "@alpha=" + alpha_label(alpha) : method;
      const L1Coeffs coeffs = l1_coeffs(alpha, tau, config.N);
      if (method == "ei") mr.trajectory = ei_solve(model.eigen(), source, U0, alpha, tau, config.N);
      else if (method == "l1-implicit")
        mr.trajectory = l1_implicit_solve(model.mass, model.stiffness, source, U0, coeffs, config.picard);
      else mr.trajectory = l1_explicit_solve(model.mass, model.stiffness, source, U0, coeffs);
      mr.first_nonfinite = mr.trajectory.first_nonfinite();
      mr.inner_iterations = mr.trajectory.inner_iterations;
      timer.add("coarse_solve", seconds_since(t0));

      t0 = Clock::now();
      for (Index n = 0; n <= config.N; ++n) {
        const auto& U = mr.trajectory.U[static_cast<std::size_t>(n)];
        StepError se = relative_error(ref_avg[static_cast<std::size_t>(n)], model, U);
        if (!mr.trajectory.finite[static_cast<std::size_t>(n)]) {
          se.flag = {ErrorFlag::nonfinite, ErrorFlag::nonfinite};
          se.e = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        }
        mr.errors.push_back(se);
      }
      for (int i = 0; i < 2; ++i) {
        mr.terminal_blocks[i].resize(partition.block_count());
        for (Index b = 0; b < partition.block_count(); ++b)
          mr.terminal_blocks[i][b] = model.block_center_value(mr.trajectory.U.back(), i, b);
      }
      timer.add("errors", seconds_since(t0));
      result.methods.push_back(std::move(mr));
    }
    if (config.snapshots) result.references.emplace_back(alpha, reference);
  }
  timer.total = seconds_since(t_start);
  return result;
}

void write_errors_csv(std::ostream& os, const ExperimentResult& result) {
  os << "n,t,method,e0,e1,flag\n";
  const double tau = result.config.T / static_cast<double>(result.config.N);
  for (const auto& mr : result.methods)
    for (std::size_t n = 0; n < mr.errors.size(); ++n) {
      const auto& se = mr.errors[n];
      os << n << ',' << format_double(static_cast<double>(n) * tau) << ',' << mr.tag << ','
         << format_double(se.e[0]) << ',' << format_double(se.e[1]) << ',' << to_string(se.combined()) << '\n';
    }
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

void write_grid_csv(const std::filesystem::path& path, const Vector<double>& nodal, Index n) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  for (Index j = 0; j <= n; ++j) {
    for (Index i = 0; i <= n; ++i) os << (i ? "," : "") << format_double(nodal[j * (n + 1) + i]);
    os << '\n';
  }
}

void write_snapshots(const ExperimentResult& result) {
  const Medium& medium = result.medium;
  const auto& config = result.config;
  const auto dir = config.output / "snapshots";
  std::filesystem::create_directories(dir);
  const CoarsePartition partition = build_coarse_partition(medium.grid, config.hinv, config.oversampling);
  const std::array<Index, 3> steps{0, config.N / 2, config.N};
  for (const auto& [alpha, reference] : result.references) {
    const std::string a = alpha_label(alpha);
    for (Index s : steps)
      write_grid_csv(dir / ("reference_alpha" + a + "_n" + std::to_string(s) + ".csv"),
                     reference.U[static_cast<std::size_t>(s)], config.n);

    // Terminal block averages of the reference next to every coarse method.
    const BlockAverages ref = continuum_average_nodal(reference.U.back(), medium.grid, partition, medium.map);
    std::ofstream os(dir / ("averages_alpha" + a + ".csv"));
    os << "block,bx,by,ref0,ref1";
    std::vector<const MethodResult*> rows;
    for (const auto& mr : result.methods)
      if (mr.alpha == alpha) {
        rows.push_back(&mr);
        os << ',' << mr.method << "0," << mr.method << '1';
      }
    os << '\n';
    for (Index b = 0; b < partition.block_count(); ++b) {
      os << b << ',' << partition.block_x(b) << ',' << partition.block_y(b);
      for (int i = 0; i < 2; ++i)
        os << ',' << (ref.present[i][static_cast<std::size_t>(b)] ? format_double(ref.value[i][b]) : "nan");
      for (const auto* mr : rows)
        for (int i = 0; i < 2; ++i) os << ',' << format_double(mr->terminal_blocks[i][b]);
      os << '\n';
    }
  }
}

}  // namespace

void write_artifacts(const ExperimentResult& result) {
  const auto& config = result.config;
  std::filesystem::create_directories(config.output);
  {
    std::ofstream os(config.output / "errors.csv", std::ios::binary);
    if (!os) throw InputError("cannot write " + (config.output / "errors.csv").string());
    write_errors_csv(os, result);
  }

  nlohmann::ordered_json j;
  j["version"] = version();
  j["config"] = to_toml(config);
  j["coarse_dofs"] = result.coarse_size;
  j["max_constraint_residual"] = result.max_constraint_residual;
  nlohmann::ordered_json methods = nlohmann::ordered_json::array();
  for (const auto& mr : result.methods) {
    nlohmann::ordered_json m;
    m["tag"] = mr.tag;
    m["method"] = mr.method;
    m["alpha"] = mr.alpha;
    const auto& last = mr.errors.back();
    m["terminal"] = {{"e0", number_or_null(last.e[0])},
                     {"e1", number_or_null(last.e[1])},
                     {"flag", to_string(last.combined())}};
    m["first_nonfinite"] = mr.first_nonfinite;
    m["inner_iterations"] = mr.inner_iterations;
    methods.push_back(m);
  }
  j["methods"] = methods;
  nlohmann::ordered_json timings;
  double sum = 0.0;
  for (const auto& [name, s] : result.timings.phases) {
    timings[name] = s;
    sum += s;
  }
  timings["total"] = result.timings.total;
  timings["unaccounted"] = result.timings.total - sum;
  j["timings_seconds"] = timings;
  std::ofstream os(config.output / "summary.json", std::ios::binary);
  os << j.dump(2) << '\n';

  if (config.snapshots) write_snapshots(result);
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::string& axis, const std::vector<double>& values) {
  if (axis != "N" && axis != "hinv") throw InputError("sweep: axis must be N or hinv, got '" + axis + "'");
  std::vector<SweepRow> rows;
  std::map<std::string, std::pair<double, StepError>> previous;
  for (double v : values) {
    ExperimentConfig c = config;
    const auto iv = static_cast<Index>(std::llround(v));
    if (axis == "N") c.N = iv;
    else c.hinv = iv;
    c.output = config.output / (axis + "=" + std::to_string(iv));
    c.snapshots = false;
    try {
      const ExperimentResult r = run_experiment(c);
      write_artifacts(r);
      for (const auto& mr : r.methods) {
        SweepRow row;
        row.value = static_cast<double>(iv);
        row.tag = mr.tag;
        row.terminal = mr.errors.back();
        row.rate = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        if (auto it = previous.find(mr.tag); it != previous.end()) {
          for (int i = 0; i < 2; ++i) {
            const double ep = it->second.second.e[i];
            const double ec = row.terminal.e[i];
            if (ep > 0.0 && ec > 0.0 && std::isfinite(ep) && std::isfinite(ec))
              row.rate[i] = std::log(ep / ec) / std::log(row.value / it->second.first);
          }
        }
        previous[mr.tag] = {row.value, row.terminal};
        rows.push_back(row);
      }
    } catch (const std::exception& e) {
      SweepRow row;
      row.value = static_cast<double>(iv);
      row.tag = "-";
      row.terminal.e = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
      row.terminal.flag = {ErrorFlag::undefined, ErrorFlag::undefined};
      row.rate = row.terminal.e;
      row.status = std::string("error: ") + e.what();
      rows.push_back(row);
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::string& axis, const std::vector<SweepRow>& rows) {
  os << axis << ",method,e0,e1,flag,rate0,rate1,status\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    for (char& c : status)
      if (c == ',' || c == '\n') c = ';';
    os << format_double(r.value) << ',' << r.tag << ',' << format_double(r.terminal.e[0]) << ','
       << format_double(r.terminal.e[1]) << ',' << to_string(r.terminal.combined()) << ','
       << format_double(r.rate[0]) << ',' << format_double(r.rate[1]) << ',' << status << '\n';
  }
}

}  // namespace fracmc
