#include "fracmc/config.hpp"
#include "fracmc/harness.hpp"
#include "fracmc/mittag.hpp"
#include "fracmc/upscale.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace fracmc;

namespace {

void write_error_record(const std::filesystem::path& dir, const std::string& kind, const std::string& message) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return;
  std::ofstream os(dir / "error.json");
  nlohmann::ordered_json j{{"error", kind}, {"message", message}, {"version", version()}};
  os << j.dump(2) << '\n';
}

ExperimentConfig load_with_overrides(const std::string& path, const std::string& output) {
  ExperimentConfig c = load_config(path);
  if (!output.empty()) c.output = output;
  return c;
}

int cmd_run(const std::string& path, const std::string& output) {
  const ExperimentConfig config = load_with_overrides(path, output);
  const ExperimentResult result = run_experiment(config);
  write_artifacts(result);
  for (const auto& m : result.methods) {
    const auto& last = m.errors.back();
    std::printf("%-24s e0=%-12.4e e1=%-12.4e %s", m.tag.c_str(), last.e[0], last.e[1], to_string(last.combined()));
    if (m.first_nonfinite >= 0) std::printf(" (non-finite from step %lld)", static_cast<long long>(m.first_nonfinite));
    std::printf("\n");
  }
  std::printf("total %.2fs, artifacts in %s\n", result.timings.total, config.output.string().c_str());
  return 0;
}

int cmd_sweep(const std::string& path, const std::string& output, const std::string& axis,
              const std::vector<double>& values) {
  const ExperimentConfig config = load_with_overrides(path, output);
  const auto rows = sweep(config, axis, values);
  std::filesystem::create_directories(config.output);
  std::ofstream os(config.output / "sweep.csv", std::ios::binary);
  write_sweep_csv(os, axis, rows);
  write_sweep_csv(std::cout, axis, rows);
  return 0;
}

int cmd_reference(const std::string& path, const std::string& output) {
  const ExperimentConfig config = load_with_overrides(path, output);
  const Medium medium = build_medium(config);
  std::filesystem::create_directories(config.output);
  for (double alpha : config.alphas) {
    const Trajectory traj = run_reference(config, medium, alpha);
    char name[64];
    std::snprintf(name, sizeof name, "reference_alpha%g.csv", alpha);
    std::ofstream os(config.output / name, std::ios::binary);
    write_trajectory(os, traj, true);
    std::printf("alpha=%g: %zu states written to %s\n", alpha, traj.U.size(), (config.output / name).string().c_str());
  }
  return 0;
}

int cmd_upscale(const std::string& path, const std::string& output) {
  const ExperimentConfig config = load_with_overrides(path, output);
  const Medium medium = build_medium(config);
  const CoarsePartition partition = build_coarse_partition(medium.grid, config.hinv, config.oversampling);
  CellProblemOptions opts;
  opts.constraint_tol = config.tolerances.constraint_residual;
  const Upscaling up = upscale(partition, medium.map, medium.kappa, medium.eps, opts);
  double worst = 0.0;
  for (const auto& b : up.bases) worst = std::max(worst, b.constraint_residual);
  if (output.empty()) {
    write_effective(std::cout, up.blocks);
  } else {
    std::filesystem::create_directories(config.output);
    std::ofstream os(config.output / "effective.csv", std::ios::binary);
    write_effective(os, up.blocks);
  }
  std::fprintf(stderr, "%lld blocks, max constraint residual %.3e\n", static_cast<long long>(up.blocks.size()), worst);
  return 0;
}

int cmd_ml_eval(double alpha, double beta, const std::vector<double>& zs) {
  MLParams p{alpha, beta};
  for (double z : zs) std::printf("%.17g\n", ml(p, z));
  return 0;
}

int cmd_medium_gen(const std::string& kind, Index n, double eps, const std::string& out) {
  ExperimentConfig c;
  c.n = n;
  c.medium.kind = kind;
  c.medium.eps = eps;
  c.hinv = 1;
  if (kind == "file") throw InputError("medium gen: kind must be periodic-bars or nonperiodic-demo");
  const Medium m = build_medium(c);
  save_medium(m.map, out);
  std::printf("wrote %s (%lld x %lld, %lld cells in continuum 1)\n", out.c_str(), static_cast<long long>(n),
              static_cast<long long>(n), static_cast<long long>(m.map.count(1)));
  return 0;
}

int cmd_medium_show(const std::string& path) {
  const ContinuumMap map = load_medium(path);
  const Index n = map.n();
  std::printf("n = %lld, continuum 0: %lld cells, continuum 1: %lld cells\n", static_cast<long long>(n),
              static_cast<long long>(map.count(0)), static_cast<long long>(map.count(1)));
  if (n <= 120)
    for (Index cy = n - 1; cy >= 0; --cy) {
      for (Index cx = 0; cx < n; ++cx) std::putchar(map(cx, cy) ? '#' : '.');
      std::putchar('\n');
    }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multicontinuum upscaling and fractional time stepping for high-contrast diffusion"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  std::string config_path, output;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config (TOML)")->required();
    sub->add_option("-o,--output", output, "output directory (overrides [run] output)");
  };

  auto* run = app.add_subcommand("run", "run an experiment and write errors.csv, summary.json, snapshots");
  add_config(run);

  std::string axis;
  std::vector<double> values;
  auto* sw = app.add_subcommand("sweep", "repeat an experiment over N or hinv and report observed rates");
  add_config(sw);
  sw->add_option("--axis", axis, "N or hinv")->required()->check(CLI::IsMember({"N", "hinv"}));
  sw->add_option("--values", values, "axis values")->expected(0, -1);

  auto* ref = app.add_subcommand("reference", "fine reference trajectories only");
  add_config(ref);

  auto* ups = app.add_subcommand("upscale", "dump effective coefficients per block");
  add_config(ups);

  double alpha = 0.5, beta = 1.0;
  std::vector<double> zs;
  auto* mle = app.add_subcommand("ml-eval", "evaluate E_{alpha,beta}(z), 17 significant digits");
  mle->add_option("--alpha", alpha)->required();
  mle->add_option("--beta", beta)->default_val(1.0);
  mle->add_option("--z", zs)->required()->expected(1, -1);

  auto* med = app.add_subcommand("medium", "generate or inspect a medium file");
  med->require_subcommand(1);
  std::string kind = "periodic-bars", out, show_path;
  Index n = 100;
  double eps = 0.1;
  auto* gen = med->add_subcommand("gen", "write a generated medium");
  gen->add_option("--kind", kind)->check(CLI::IsMember({"periodic-bars", "nonperiodic-demo"}));
  gen->add_option("--n", n, "fine cells per side")->default_val(100);
  gen->add_option("--eps", eps, "period (periodic-bars)")->default_val(0.1);
  gen->add_option("--out", out)->required();
  auto* show = med->add_subcommand("show", "print a medium file");
  show->add_option("file", show_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(config_path, output);
    if (*sw) return cmd_sweep(config_path, output, axis, values);
    if (*ref) return cmd_reference(config_path, output);
    if (*ups) return cmd_upscale(config_path, output);
    if (*mle) return cmd_ml_eval(alpha, beta, zs);
    if (*gen) return cmd_medium_gen(kind, n, eps, out);
    if (*show) return cmd_medium_show(show_path);
  } catch (const InputError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    if (!config_path.empty()) {
      try {
        write_error_record(load_with_overrides(config_path, output).output, "numerical", e.what());
      } catch (...) {
      }
    }
    return 3;
  }
  return 0;
}
