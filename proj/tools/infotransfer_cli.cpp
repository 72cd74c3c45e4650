// Command-line front end: infotransfer <profile|estimate|fixed-points|validate-config> --config <path>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "infotransfer/infotransfer.hpp"

namespace {

constexpr int kUsageError = 2;
constexpr int kNumericalError = 3;

struct Overrides {
  std::string config;
  std::optional<std::string> out;
  bool svg = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> grid;
  std::optional<std::size_t> stride;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment config (JSON)")->required();
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_flag("--svg", o.svg, "also write an SVG chart");
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--samples", o.samples, "trajectories per branch")->check(CLI::PositiveNumber);
  cmd->add_option("--grid", o.grid, "quadrature points")->check(CLI::Range(64, 1 << 26));
  cmd->add_option("--stride", o.stride, "step stride")->check(CLI::PositiveNumber);
}

infotransfer::ExperimentConfig load(const Overrides& o) {
  auto c = infotransfer::load_config(o.config);
  if (o.out) c.out_dir = *o.out;
  if (o.svg) c.svg = true;
  if (o.seed) c.seed = *o.seed;
  if (o.samples) c.samples_z0 = c.samples_z1 = *o.samples;
  if (o.grid) c.grid = *o.grid;
  if (o.stride) c.stride = *o.stride;
  return c;
}

template <class Run>
int guarded(const Overrides& o, Run run) {
  infotransfer::ExperimentConfig config;
  try {
    config = load(o);
    infotransfer::resolve(config);
  } catch (const infotransfer::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }
  try {
    const auto result = run(config);
    for (const auto& f : result.files) std::cout << f.string() << '\n';
    return 0;
  } catch (const infotransfer::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const infotransfer::OutputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-information transfer in diffusion of 1-D Gaussian mixtures"};
  app.set_version_flag("--version", std::string(infotransfer::kVersion));
  app.require_subcommand(1);

  Overrides profile, estimate, fixed, validate;
  auto* cmd_profile = app.add_subcommand("profile", "quadrature entropy profiles");
  add_common(cmd_profile, profile);
  auto* cmd_estimate = app.add_subcommand("estimate", "Monte-Carlo entropy estimates");
  add_common(cmd_estimate, estimate);
  auto* cmd_fixed = app.add_subcommand("fixed-points", "fixed points of the reverse drift");
  add_common(cmd_fixed, fixed);
  auto* cmd_validate = app.add_subcommand("validate-config", "check a config and print it canonically");
  add_common(cmd_validate, validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  if (*cmd_profile) return guarded(profile, infotransfer::run_profile);
  if (*cmd_estimate) return guarded(estimate, infotransfer::run_estimate);
  if (*cmd_fixed) return guarded(fixed, infotransfer::run_fixed_points);
  try {
    const auto config = load(validate);
    const auto e = infotransfer::resolve(config);
    std::cout << infotransfer::serialize_config(config);
    std::cerr << "ok: " << e.mixture.size() << " components, T = " << e.schedule.steps() << ", "
              << e.partitions.size() << " partitions\n";
    return 0;
  } catch (const infotransfer::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }
}
