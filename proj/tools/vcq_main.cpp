// vcq: analytic and Monte Carlo performance evaluation of
// codeword-synchronized queues over finite-state erasure channels, with
// antenna-switching policies and POMDP rate control.
//
// Verbs:
//   analyze   single operating point, one report row per policy
//   sweep     throughput/delay/boundary sweeps from a JSON config
//   pomdp     belief-grid value iteration experiments
//   simulate  Monte Carlo run of the queueing system
//   preset    built-in experiment presets (fig3 ... fig11)
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "vcq/errors.hpp"
#include "vcq/experiments.hpp"
#include "vcq/version.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::string units = "cycles";
  std::string plot_script_path;
  int jobs = 1;
  bool seed_set = false;
  uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool needs_config) {
  auto* config = cmd->add_option("--config", opts.config_path, "JSON experiment config");
  if (needs_config) config->required();
  cmd->add_option("--out", opts.out_path, "output path (default: stdout)");
  cmd->add_option("--format", opts.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--units", opts.units, "waiting-time units: cycles or ms")
      ->check(CLI::IsMember({"cycles", "ms"}));
  cmd->add_option("--jobs", opts.jobs, "worker threads for sweeps")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", opts.seed, "seed override for simulations")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--plot-script", opts.plot_script_path,
                  "also write a matplotlib stub for the emitted table");
}

// Generic plotting stub: first column as the x axis, one line per
// remaining column. Works on the CSV written via --out.
void write_plot_script(const CommonOptions& opts) {
  const std::string data =
      opts.out_path.empty() || opts.format != "csv" ? "results.csv" : opts.out_path;
  std::ofstream out(opts.plot_script_path);
  if (!out) {
    throw vcq::ConfigError("--plot-script",
                           "cannot write '" + opts.plot_script_path + "'");
  }
  out << "#!/usr/bin/env python3\n"
      << "import csv\n"
      << "import matplotlib.pyplot as plt\n\n"
      << "rows = []\n"
      << "with open(" << std::quoted(data) << ") as f:\n"
      << "    for row in csv.reader(line for line in f if not line.startswith('#')):\n"
      << "        rows.append(row)\n"
      << "header, data = rows[0], [[float(v) for v in row] for row in rows[1:]]\n"
      << "x = [row[0] for row in data]\n"
      << "for col in range(1, len(header)):\n"
      << "    plt.plot(x, [row[col] for row in data], label=header[col])\n"
      << "plt.xlabel(header[0])\n"
      << "plt.legend(fontsize='x-small')\n"
      << "plt.grid(True)\n"
      << "plt.show()\n";
}

vcq::ExperimentConfig load_config(const CommonOptions& opts) {
  std::ifstream in(opts.config_path);
  if (!in) {
    throw vcq::ConfigError("--config", "cannot open '" + opts.config_path + "'");
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& err) {
    throw vcq::ConfigError("--config", std::string("parse error: ") + err.what());
  }
  return vcq::ExperimentConfig::from_json(doc);
}

void emit(const vcq::ResultTable& table, const CommonOptions& opts) {
  std::string text = opts.format == "json" ? table.to_json().dump(2) + "\n" : table.to_csv();
  if (opts.out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(opts.out_path);
    if (!out) {
      throw vcq::ConfigError("--out", "cannot write '" + opts.out_path + "'");
    }
    out << text;
  }
  if (!opts.plot_script_path.empty()) write_plot_script(opts);
}

int run_command(vcq::ExperimentConfig config, const CommonOptions& opts,
                std::initializer_list<vcq::ExperimentKind> allowed) {
  bool ok = false;
  for (vcq::ExperimentKind kind : allowed) ok = ok || kind == config.kind;
  if (!ok) throw vcq::ConfigError("kind", "config kind does not match this verb");
  if (opts.seed_set) config.seed = opts.seed;

  vcq::ResultTable table = vcq::run(config, opts.jobs);
  if (opts.units == "ms") vcq::convert_wait_columns_to_ms(table);
  emit(table, opts);

  if (config.kind == vcq::ExperimentKind::Analyze &&
      table.metadata.value("unstable_rows", 0) > 0) {
    std::cerr << "vcq: operating point is unstable (arrival rate >= service rate)\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"queueing analysis for erasure channels with reconfigurable antennas"};
  app.set_version_flag("--version", vcq::version);
  app.require_subcommand(1);

  CommonOptions opts;
  std::string preset_name;

  CLI::App* analyze = app.add_subcommand("analyze", "single operating point");
  add_common(analyze, opts, true);
  CLI::App* sweep = app.add_subcommand("sweep", "parameter sweeps");
  add_common(sweep, opts, true);
  CLI::App* pomdp = app.add_subcommand("pomdp", "belief-grid experiments");
  add_common(pomdp, opts, true);
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo run");
  add_common(simulate, opts, true);
  CLI::App* preset = app.add_subcommand("preset", "built-in experiment presets");
  preset->add_option("name", preset_name, "preset name (fig3 ... fig11)")->required();
  add_common(preset, opts, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) {
      return run_command(load_config(opts), opts, {vcq::ExperimentKind::Analyze});
    }
    if (sweep->parsed()) {
      return run_command(load_config(opts), opts,
                         {vcq::ExperimentKind::ThroughputSweep,
                          vcq::ExperimentKind::BoundaryMap,
                          vcq::ExperimentKind::DelaySweep,
                          vcq::ExperimentKind::RayleighSweep});
    }
    if (pomdp->parsed()) {
      return run_command(load_config(opts), opts,
                         {vcq::ExperimentKind::PomdpPolicy,
                          vcq::ExperimentKind::PomdpMeanValue});
    }
    if (simulate->parsed()) {
      return run_command(load_config(opts), opts, {vcq::ExperimentKind::Simulate});
    }
    if (preset->parsed()) {
      vcq::ExperimentConfig config = vcq::experiment_preset(preset_name);
      const vcq::ExperimentKind kind = config.kind;
      return run_command(std::move(config), opts, {kind});
    }
  } catch (const vcq::ConfigError& err) {
    std::cerr << "vcq: config error: " << err.what() << "\n";
    return 2;
  } catch (const vcq::UnstableError& err) {
    std::cerr << "vcq: " << err.what() << "\n";
    return 3;
  } catch (const vcq::ConvergenceError& err) {
    std::cerr << "vcq: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "vcq: " << err.what() << "\n";
    return 3;
  }
  return 0;
}
