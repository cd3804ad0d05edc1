#pragma once

#include <functional>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "vcq/qbd.hpp"

namespace vcq {

/// Codeword cycle duration used by the optional millisecond display of
/// waiting times.
inline constexpr double ms_per_cycle = 4.615;

enum class ExperimentKind {
  Analyze,         // single operating point, one report row per policy
  ThroughputSweep, // optimized throughput per policy over a swept variable
  BoundaryMap,     // throughput-crossover memory per erasure level
  DelaySweep,      // full queue metrics per policy over a swept variable
  RayleighSweep,   // delay sweep preset over Doppler for the Rayleigh model
  PomdpPolicy,     // value function and greedy policy over the belief grid
  PomdpMeanValue,  // mean value of fixed vs reconfigurable per memory point
  Simulate,        // Monte Carlo run
};

/// Declarative experiment description parsed from JSON. See the README
/// for the schema; from_json throws ConfigError with the offending field
/// path on invalid input.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Analyze;
  nlohmann::json raw;         // original document (hashed into metadata)
  nlohmann::json model_spec;  // "model" subdocument

  int block_length = 114;
  double gamma = 0.2;
  double rho = 1.0 / 195.0;

  std::string sweep_variable;  // "memory" | "doppler" | "eps_bad"
  std::vector<double> sweep_values;

  std::vector<int> policies = {1};  // switching thresholds (ell)
  int info_bits = 0;                // 0 means throughput-optimize
  std::vector<double> ccdf_thresholds = {0, 1, 2, 5, 10, 20, 50};
  bool with_crossover = false;

  double discount = 0.9;
  int grid_resolution = 0;  // 0 = solver default
  bool allow_reconfigure = true;
  int rate_stride = 1;

  double average_erasure = 0.2;   // boundary map: fixed mean erasure rate
  double eps_good_factor = 0.25;  // boundary map: eps_good = factor * (1 - eps_bad)
  double memory_bracket_low = 0.001;
  double memory_bracket_high = 0.98;

  uint64_t seed = 1;
  long horizon = 1000000;
  long warmup = 10000;
  std::string decode_mode = "formula";

  static ExperimentConfig from_json(const nlohmann::json& doc);
};

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  nlohmann::json metadata;  // config_hash, tool_version, wall_time_s, extras

  std::string to_csv() const;  // metadata as leading '#' comment lines
  nlohmann::json to_json() const;
};

/// Runs the experiment; sweep points are dispatched to `jobs` workers and
/// rows are emitted in sweep order regardless of completion order.
/// Unstable operating points yield flagged rows, never dropped rows.
ResultTable run(const ExperimentConfig& config, int jobs = 1);

/// Built-in experiment presets: fig3, fig4, fig5, fig7, fig8, fig9,
/// fig10, fig11. Throws ConfigError for unknown names.
ExperimentConfig experiment_preset(const std::string& name);
std::vector<std::string> preset_names();

/// Interpolated location of the sign change of (yb - ya) over a shared
/// grid. Throws std::runtime_error("no crossover in range") when the
/// difference never changes sign (identical curves included).
double find_crossover(std::span<const double> xs, std::span<const double> ya,
                      std::span<const double> yb);

/// Bisection refinement of a crossover bracketed by [lo, hi]; diff must
/// change sign across the bracket.
double refine_crossover(double lo, double hi, const std::function<double(double)>& diff,
                        double xtol = 1e-3);

/// Multiplies every *wait* column by ms_per_cycle (in place) for display
/// in milliseconds; column names gain an `_ms` suffix.
void convert_wait_columns_to_ms(ResultTable& table);

/// 64-bit FNV-1a hash of the canonical (sorted-key) JSON dump.
uint64_t config_hash(const nlohmann::json& doc);

}  // namespace vcq
