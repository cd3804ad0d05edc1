#include "vcq/experiments.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <thread>

#include "vcq/errors.hpp"
#include "vcq/pomdp.hpp"
#include "vcq/sim.hpp"
#include "vcq/version.hpp"

namespace vcq {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config parsing

const json& require_field(const json& obj, const std::string& path, const char* name) {
  if (!obj.is_object() || !obj.contains(name)) {
    throw ConfigError(path.empty() ? name : path + "." + name, "missing required field");
  }
  return obj.at(name);
}

double number_at(const json& value, const std::string& path) {
  if (!value.is_number()) throw ConfigError(path, "expected a number");
  return value.get<double>();
}

int integer_at(const json& value, const std::string& path) {
  if (!value.is_number_integer()) throw ConfigError(path, "expected an integer");
  return value.get<int>();
}

ExperimentKind parse_kind(const std::string& kind) {
  if (kind == "analyze") return ExperimentKind::Analyze;
  if (kind == "throughput_sweep") return ExperimentKind::ThroughputSweep;
  if (kind == "boundary_map") return ExperimentKind::BoundaryMap;
  if (kind == "delay_sweep") return ExperimentKind::DelaySweep;
  if (kind == "rayleigh_sweep") return ExperimentKind::RayleighSweep;
  if (kind == "pomdp_policy") return ExperimentKind::PomdpPolicy;
  if (kind == "pomdp_mean_value") return ExperimentKind::PomdpMeanValue;
  if (kind == "simulate") return ExperimentKind::Simulate;
  throw ConfigError("kind", "unknown experiment kind '" + kind + "'");
}

bool kind_needs_sweep(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::ThroughputSweep:
    case ExperimentKind::BoundaryMap:
    case ExperimentKind::DelaySweep:
    case ExperimentKind::RayleighSweep:
    case ExperimentKind::PomdpMeanValue:
      return true;
    default:
      return false;
  }
}

bool kind_needs_model(ExperimentKind kind) {
  return kind != ExperimentKind::BoundaryMap;
}

std::vector<double> parse_sweep_values(const json& sweep) {
  if (sweep.contains("values")) {
    const json& values = sweep.at("values");
    if (!values.is_array() || values.empty()) {
      throw ConfigError("sweep.values", "expected a nonempty array");
    }
    std::vector<double> out;
    for (size_t i = 0; i < values.size(); ++i) {
      out.push_back(number_at(values[i], "sweep.values[" + std::to_string(i) + "]"));
    }
    return out;
  }
  const double from = number_at(require_field(sweep, "sweep", "from"), "sweep.from");
  const double to = number_at(require_field(sweep, "sweep", "to"), "sweep.to");
  const double step = number_at(require_field(sweep, "sweep", "step"), "sweep.step");
  if (!(step > 0.0)) throw ConfigError("sweep.step", "must be positive");
  if (to < from) throw ConfigError("sweep.to", "must be >= sweep.from");
  std::vector<double> out;
  const long count = static_cast<long>(std::floor((to - from) / step + 1e-9)) + 1;
  for (long i = 0; i < count; ++i) out.push_back(from + static_cast<double>(i) * step);
  if (out.empty()) throw ConfigError("sweep", "empty sweep range");
  return out;
}

/// Builds the channel model for one sweep point; `variable` may be empty
/// for fixed-model experiments.
FadingChannelModel model_from_spec(const json& spec, const std::string& variable,
                                   double value, int block_length) {
  const json& type_json = require_field(spec, "model", "type");
  if (!type_json.is_string()) throw ConfigError("model.type", "expected a string");
  const std::string type = type_json.get<std::string>();
  try {
    if (type == "gilbert_elliott") {
      const double p_bad = number_at(require_field(spec, "model", "p_bad"), "model.p_bad");
      const double eps_bad =
          number_at(require_field(spec, "model", "eps_bad"), "model.eps_bad");
      const double eps_good =
          number_at(require_field(spec, "model", "eps_good"), "model.eps_good");
      double memory;
      if (variable == "memory") {
        memory = value;
      } else {
        memory = number_at(require_field(spec, "model", "memory"), "model.memory");
      }
      return make_gilbert_elliott(p_bad, memory, block_length, eps_bad, eps_good);
    }
    if (type == "rayleigh8") {
      double doppler;
      if (variable == "doppler") {
        doppler = value;
      } else {
        doppler =
            number_at(require_field(spec, "model", "doppler_hz"), "model.doppler_hz");
      }
      return make_rayleigh8_preset(doppler);
    }
    if (type == "rayleigh") {
      const int k = integer_at(require_field(spec, "model", "k"), "model.k");
      const double snr =
          number_at(require_field(spec, "model", "avg_snr_db"), "model.avg_snr_db");
      const double rate =
          number_at(require_field(spec, "model", "bit_rate_bps"), "model.bit_rate_bps");
      double doppler;
      if (variable == "doppler") {
        doppler = value;
      } else {
        doppler =
            number_at(require_field(spec, "model", "doppler_hz"), "model.doppler_hz");
      }
      const json& eps_json = require_field(spec, "model", "epsilons");
      if (!eps_json.is_array()) throw ConfigError("model.epsilons", "expected an array");
      Vector eps(eps_json.size());
      for (size_t i = 0; i < eps_json.size(); ++i) {
        eps(i) = number_at(eps_json[i], "model.epsilons[" + std::to_string(i) + "]");
      }
      return make_rayleigh_fsmc(k, snr, doppler, rate, eps);
    }
    if (type == "explicit") {
      if (!variable.empty()) {
        throw ConfigError("sweep.variable", "explicit models cannot be swept");
      }
      return FadingChannelModel::from_json(spec);
    }
  } catch (const std::invalid_argument& err) {
    throw ConfigError("model", err.what());
  }
  throw ConfigError("model.type", "unknown model type '" + type + "'");
}

// ---------------------------------------------------------------------------
// worker pool

void parallel_for_index(int count, int jobs, const std::function<void(int)>& body) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(jobs);
  for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// per-kind runners

PerformanceReport point_report(const FadingChannelModel& model, double gamma, double rho,
                               int info_bits, const SwitchingPolicy& policy,
                               int block_length, std::span<const double> thresholds) {
  if (info_bits == 0) {
    return optimize_info_bits(model, gamma, rho, policy, block_length, thresholds).second;
  }
  const ErasureJointLaw law = erasure_joint_distribution(model, block_length);
  const DecodeMatrices decode = decode_matrices(law, info_bits);
  const double rho_r = 1.0 - std::pow(1.0 - rho, info_bits);
  const SegmentationParams seg{gamma, rho, rho_r, info_bits};
  const QbdBlocks blocks = build_blocks(model, decode, seg, policy);
  const QbdSolution solution = solve_qbd(blocks);
  try {
    return performance_report(blocks, solution, seg, policy, info_bits, block_length,
                              thresholds);
  } catch (const UnstableError& err) {
    return unstable_report(policy, info_bits, block_length, err.service_rate,
                           err.arrival_rate, thresholds);
  }
}

ResultTable run_analyze(const ExperimentConfig& c) {
  const FadingChannelModel model = model_from_spec(c.model_spec, "", 0.0, c.block_length);
  ResultTable table;
  table.columns = PerformanceReport::csv_header(c.ccdf_thresholds);
  int unstable_rows = 0;
  for (int ell : c.policies) {
    const PerformanceReport report =
        point_report(model, c.gamma, c.rho, c.info_bits, SwitchingPolicy::below(ell),
                     c.block_length, c.ccdf_thresholds);
    if (!report.stable) ++unstable_rows;
    table.rows.push_back(report.csv_row());
  }
  table.metadata["unstable_rows"] = unstable_rows;
  return table;
}

ResultTable run_throughput_sweep(const ExperimentConfig& c, int jobs) {
  const int points = static_cast<int>(c.sweep_values.size());
  const int policies = static_cast<int>(c.policies.size());
  ResultTable table;
  table.columns.push_back(c.sweep_variable);
  for (int ell : c.policies) {
    table.columns.push_back("K_ell" + std::to_string(ell));
    table.columns.push_back("throughput_ell" + std::to_string(ell));
  }
  table.rows.assign(points, std::vector<double>(table.columns.size(), 0.0));

  parallel_for_index(points, jobs, [&](int i) {
    const double value = c.sweep_values[i];
    const FadingChannelModel model =
        model_from_spec(c.model_spec, c.sweep_variable, value, c.block_length);
    std::vector<double>& row = table.rows[i];
    row[0] = value;
    for (int p = 0; p < policies; ++p) {
      const auto [bits, throughput] =
          optimal_throughput(model, SwitchingPolicy::below(c.policies[p]), c.block_length);
      row[1 + 2 * p] = bits;
      row[2 + 2 * p] = throughput;
    }
  });

  if (c.with_crossover && policies == 2) {
    std::vector<double> xs(points), ya(points), yb(points);
    for (int i = 0; i < points; ++i) {
      xs[i] = table.rows[i][0];
      ya[i] = table.rows[i][2];
      yb[i] = table.rows[i][4];
    }
    double crossover = std::numeric_limits<double>::quiet_NaN();
    try {
      const double coarse = find_crossover(xs, ya, yb);
      // Bracket around the coarse estimate, then refine on the solvers.
      double lo = xs.front(), hi = xs.back();
      for (int i = 0; i + 1 < points; ++i) {
        if (xs[i] <= coarse && coarse <= xs[i + 1]) {
          lo = xs[i];
          hi = xs[i + 1];
          break;
        }
      }
      const SwitchingPolicy first = SwitchingPolicy::below(c.policies[0]);
      const SwitchingPolicy second = SwitchingPolicy::below(c.policies[1]);
      crossover = refine_crossover(
          lo, hi,
          [&](double v) {
            const FadingChannelModel m =
                model_from_spec(c.model_spec, c.sweep_variable, v, c.block_length);
            return optimal_throughput(m, second, c.block_length).second -
                   optimal_throughput(m, first, c.block_length).second;
          },
          1e-3);
      table.metadata["crossover"] = crossover;
    } catch (const std::runtime_error&) {
      table.metadata["crossover"] = nullptr;
    }
    table.columns.push_back("crossover_" + c.sweep_variable);
    for (auto& row : table.rows) row.push_back(crossover);
  }
  return table;
}

ResultTable run_delay_sweep(const ExperimentConfig& c, int jobs) {
  const int points = static_cast<int>(c.sweep_values.size());
  ResultTable table;
  table.columns.push_back(c.sweep_variable);
  for (int ell : c.policies) {
    const std::string suffix = "_ell" + std::to_string(ell);
    table.columns.push_back("K" + suffix);
    table.columns.push_back("throughput" + suffix);
    table.columns.push_back("mean_queue" + suffix);
    table.columns.push_back("mean_wait" + suffix);
    table.columns.push_back("decay_rate" + suffix);
    table.columns.push_back("stable" + suffix);
  }
  table.rows.assign(points, std::vector<double>(table.columns.size(), 0.0));
  std::atomic<int> unstable_rows{0};

  parallel_for_index(points, jobs, [&](int i) {
    const double value = c.sweep_values[i];
    const FadingChannelModel model =
        model_from_spec(c.model_spec, c.sweep_variable, value, c.block_length);
    std::vector<double>& row = table.rows[i];
    row[0] = value;
    size_t col = 1;
    for (int ell : c.policies) {
      const PerformanceReport report =
          point_report(model, c.gamma, c.rho, c.info_bits, SwitchingPolicy::below(ell),
                       c.block_length, c.ccdf_thresholds);
      if (!report.stable) unstable_rows.fetch_add(1);
      row[col++] = report.info_bits;
      row[col++] = report.throughput_bpcu;
      row[col++] = report.mean_queue;
      row[col++] = report.mean_wait;
      row[col++] = report.decay_rate;
      row[col++] = report.stable ? 1.0 : 0.0;
    }
  });
  table.metadata["unstable_rows"] = unstable_rows.load();
  return table;
}

ResultTable run_boundary_map(const ExperimentConfig& c, int jobs) {
  if (c.policies.size() != 2) {
    throw ConfigError("policies", "boundary_map compares exactly two policies");
  }
  const int points = static_cast<int>(c.sweep_values.size());
  ResultTable table;
  table.columns = {"eps_bad", "boundary_memory"};
  table.rows.assign(points, std::vector<double>(2, 0.0));

  const SwitchingPolicy first = SwitchingPolicy::below(c.policies[0]);
  const SwitchingPolicy second = SwitchingPolicy::below(c.policies[1]);

  parallel_for_index(points, jobs, [&](int i) {
    const double eps_bad = c.sweep_values[i];
    const double eps_good = c.eps_good_factor * (1.0 - eps_bad);
    if (eps_bad <= eps_good) {
      throw ConfigError("sweep.values", "eps_bad must exceed the derived eps_good");
    }
    const double p_bad = (c.average_erasure - eps_good) / (eps_bad - eps_good);
    if (!(p_bad > 0.0 && p_bad < 1.0)) {
      throw ConfigError("average_erasure", "no valid bad-state probability at eps_bad=" +
                                               std::to_string(eps_bad));
    }
    auto diff = [&](double memory) {
      const FadingChannelModel model =
          make_gilbert_elliott(p_bad, memory, c.block_length, eps_bad, eps_good);
      return optimal_throughput(model, second, c.block_length).second -
             optimal_throughput(model, first, c.block_length).second;
    };

    // Coarse scan for a sign change, then bisection.
    double boundary = std::numeric_limits<double>::quiet_NaN();
    const int coarse_points = 25;
    double prev_x = c.memory_bracket_low;
    double prev_d = diff(prev_x);
    for (int s = 1; s < coarse_points; ++s) {
      const double x = c.memory_bracket_low +
                       (c.memory_bracket_high - c.memory_bracket_low) * s /
                           (coarse_points - 1);
      const double d = diff(x);
      if (prev_d == 0.0) {
        boundary = prev_x;
        break;
      }
      if (d == 0.0 || d * prev_d < 0.0) {
        boundary = refine_crossover(prev_x, x, diff, 1e-3);
        break;
      }
      prev_x = x;
      prev_d = d;
    }
    table.rows[i] = {eps_bad, boundary};
  });
  return table;
}

ResultTable run_pomdp_policy(const ExperimentConfig& c) {
  const FadingChannelModel model = model_from_spec(c.model_spec, "", 0.0, c.block_length);
  const PomdpModel pomdp = PomdpModel::build(model, c.block_length, c.discount,
                                             c.allow_reconfigure, c.rate_stride);
  const ValueFunction vf = value_iteration(pomdp, GridSpec{c.grid_resolution});

  ResultTable table;
  const int k = model.state_count();
  for (int s = 1; s <= k; ++s) table.columns.push_back("psi" + std::to_string(s));
  table.columns.push_back("value");
  table.columns.push_back("action");
  table.columns.push_back("rate");
  table.rows.reserve(vf.points.size());
  for (size_t p = 0; p < vf.points.size(); ++p) {
    std::vector<double> row;
    row.reserve(k + 3);
    for (int s = 0; s < k; ++s) row.push_back(vf.points[p](s));
    row.push_back(vf.values[p]);
    row.push_back(vf.policy[p]);
    row.push_back(static_cast<double>(vf.policy[p]) / c.block_length);
    table.rows.push_back(std::move(row));
  }
  if (k == 2) {
    const ThresholdScan scan = extract_thresholds(vf);
    table.metadata["thresholds"] = thresholds_to_json(scan);
  }
  return table;
}

ResultTable run_pomdp_mean_value(const ExperimentConfig& c, int jobs) {
  const int points = static_cast<int>(c.sweep_values.size());
  ResultTable table;
  table.columns = {c.sweep_variable, "mean_value_fixed", "mean_value_reconfigurable"};
  table.rows.assign(points, std::vector<double>(3, 0.0));

  parallel_for_index(points, jobs, [&](int i) {
    const double value = c.sweep_values[i];
    const FadingChannelModel model =
        model_from_spec(c.model_spec, c.sweep_variable, value, c.block_length);
    const PomdpModel fixed =
        PomdpModel::build(model, c.block_length, c.discount, false, c.rate_stride);
    const PomdpModel reconfigurable =
        PomdpModel::build(model, c.block_length, c.discount, true, c.rate_stride);
    const double mean_fixed = mean_value(value_iteration(fixed, GridSpec{c.grid_resolution}));
    const double mean_reconf =
        mean_value(value_iteration(reconfigurable, GridSpec{c.grid_resolution}));
    table.rows[i] = {value, mean_fixed, mean_reconf};
  });
  return table;
}

ResultTable run_simulate(const ExperimentConfig& c) {
  if (c.info_bits < 1) {
    throw ConfigError("info_bits", "simulate requires a fixed integer info_bits");
  }
  if (c.policies.size() != 1) {
    throw ConfigError("policies", "simulate runs a single policy");
  }
  const FadingChannelModel model = model_from_spec(c.model_spec, "", 0.0, c.block_length);
  const double rho_r = 1.0 - std::pow(1.0 - c.rho, c.info_bits);
  SimConfig config{model,
                   c.block_length,
                   c.info_bits,
                   SegmentationParams{c.gamma, c.rho, rho_r, c.info_bits},
                   SwitchingPolicy::below(c.policies[0]),
                   c.horizon,
                   c.seed,
                   c.decode_mode == "gf2" ? DecodeMode::Gf2 : DecodeMode::Formula,
                   c.warmup,
                   c.ccdf_thresholds};
  const SimReport report = simulate(config);
  ResultTable table;
  table.columns = SimReport::csv_header(c.ccdf_thresholds);
  table.rows.push_back(report.csv_row());
  table.metadata["seed"] = c.seed;
  return table;
}

void append_value(std::string& out, double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  ExperimentConfig c;
  c.raw = doc;

  const json& kind_json = require_field(doc, "", "kind");
  if (!kind_json.is_string()) throw ConfigError("kind", "expected a string");
  c.kind = parse_kind(kind_json.get<std::string>());

  if (doc.contains("block_length")) {
    c.block_length = integer_at(doc.at("block_length"), "block_length");
    if (c.block_length < 1) throw ConfigError("block_length", "must be >= 1");
  }
  if (doc.contains("gamma")) {
    c.gamma = number_at(doc.at("gamma"), "gamma");
    if (!(c.gamma >= 0.0 && c.gamma < 1.0)) throw ConfigError("gamma", "must lie in [0, 1)");
  }
  if (doc.contains("rho") && doc.contains("mean_packet_bits")) {
    throw ConfigError("rho", "give either rho or mean_packet_bits, not both");
  }
  if (doc.contains("rho")) {
    c.rho = number_at(doc.at("rho"), "rho");
  } else if (doc.contains("mean_packet_bits")) {
    const double bits = number_at(doc.at("mean_packet_bits"), "mean_packet_bits");
    if (!(bits > 1.0)) throw ConfigError("mean_packet_bits", "must exceed 1");
    c.rho = 1.0 / bits;
  }
  if (!(c.rho > 0.0 && c.rho < 1.0)) throw ConfigError("rho", "must lie in (0, 1)");

  if (kind_needs_model(c.kind)) {
    c.model_spec = require_field(doc, "", "model");
  }

  if (doc.contains("sweep")) {
    const json& sweep = doc.at("sweep");
    const json& variable = require_field(sweep, "sweep", "variable");
    if (!variable.is_string()) throw ConfigError("sweep.variable", "expected a string");
    c.sweep_variable = variable.get<std::string>();
    if (c.sweep_variable != "memory" && c.sweep_variable != "doppler" &&
        c.sweep_variable != "eps_bad") {
      throw ConfigError("sweep.variable", "must be memory, doppler, or eps_bad");
    }
    c.sweep_values = parse_sweep_values(sweep);
  } else if (kind_needs_sweep(c.kind)) {
    throw ConfigError("sweep", "missing required field");
  }

  if (doc.contains("policies")) {
    const json& policies = doc.at("policies");
    if (!policies.is_array() || policies.empty()) {
      throw ConfigError("policies", "expected a nonempty array of switching thresholds");
    }
    c.policies.clear();
    for (size_t i = 0; i < policies.size(); ++i) {
      const int ell = integer_at(policies[i], "policies[" + std::to_string(i) + "]");
      if (ell < 1) throw ConfigError("policies[" + std::to_string(i) + "]", "must be >= 1");
      c.policies.push_back(ell);
    }
  }

  if (doc.contains("info_bits")) {
    const json& bits = doc.at("info_bits");
    if (bits.is_string()) {
      if (bits.get<std::string>() != "optimize") {
        throw ConfigError("info_bits", "expected an integer or \"optimize\"");
      }
      c.info_bits = 0;
    } else {
      c.info_bits = integer_at(bits, "info_bits");
      if (c.info_bits < 1 || c.info_bits > c.block_length) {
        throw ConfigError("info_bits", "must lie in [1, block_length]");
      }
    }
  }

  if (doc.contains("ccdf_thresholds")) {
    const json& thresholds = doc.at("ccdf_thresholds");
    if (!thresholds.is_array()) throw ConfigError("ccdf_thresholds", "expected an array");
    c.ccdf_thresholds.clear();
    for (size_t i = 0; i < thresholds.size(); ++i) {
      c.ccdf_thresholds.push_back(
          number_at(thresholds[i], "ccdf_thresholds[" + std::to_string(i) + "]"));
    }
  }

  if (doc.contains("crossover")) {
    if (!doc.at("crossover").is_boolean()) throw ConfigError("crossover", "expected a boolean");
    c.with_crossover = doc.at("crossover").get<bool>();
  }

  if (doc.contains("discount")) {
    c.discount = number_at(doc.at("discount"), "discount");
    if (!(c.discount > 0.0 && c.discount < 1.0)) {
      throw ConfigError("discount", "must lie in (0, 1)");
    }
  }
  if (doc.contains("grid_points")) {
    c.grid_resolution = integer_at(doc.at("grid_points"), "grid_points");
    if (c.grid_resolution < 100) throw ConfigError("grid_points", "must be >= 100");
  }
  if (doc.contains("allow_reconfigure")) {
    if (!doc.at("allow_reconfigure").is_boolean()) {
      throw ConfigError("allow_reconfigure", "expected a boolean");
    }
    c.allow_reconfigure = doc.at("allow_reconfigure").get<bool>();
  }
  if (doc.contains("rate_stride")) {
    c.rate_stride = integer_at(doc.at("rate_stride"), "rate_stride");
    if (c.rate_stride < 1) throw ConfigError("rate_stride", "must be >= 1");
  }

  if (doc.contains("average_erasure")) {
    c.average_erasure = number_at(doc.at("average_erasure"), "average_erasure");
    if (!(c.average_erasure > 0.0 && c.average_erasure < 1.0)) {
      throw ConfigError("average_erasure", "must lie in (0, 1)");
    }
  }
  if (doc.contains("eps_good_factor")) {
    c.eps_good_factor = number_at(doc.at("eps_good_factor"), "eps_good_factor");
    if (!(c.eps_good_factor >= 0.0 && c.eps_good_factor < 1.0)) {
      throw ConfigError("eps_good_factor", "must lie in [0, 1)");
    }
  }
  if (doc.contains("memory_bracket")) {
    const json& bracket = doc.at("memory_bracket");
    if (!bracket.is_array() || bracket.size() != 2) {
      throw ConfigError("memory_bracket", "expected [low, high]");
    }
    c.memory_bracket_low = number_at(bracket[0], "memory_bracket[0]");
    c.memory_bracket_high = number_at(bracket[1], "memory_bracket[1]");
    if (!(c.memory_bracket_low >= 0.0 && c.memory_bracket_high < 1.0 &&
          c.memory_bracket_low < c.memory_bracket_high)) {
      throw ConfigError("memory_bracket", "needs 0 <= low < high < 1");
    }
  }

  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned() && !doc.at("seed").is_number_integer()) {
      throw ConfigError("seed", "expected an integer");
    }
    c.seed = doc.at("seed").get<uint64_t>();
  }
  if (doc.contains("horizon")) {
    if (!doc.at("horizon").is_number_integer()) {
      throw ConfigError("horizon", "expected an integer");
    }
    c.horizon = doc.at("horizon").get<long>();
    if (c.horizon < 1) throw ConfigError("horizon", "must be >= 1");
  }
  if (doc.contains("warmup")) {
    if (!doc.at("warmup").is_number_integer()) {
      throw ConfigError("warmup", "expected an integer");
    }
    c.warmup = doc.at("warmup").get<long>();
    if (c.warmup < 0) throw ConfigError("warmup", "must be >= 0");
  }
  if (doc.contains("decode_mode")) {
    if (!doc.at("decode_mode").is_string()) throw ConfigError("decode_mode", "expected a string");
    c.decode_mode = doc.at("decode_mode").get<std::string>();
    if (c.decode_mode != "formula" && c.decode_mode != "gf2") {
      throw ConfigError("decode_mode", "must be formula or gf2");
    }
  }

  // Kind-specific coherence checks.
  if (c.kind == ExperimentKind::BoundaryMap && c.sweep_variable != "eps_bad") {
    throw ConfigError("sweep.variable", "boundary_map sweeps eps_bad");
  }
  if (c.kind == ExperimentKind::PomdpMeanValue && c.sweep_variable != "memory") {
    throw ConfigError("sweep.variable", "pomdp_mean_value sweeps memory");
  }
  if (c.kind == ExperimentKind::RayleighSweep && c.sweep_variable != "doppler") {
    throw ConfigError("sweep.variable", "rayleigh_sweep sweeps doppler");
  }
  return c;
}

uint64_t config_hash(const json& doc) {
  const std::string canonical = doc.dump();
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string ResultTable::to_csv() const {
  std::string out;
  for (const auto& [key, value] : metadata.items()) {
    out += "# " + key + "=";
    out += value.is_string() ? value.get<std::string>() : value.dump();
    out += '\n';
  }
  for (size_t i = 0; i < columns.size(); ++i) {
    if (i > 0) out += ',';
    out += columns[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ',';
      append_value(out, row[i]);
    }
    out += '\n';
  }
  return out;
}

nlohmann::json ResultTable::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) rows_json.push_back(row);
  return nlohmann::json{
      {"metadata", metadata}, {"columns", columns}, {"rows", std::move(rows_json)}};
}

ResultTable run(const ExperimentConfig& config, int jobs) {
  if (jobs < 1) throw ConfigError("jobs", "must be >= 1");
  const auto start = std::chrono::steady_clock::now();

  ResultTable table;
  switch (config.kind) {
    case ExperimentKind::Analyze:
      table = run_analyze(config);
      break;
    case ExperimentKind::ThroughputSweep:
      table = run_throughput_sweep(config, jobs);
      break;
    case ExperimentKind::BoundaryMap:
      table = run_boundary_map(config, jobs);
      break;
    case ExperimentKind::DelaySweep:
    case ExperimentKind::RayleighSweep:
      table = run_delay_sweep(config, jobs);
      break;
    case ExperimentKind::PomdpPolicy:
      table = run_pomdp_policy(config);
      break;
    case ExperimentKind::PomdpMeanValue:
      table = run_pomdp_mean_value(config, jobs);
      break;
    case ExperimentKind::Simulate:
      table = run_simulate(config);
      break;
  }

  char hash[24];
  std::snprintf(hash, sizeof hash, "0x%016llx",
                static_cast<unsigned long long>(config_hash(config.raw)));
  table.metadata["config_hash"] = hash;
  table.metadata["tool_version"] = version;
  table.metadata["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return table;
}

double find_crossover(std::span<const double> xs, std::span<const double> ya,
                      std::span<const double> yb) {
  if (xs.size() != ya.size() || xs.size() != yb.size() || xs.size() < 2) {
    throw std::invalid_argument("find_crossover: curves need matching grids with >= 2 points");
  }
  double last_value = 0.0;
  double last_x = 0.0;
  bool have_sign = false;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double d = yb[i] - ya[i];
    if (d == 0.0) continue;
    if (have_sign && d * last_value < 0.0) {
      // Linear interpolation between the last two nonzero differences.
      return last_x + (xs[i] - last_x) * last_value / (last_value - d);
    }
    last_value = d;
    last_x = xs[i];
    have_sign = true;
  }
  throw std::runtime_error("no crossover in range");
}

double refine_crossover(double lo, double hi, const std::function<double(double)>& diff,
                        double xtol) {
  if (!(xtol > 0.0)) throw std::invalid_argument("refine_crossover: xtol must be positive");
  double flo = diff(lo);
  double fhi = diff(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (flo * fhi > 0.0) throw std::runtime_error("no crossover in range");
  while (hi - lo > xtol) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = diff(mid);
    if (fmid == 0.0) return mid;
    if (fmid * flo < 0.0) {
      hi = mid;
      fhi = fmid;
    } else {
      lo = mid;
      flo = fmid;
    }
  }
  return 0.5 * (lo + hi);
}

void convert_wait_columns_to_ms(ResultTable& table) {
  for (size_t col = 0; col < table.columns.size(); ++col) {
    if (table.columns[col].find("wait") == std::string::npos) continue;
    table.columns[col] += "_ms";
    for (auto& row : table.rows) row[col] *= ms_per_cycle;
  }
}

namespace {

const std::pair<const char*, const char*> kPresets[] = {
    {"fig3", R"({
      "kind": "throughput_sweep",
      "model": {"type": "gilbert_elliott", "p_bad": 0.2, "eps_bad": 0.5, "eps_good": 0.125},
      "block_length": 114,
      "gamma": 0.2,
      "mean_packet_bits": 195,
      "sweep": {"variable": "memory", "from": 0.0, "to": 0.6, "step": 0.02},
      "policies": [1, 2],
      "info_bits": "optimize",
      "crossover": true
    })"},
    {"fig4", R"({
      "kind": "boundary_map",
      "block_length": 114,
      "gamma": 0.2,
      "mean_packet_bits": 195,
      "average_erasure": 0.2,
      "eps_good_factor": 0.25,
      "sweep": {"variable": "eps_bad", "from": 0.26, "to": 1.0, "step": 0.01},
      "policies": [1, 2],
      "memory_bracket": [0.001, 0.98]
    })"},
    {"fig5", R"({
      "kind": "delay_sweep",
      "model": {"type": "gilbert_elliott", "p_bad": 0.2, "eps_bad": 0.5, "eps_good": 0.125},
      "block_length": 114,
      "gamma": 0.2,
      "mean_packet_bits": 195,
      "sweep": {"variable": "memory", "from": 0.0, "to": 0.6, "step": 0.02},
      "policies": [1, 2],
      "info_bits": "optimize"
    })"},
    {"fig7", R"({
      "kind": "rayleigh_sweep",
      "model": {"type": "rayleigh8"},
      "block_length": 114,
      "gamma": 0.2,
      "mean_packet_bits": 195,
      "sweep": {"variable": "doppler", "from": 40, "to": 120, "step": 5},
      "policies": [1, 4, 5, 6],
      "info_bits": "optimize"
    })"},
    {"fig8", R"({
      "kind": "rayleigh_sweep",
      "model": {"type": "rayleigh8"},
      "block_length": 114,
      "gamma": 0.2,
      "mean_packet_bits": 195,
      "sweep": {"variable": "doppler", "from": 40, "to": 120, "step": 5},
      "policies": [1, 4, 5, 6],
      "info_bits": "optimize"
    })"},
    {"fig9", R"({
      "kind": "pomdp_policy",
      "model": {"type": "gilbert_elliott", "p_bad": 0.2, "eps_bad": 1.0, "eps_good": 0.0,
                "memory": 0.3},
      "block_length": 114,
      "discount": 0.9,
      "grid_points": 2000,
      "allow_reconfigure": true
    })"},
    {"fig10", R"({
      "kind": "pomdp_policy",
      "model": {"type": "explicit", "k": 3,
                "B": [[0.998, 0.002, 0.0], [0.001, 0.998, 0.001], [0.0, 0.002, 0.998]],
                "epsilons": [1.0, 0.15, 0.0]},
      "block_length": 114,
      "discount": 0.9,
      "grid_points": 200,
      "allow_reconfigure": true
    })"},
    {"fig11", R"({
      "kind": "pomdp_mean_value",
      "model": {"type": "gilbert_elliott", "p_bad": 0.2, "eps_bad": 1.0, "eps_good": 0.0},
      "block_length": 114,
      "discount": 0.9,
      "grid_points": 1000,
      "sweep": {"variable": "memory", "from": 0.1, "to": 0.9, "step": 0.05}
    })"},
};

}  // namespace

ExperimentConfig experiment_preset(const std::string& name) {
  for (const auto& [preset_name, text] : kPresets) {
    if (name == preset_name) return ExperimentConfig::from_json(json::parse(text));
  }
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : kPresets) names.emplace_back(name);
  return names;
}

}  // namespace vcq
