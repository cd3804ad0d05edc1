#include "vcq/sim.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <stdexcept>

#include "vcq/gf2.hpp"
#include "vcq/rng.hpp"

namespace vcq {

namespace {

// Stream indices for the counter-based generator.
enum Stream : uint64_t {
  kInit = 0,
  kChannel = 1,
  kErasure = 2,
  kArrival = 3,
  kDecode = 4,
  kReconfigure = 5,
};

constexpr int kBatches = 32;

struct CumulativeRows {
  // Per-state cumulative transition rows for inverse-cdf sampling.
  Matrix cum;

  explicit CumulativeRows(const Matrix& m) : cum(m.rows(), m.cols()) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      double run = 0.0;
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        run += m(i, j);
        cum(i, j) = run;
      }
      cum(i, m.cols() - 1) = 1.0;
    }
  }

  int sample(int from, double u) const {
    const Eigen::Index k = cum.cols();
    for (Eigen::Index j = 0; j < k; ++j) {
      if (u < cum(from, j)) return static_cast<int>(j);
    }
    return static_cast<int>(k - 1);
  }
};

int sample_categorical(const RowVector& p, double u) {
  double run = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    run += p(j);
    if (u < run) return static_cast<int>(j);
  }
  return static_cast<int>(p.size() - 1);
}

long sample_geometric(double parameter, double u) {
  if (parameter >= 1.0) return 1;
  return 1 + static_cast<long>(std::log1p(-u) / std::log1p(-parameter));
}

struct BatchAccumulator {
  double batch_sum = 0.0;
  long batch_count = 0;
  std::vector<double> batch_means;
  double total = 0.0;
  long count = 0;
  long per_batch;

  explicit BatchAccumulator(long expected_samples)
      : per_batch(std::max<long>(1, expected_samples / kBatches)) {}

  void add(double v) {
    total += v;
    ++count;
    batch_sum += v;
    if (++batch_count == per_batch) {
      batch_means.push_back(batch_sum / batch_count);
      batch_sum = 0.0;
      batch_count = 0;
    }
  }

  double mean() const { return count > 0 ? total / count : 0.0; }

  double half_width() const {
    const size_t b = batch_means.size();
    if (b < 2) return 0.0;
    const double m = mean();
    double ss = 0.0;
    for (double v : batch_means) ss += (v - m) * (v - m);
    return 1.96 * std::sqrt(ss / (b - 1) / b);
  }
};

uint64_t extract_columns(uint64_t row, uint64_t mask) {
  uint64_t out = 0;
  int pos = 0;
  while (mask != 0) {
    const int bit = std::countr_zero(mask);
    out |= ((row >> bit) & 1) << pos;
    ++pos;
    mask &= mask - 1;
  }
  return out;
}

struct Packet {
  long remaining;  // segments (switching mode) or bits (belief-driven mode)
  long arrival_cycle;
};

void validate_common(const SimConfig& config) {
  if (config.horizon < 1) throw std::invalid_argument("simulate: horizon must be >= 1");
  if (config.warmup < 0 || config.warmup >= config.horizon) {
    throw std::invalid_argument("simulate: warmup must lie in [0, horizon)");
  }
  if (config.decode_mode == DecodeMode::Gf2 && config.block_length > 64) {
    throw std::invalid_argument("simulate: gf2 decode mode needs block_length <= 64");
  }
  if (!(config.seg.gamma >= 0.0 && config.seg.gamma < 1.0)) {
    throw std::invalid_argument("simulate: gamma must lie in [0, 1)");
  }
}

struct DecodeSampler {
  DecodeMode mode;
  int block_length;
  const CounterRng& rng;

  // formula mode: precomputed failure probabilities by erasure count
  std::map<int, std::vector<double>> failure_by_redundancy;

  const std::vector<double>& failure_row(int redundancy) {
    auto it = failure_by_redundancy.find(redundancy);
    if (it == failure_by_redundancy.end()) {
      std::vector<double> row(block_length + 1);
      for (int e = 0; e <= block_length; ++e) row[e] = random_code_failure(redundancy, e);
      it = failure_by_redundancy.emplace(redundancy, std::move(row)).first;
    }
    return it->second;
  }

  /// Decode attempt for cycle t: formula mode draws one uniform against
  /// the failure law; gf2 mode samples the parity-check rows and tests
  /// the rank of the erased columns.
  bool success(long t, int redundancy, int erasures, uint64_t erased_mask) {
    if (mode == DecodeMode::Formula) {
      const double pf = failure_row(redundancy)[erasures];
      return !(rng.uniform(kDecode, t) < pf);
    }
    if (erasures == 0) return true;
    const uint64_t row_mask =
        (block_length == 64) ? ~uint64_t{0} : (uint64_t{1} << block_length) - 1;
    std::array<uint64_t, 64> sub{};
    for (int row = 0; row < redundancy; ++row) {
      const uint64_t h_row =
          rng.bits(kDecode, static_cast<uint64_t>(t) * 64 + row) & row_mask;
      sub[row] = extract_columns(h_row, erased_mask);
    }
    const int rank =
        gf2::rank_of_rows(std::span<const uint64_t>(sub.data(), redundancy));
    return rank == erasures;
  }
};

}  // namespace

SimReport simulate(const SimConfig& config) {
  validate_common(config);
  const int k = config.model.state_count();
  const int n = config.block_length;
  if (config.info_bits < 1 || config.info_bits > n) {
    throw std::invalid_argument("simulate: info_bits must lie in [1, block_length]");
  }
  if (config.seg.info_bits != config.info_bits) {
    throw std::invalid_argument("simulate: segmentation and config disagree on info_bits");
  }
  if (config.policy.reconfigure_below < 1 || config.policy.reconfigure_below > k + 1) {
    throw std::invalid_argument("simulate: policy threshold out of range");
  }

  const CounterRng rng(config.seed);
  const CumulativeRows step(config.model.transition());
  const RowVector stationary = stationary_distribution(config.model);
  const Vector& eps = config.model.epsilons();
  DecodeSampler decoder{config.decode_mode, n, rng, {}};
  const int redundancy = n - config.info_bits;

  const long samples = config.horizon - config.warmup;
  BatchAccumulator queue_acc(samples);
  BatchAccumulator service_acc(samples);
  BatchAccumulator wait_acc(std::max<long>(1, static_cast<long>(samples * config.seg.gamma)));
  std::vector<double> thresholds(config.ccdf_thresholds);
  std::sort(thresholds.begin(), thresholds.end());
  std::vector<long> ccdf_counts(thresholds.size(), 0);
  std::vector<long> occupancy(k, 0);

  std::deque<Packet> queue;
  int state = sample_categorical(stationary, rng.uniform(kInit, 0));

  for (long t = 0; t < config.horizon; ++t) {
    const bool recording = t >= config.warmup;
    if (recording) {
      const double q = static_cast<double>(queue.size());
      queue_acc.add(q);
      ++occupancy[state];
      for (size_t i = 0; i < thresholds.size(); ++i) {
        if (q > thresholds[i]) ++ccdf_counts[i];
      }
    }

    const bool reconfigure = config.policy.reconfigures(state + 1);
    int next_state = state;
    int erasures = 0;
    uint64_t erased_mask = 0;
    bool decoded = false;

    if (reconfigure) {
      next_state = sample_categorical(stationary, rng.uniform(kReconfigure, t));
    } else {
      int s = state;
      const uint64_t base = static_cast<uint64_t>(t) * n;
      for (int bit = 0; bit < n; ++bit) {
        if (rng.uniform(kErasure, base + bit) < eps(s)) {
          erased_mask |= (n <= 64) ? (uint64_t{1} << bit) : 0;
          ++erasures;
        }
        s = step.sample(s, rng.uniform(kChannel, base + bit));
      }
      next_state = s;
      decoded = decoder.success(t, redundancy, erasures, erased_mask);
      if (recording) service_acc.add(decoded ? 1.0 : 0.0);
    }
    if (recording && reconfigure) service_acc.add(0.0);

    if (decoded && !queue.empty()) {
      Packet& lead = queue.front();
      if (--lead.remaining == 0) {
        if (lead.arrival_cycle >= config.warmup) {
          wait_acc.add(static_cast<double>(t - lead.arrival_cycle));
        }
        queue.pop_front();
      }
    }

    if (rng.uniform(kArrival, 2 * t) < config.seg.gamma) {
      const long segments =
          sample_geometric(config.seg.rho_r, rng.uniform(kArrival, 2 * t + 1));
      queue.push_back(Packet{segments, t});
    }
    state = next_state;
  }

  SimReport report;
  report.policy_ell = config.policy.reconfigure_below;
  report.info_bits = config.info_bits;
  report.service_rate = service_acc.mean();
  report.throughput_bpcu =
      report.service_rate * static_cast<double>(config.info_bits) / n;
  report.arrival_rate =
      config.seg.gamma > 0.0 ? config.seg.gamma / config.seg.rho_r : 0.0;
  report.mean_queue = queue_acc.mean();
  report.mean_wait = wait_acc.mean();
  report.hw_service_rate = service_acc.half_width();
  report.hw_mean_queue = queue_acc.half_width();
  report.hw_mean_wait = wait_acc.half_width();
  report.ccdf.reserve(thresholds.size());
  for (size_t i = 0; i < thresholds.size(); ++i) {
    report.ccdf.emplace_back(thresholds[i],
                             static_cast<double>(ccdf_counts[i]) / samples);
  }
  report.occupancy.reserve(k);
  for (int i = 0; i < k; ++i) {
    report.occupancy.push_back(static_cast<double>(occupancy[i]) / samples);
  }
  return report;
}

SimReport simulate(const SimConfig& config, const PomdpModel& pomdp,
                   const ValueFunction& policy) {
  validate_common(config);
  const int k = config.model.state_count();
  const int n = config.block_length;
  if (pomdp.block_length() != n || pomdp.state_count() != k) {
    throw std::invalid_argument("simulate: POMDP model does not match the channel config");
  }
  if (!(config.seg.rho > 0.0 && config.seg.rho < 1.0)) {
    throw std::invalid_argument("simulate: belief-driven mode needs rho in (0, 1)");
  }

  const CounterRng rng(config.seed);
  const CumulativeRows step(config.model.transition());
  const RowVector stationary = stationary_distribution(config.model);
  const Vector& eps = config.model.epsilons();
  const Matrix block_step = n_step_matrix(config.model, n);
  DecodeSampler decoder{config.decode_mode, n, rng, {}};

  const long samples = config.horizon - config.warmup;
  BatchAccumulator queue_acc(samples);
  BatchAccumulator service_acc(samples);
  BatchAccumulator wait_acc(std::max<long>(1, static_cast<long>(samples * config.seg.gamma)));
  std::vector<double> thresholds(config.ccdf_thresholds);
  std::sort(thresholds.begin(), thresholds.end());
  std::vector<long> ccdf_counts(thresholds.size(), 0);
  std::vector<long> occupancy(k, 0);
  double delivered_bits = 0.0;

  std::deque<Packet> queue;  // remaining counts information bits here
  int state = sample_categorical(stationary, rng.uniform(kInit, 0));
  RowVector belief = stationary;

  for (long t = 0; t < config.horizon; ++t) {
    const bool recording = t >= config.warmup;
    if (recording) {
      const double q = static_cast<double>(queue.size());
      queue_acc.add(q);
      ++occupancy[state];
      for (size_t i = 0; i < thresholds.size(); ++i) {
        if (q > thresholds[i]) ++ccdf_counts[i];
      }
    }

    const int action = queue.empty() ? -1 : policy.action_at(belief);
    int next_state = state;

    if (action == 0) {
      next_state = sample_categorical(stationary, rng.uniform(kReconfigure, t));
      belief = stationary;
      if (recording) service_acc.add(0.0);
    } else {
      // Channel always advances bit by bit when no reconfiguration happens.
      int s = state;
      int erasures = 0;
      uint64_t erased_mask = 0;
      const uint64_t base = static_cast<uint64_t>(t) * n;
      for (int bit = 0; bit < n; ++bit) {
        if (rng.uniform(kErasure, base + bit) < eps(s)) {
          erased_mask |= (n <= 64) ? (uint64_t{1} << bit) : 0;
          ++erasures;
        }
        s = step.sample(s, rng.uniform(kChannel, base + bit));
      }
      next_state = s;

      if (action < 0) {
        // Empty queue: nothing transmitted, no observation; propagate the
        // belief through the block transition.
        belief = belief * block_step;
        belief /= belief.sum();
        if (recording) service_acc.add(0.0);
      } else {
        const bool decoded = decoder.success(t, n - action, erasures, erased_mask);
        if (recording) service_acc.add(decoded ? 1.0 : 0.0);
        if (decoded) {
          Packet& lead = queue.front();
          const double bits = std::min<long>(action, lead.remaining);
          if (recording) delivered_bits += bits;
          lead.remaining -= action;
          if (lead.remaining <= 0) {
            if (lead.arrival_cycle >= config.warmup) {
              wait_acc.add(static_cast<double>(t - lead.arrival_cycle));
            }
            queue.pop_front();
          }
        }
        belief = belief_update(pomdp, belief, action,
                               decoded ? Observation::Ack : Observation::Nack);
      }
    }

    if (rng.uniform(kArrival, 2 * t) < config.seg.gamma) {
      const long bits = sample_geometric(config.seg.rho, rng.uniform(kArrival, 2 * t + 1));
      queue.push_back(Packet{bits, t});
    }
    state = next_state;
  }

  SimReport report;
  report.policy_ell = 0;  // belief-driven, no fixed switching threshold
  report.info_bits = 0;
  report.service_rate = service_acc.mean();
  report.throughput_bpcu = delivered_bits / (static_cast<double>(samples) * n);
  report.arrival_rate = config.seg.gamma > 0.0
                            ? config.seg.gamma / config.seg.rho_r
                            : 0.0;
  report.mean_queue = queue_acc.mean();
  report.mean_wait = wait_acc.mean();
  report.hw_service_rate = service_acc.half_width();
  report.hw_mean_queue = queue_acc.half_width();
  report.hw_mean_wait = wait_acc.half_width();
  report.ccdf.reserve(thresholds.size());
  for (size_t i = 0; i < thresholds.size(); ++i) {
    report.ccdf.emplace_back(thresholds[i],
                             static_cast<double>(ccdf_counts[i]) / samples);
  }
  report.occupancy.reserve(k);
  for (int i = 0; i < k; ++i) {
    report.occupancy.push_back(static_cast<double>(occupancy[i]) / samples);
  }
  return report;
}

RolloutResult rollout_pomdp(const PomdpModel& pomdp, const ValueFunction& policy,
                            int episodes, int steps, uint64_t seed) {
  if (episodes < 1 || steps < 1) {
    throw std::invalid_argument("rollout_pomdp: episodes and steps must be >= 1");
  }
  const CounterRng rng(seed);
  const FadingChannelModel& channel = pomdp.channel();
  const CumulativeRows step(channel.transition());
  const RowVector& stationary = pomdp.stationary();
  const Vector& eps = channel.epsilons();
  const int n = pomdp.block_length();
  const double beta = pomdp.discount();

  std::map<int, std::vector<double>> failure_rows;
  auto failure_row = [&](int action) -> const std::vector<double>& {
    auto it = failure_rows.find(action);
    if (it == failure_rows.end()) {
      std::vector<double> row(n + 1);
      for (int e = 0; e <= n; ++e) row[e] = random_code_failure(n - action, e);
      it = failure_rows.emplace(action, std::move(row)).first;
    }
    return it->second;
  };

  double total = 0.0;
  double total_sq = 0.0;
  for (int episode = 0; episode < episodes; ++episode) {
    int state = sample_categorical(stationary, rng.uniform(kInit, episode));
    RowVector belief = stationary;
    double discount = 1.0;
    double episode_reward = 0.0;
    for (int t = 0; t < steps; ++t) {
      const uint64_t cycle = static_cast<uint64_t>(episode) * steps + t;
      const int action = policy.action_at(belief);
      if (action == 0) {
        state = sample_categorical(stationary, rng.uniform(kReconfigure, cycle));
        belief = stationary;
      } else {
        int s = state;
        int erasures = 0;
        const uint64_t base = cycle * n;
        for (int bit = 0; bit < n; ++bit) {
          if (rng.uniform(kErasure, base + bit) < eps(s)) ++erasures;
          s = step.sample(s, rng.uniform(kChannel, base + bit));
        }
        state = s;
        const bool decoded =
            !(rng.uniform(kDecode, cycle) < failure_row(action)[erasures]);
        if (decoded) {
          episode_reward += discount * static_cast<double>(action) / n;
        }
        belief = belief_update(pomdp, belief, action,
                               decoded ? Observation::Ack : Observation::Nack);
      }
      discount *= beta;
    }
    total += episode_reward;
    total_sq += episode_reward * episode_reward;
  }

  const double mean = total / episodes;
  double half_width = 0.0;
  if (episodes > 1) {
    const double var = (total_sq - episodes * mean * mean) / (episodes - 1);
    half_width = 1.96 * std::sqrt(std::max(0.0, var) / episodes);
  }
  return RolloutResult{mean, half_width};
}

nlohmann::json SimReport::to_json() const {
  nlohmann::json j{
      {"policy_ell", policy_ell},
      {"K", info_bits},
      {"service_rate", service_rate},
      {"throughput_bpcu", throughput_bpcu},
      {"arrival_rate", arrival_rate},
      {"mean_queue", mean_queue},
      {"mean_wait", mean_wait},
      {"hw_service_rate", hw_service_rate},
      {"hw_mean_queue", hw_mean_queue},
      {"hw_mean_wait", hw_mean_wait},
      {"occupancy", occupancy},
  };
  for (const auto& [threshold, prob] : ccdf) {
    char key[48];
    std::snprintf(key, sizeof key, "ccdf_%g", threshold);
    j[key] = prob;
  }
  return j;
}

std::vector<std::string> SimReport::csv_header(std::span<const double> thresholds) {
  std::vector<std::string> header{"policy_ell",   "K",
                                  "service_rate", "throughput_bpcu",
                                  "arrival_rate", "mean_queue",
                                  "mean_wait"};
  std::vector<double> sorted(thresholds.begin(), thresholds.end());
  std::sort(sorted.begin(), sorted.end());
  for (double t : sorted) {
    char key[48];
    std::snprintf(key, sizeof key, "ccdf_%g", t);
    header.emplace_back(key);
  }
  header.emplace_back("hw_service_rate");
  header.emplace_back("hw_mean_queue");
  header.emplace_back("hw_mean_wait");
  return header;
}

std::vector<double> SimReport::csv_row() const {
  std::vector<double> row{static_cast<double>(policy_ell),
                          static_cast<double>(info_bits),
                          service_rate,
                          throughput_bpcu,
                          arrival_rate,
                          mean_queue,
                          mean_wait};
  for (const auto& [threshold, prob] : ccdf) row.push_back(prob);
  row.push_back(hw_service_rate);
  row.push_back(hw_mean_queue);
  row.push_back(hw_mean_wait);
  return row;
}

}  // namespace vcq
