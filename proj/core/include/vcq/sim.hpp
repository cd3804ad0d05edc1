#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "vcq/pomdp.hpp"
#include "vcq/qbd.hpp"

namespace vcq {

enum class DecodeMode {
  Formula,  // failure sampled from the random-code failure law
  Gf2,      // failure decided by the rank of an actual sampled parity-check matrix
};

struct SimConfig {
  FadingChannelModel model;
  int block_length;
  int info_bits;
  SegmentationParams seg;
  SwitchingPolicy policy;
  long horizon;       // codeword cycles
  uint64_t seed = 1;
  DecodeMode decode_mode = DecodeMode::Formula;  // Gf2 needs block_length <= 64
  long warmup = 10000;                            // cycles dropped before statistics
  std::vector<double> ccdf_thresholds = {0, 1, 2, 5, 10, 20, 50};
};

struct SimReport {
  int policy_ell = 1;
  int info_bits = 0;
  double service_rate = 0.0;     // decode successes per cycle (segments per block)
  double throughput_bpcu = 0.0;  // (K/N) * service_rate
  double arrival_rate = 0.0;
  double mean_queue = 0.0;
  double mean_wait = 0.0;  // codeword cycles, arrival-to-departure tagging
  std::vector<std::pair<double, double>> ccdf;
  std::vector<double> occupancy;  // channel-state frequencies at cycle onsets
  double hw_service_rate = 0.0;   // 95% batch-means half-widths
  double hw_mean_queue = 0.0;
  double hw_mean_wait = 0.0;

  nlohmann::json to_json() const;
  static std::vector<std::string> csv_header(std::span<const double> thresholds);
  std::vector<double> csv_row() const;
};

/// Codeword-synchronized discrete-event run of the queueing system under a
/// state-based switching policy. Per cycle: Bernoulli arrival with a
/// geometric segment count, either a reconfiguration (transmission slot
/// lost, channel resampled from the stationary law) or N channel bit
/// steps followed by a decode attempt, and a departure when the lead
/// packet's last segment decodes. Deterministic given the seed; the
/// channel, arrival, and decode draws sit on separate counter-based
/// streams, so switching decode modes does not perturb the channel path.
SimReport simulate(const SimConfig& config);

/// Belief-driven variant: the per-cycle action (reconfigure or code rate)
/// comes from a POMDP policy table evaluated at the tracked belief.
/// Packets are tracked in bits (geometric with parameter seg.rho); a
/// success at rate a delivers a bits with the final segment zero-padded.
/// On idle cycles the belief propagates through the block transition
/// matrix. The service-rate column reports decode successes per cycle and
/// throughput reports delivered information bits per channel use.
SimReport simulate(const SimConfig& config, const PomdpModel& pomdp,
                   const ValueFunction& policy);

struct RolloutResult {
  double mean;        // mean discounted reward over episodes
  double half_width;  // 95% normal half-width
};

/// Simulates true channel trajectories under the greedy policy of a
/// converged value function, tracking the belief exactly as the
/// controller would, and accrues discounted normalized throughput.
RolloutResult rollout_pomdp(const PomdpModel& pomdp, const ValueFunction& policy,
                            int episodes, int steps, uint64_t seed);

}  // namespace vcq
