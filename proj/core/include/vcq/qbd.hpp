#pragma once

#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vcq/code.hpp"

namespace vcq {

/// Hierarchical antenna-switching rule: states strictly below
/// `reconfigure_below` (1-based) trigger a reconfiguration at the onset of
/// a codeword cycle; the remaining states transmit. reconfigure_below = 1
/// never reconfigures (static antenna); k + 1 always reconfigures.
struct SwitchingPolicy {
  int reconfigure_below = 1;

  static SwitchingPolicy fixed() { return SwitchingPolicy{1}; }
  static SwitchingPolicy below(int ell) { return SwitchingPolicy{ell}; }

  bool reconfigures(int state_1based) const { return state_1based < reconfigure_below; }
  bool is_static() const { return reconfigure_below <= 1; }
};

/// Level-transition blocks of the quasi-birth-death chain over
/// (channel state, queue length). `down`/`hold`/`up` govern nonempty
/// levels; `boundary_hold`/`boundary_up` govern the empty queue. Rows of
/// reconfiguring states carry the stationary-resampling probabilities and
/// have zero `down` rows (no departure during reconfiguration).
struct QbdBlocks {
  Matrix down;           // queue decreases by one
  Matrix hold;           // queue unchanged
  Matrix up;             // queue increases by one
  Matrix boundary_hold;  // empty queue, stays empty
  Matrix boundary_up;    // empty queue, first arrival
};

QbdBlocks build_blocks(const FadingChannelModel& model, const DecodeMatrices& decode,
                       const SegmentationParams& seg, const SwitchingPolicy& policy);

/// Minimal solution of U = hold + up (I - U)^{-1} down, iterated from
/// U = hold until the entrywise change drops below tol. Iterates are
/// entrywise nondecreasing and substochastic.
Matrix neuts_taboo_matrix(const QbdBlocks& blocks, double tol = 1e-13,
                          int max_iter = 100000, int* iterations = nullptr);

/// R = up (I - U)^{-1}; the level-q stationary mass is pi_1 R^(q-1).
Matrix rate_matrix(const QbdBlocks& blocks, const Matrix& taboo);

struct BoundaryDistribution {
  RowVector level0;
  RowVector level1;
};

/// Left unit eigenvector of the reduced boundary matrix
/// [[boundary_hold, boundary_up], [down, hold + R down]], normalized so
/// that level0 . 1 + level1 (I - R)^{-1} . 1 = 1. Throws UnstableError
/// when the spectral radius of R is not below one.
BoundaryDistribution boundary_distribution(const QbdBlocks& blocks, const Matrix& rate);

struct QbdSolution {
  Matrix taboo;      // U
  Matrix rate;       // R
  RowVector level0;  // pi_0
  RowVector level1;  // pi_1
  bool stable = false;
  int iterations = 0;
};

/// Full pipeline: taboo matrix, rate matrix, boundary distribution.
/// An unstable chain yields stable = false with empty boundary vectors.
QbdSolution solve_qbd(const QbdBlocks& blocks, double tol = 1e-13, int max_iter = 100000);

/// Expected decode successes per codeword cycle (segments per block)
/// under the channel-at-onset stationary law of the given policy. For the
/// static policy this is sum_ij success(i, j) p(i); switching policies
/// replace reconfiguring rows of the N-step matrix by the stationary law
/// and restrict the sum to transmitting states.
double service_rate(const FadingChannelModel& model, const DecodeMatrices& decode,
                    const SwitchingPolicy& policy);

/// Stable iff the arrival rate gamma / rho_r is strictly below the
/// service rate. gamma = 0 is stable regardless.
bool stability_check(const SegmentationParams& seg, double service);

struct PerformanceReport {
  int policy_ell = 1;
  int info_bits = 0;
  double service_rate = 0.0;     // segments per block
  double throughput_bpcu = 0.0;  // bits per channel use, (K/N) * service rate
  double arrival_rate = 0.0;     // segments per block
  double mean_queue = 0.0;       // packets
  double mean_wait = 0.0;        // codeword cycles
  double decay_rate = 0.0;       // log spectral radius of R
  std::vector<std::pair<double, double>> ccdf;  // (threshold, Pr(Q > threshold))
  bool stable = true;

  nlohmann::json to_json() const;
  static std::vector<std::string> csv_header(std::span<const double> thresholds);
  std::vector<double> csv_row() const;  // matches csv_header order
};

/// Queue metrics from a solved chain: mean queue pi_1 (I - R)^{-2} . 1,
/// mean wait by Little's law in codeword cycles, tail decay log rho(R),
/// and the queue-length CCDF at the given thresholds. Throws
/// UnstableError when the solution is not stable.
PerformanceReport performance_report(const QbdBlocks& blocks, const QbdSolution& solution,
                                     const SegmentationParams& seg,
                                     const SwitchingPolicy& policy, int info_bits,
                                     int block_length, std::span<const double> thresholds);

/// Exhaustive search over info_bits in [1, block_length] maximizing
/// throughput in bits per channel use; ties break toward fewer info bits.
std::pair<int, double> optimal_throughput(const FadingChannelModel& model,
                                          const SwitchingPolicy& policy,
                                          int block_length);

/// Flagged report for an unstable operating point: throughput and rates
/// filled in, queue metrics infinite, stable = false.
PerformanceReport unstable_report(const SwitchingPolicy& policy, int info_bits,
                                  int block_length, double service, double arrival,
                                  std::span<const double> thresholds);

/// optimal_throughput followed by a full queue solve at the optimum. The
/// returned report is flagged (stable = false, infinite mean queue) when
/// the optimum operating point is unstable.
std::pair<int, PerformanceReport> optimize_info_bits(
    const FadingChannelModel& model, double gamma, double rho,
    const SwitchingPolicy& policy, int block_length,
    std::span<const double> thresholds);

}  // namespace vcq
