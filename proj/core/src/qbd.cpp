#include "vcq/qbd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "vcq/errors.hpp"

namespace vcq {

namespace {

void check_policy(const SwitchingPolicy& policy, int k) {
  if (policy.reconfigure_below < 1 || policy.reconfigure_below > k + 1) {
    throw std::invalid_argument("SwitchingPolicy: threshold must lie in [1, k + 1]");
  }
}

// Unstable chains drive the minimal rate matrix to spectral radius exactly
// one; the margin keeps rounding from misclassifying them.
constexpr double kCriticalMargin = 1e-9;

}  // namespace

QbdBlocks build_blocks(const FadingChannelModel& model, const DecodeMatrices& decode,
                       const SegmentationParams& seg, const SwitchingPolicy& policy) {
  const int k = model.state_count();
  if (decode.success.rows() != k || decode.failure.rows() != k) {
    throw std::invalid_argument("build_blocks: decode matrices do not match the channel");
  }
  if (decode.info_bits != seg.info_bits) {
    throw std::invalid_argument("build_blocks: decode and segmentation disagree on info_bits");
  }
  check_policy(policy, k);
  const double gamma = seg.gamma;
  const double rho_r = seg.rho_r;
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("build_blocks: gamma must lie in [0, 1)");
  }
  if (!(rho_r > 0.0 && rho_r <= 1.0)) {
    throw std::invalid_argument("build_blocks: rho_r must lie in (0, 1]");
  }

  // N-step transition matrix as the marginal of the decode pair, so the
  // level blocks and boundary blocks agree exactly.
  const Matrix block_step = decode.success + decode.failure;
  const RowVector stationary = stationary_distribution(model);

  QbdBlocks blocks;
  blocks.down = Matrix::Zero(k, k);
  blocks.hold = Matrix::Zero(k, k);
  blocks.up = Matrix::Zero(k, k);
  blocks.boundary_hold = Matrix::Zero(k, k);
  blocks.boundary_up = Matrix::Zero(k, k);

  for (int i = 0; i < k; ++i) {
    if (policy.reconfigures(i + 1)) {
      // Reconfiguration burns the cycle: no departure, next state drawn
      // from the stationary law of the virtual channels.
      blocks.hold.row(i) = (1.0 - gamma) * stationary;
      blocks.up.row(i) = gamma * stationary;
      blocks.boundary_hold.row(i) = (1.0 - gamma) * stationary;
      blocks.boundary_up.row(i) = gamma * stationary;
    } else {
      const auto success = decode.success.row(i);
      const auto failure = decode.failure.row(i);
      blocks.down.row(i) = (1.0 - gamma) * rho_r * success;
      blocks.hold.row(i) =
          (1.0 - gamma) * (failure + (1.0 - rho_r) * success) + gamma * rho_r * success;
      blocks.up.row(i) = gamma * (failure + (1.0 - rho_r) * success);
      blocks.boundary_hold.row(i) = (1.0 - gamma) * block_step.row(i);
      blocks.boundary_up.row(i) = gamma * block_step.row(i);
    }
  }
  return blocks;
}

Matrix neuts_taboo_matrix(const QbdBlocks& blocks, double tol, int max_iter,
                          int* iterations) {
  const Eigen::Index k = blocks.hold.rows();
  if (blocks.up.isZero(0.0)) {
    // No upward transitions: the fixed point is the hold block itself.
    if (iterations) *iterations = 1;
    return blocks.hold;
  }

  const Matrix identity = Matrix::Identity(k, k);
  Matrix taboo = blocks.hold;
  double delta = 1.0;
  for (int m = 1; m <= max_iter; ++m) {
    Matrix resolvent = (identity - taboo).partialPivLu().solve(blocks.down);
    Matrix next = blocks.hold + blocks.up * resolvent;
    if (!next.allFinite()) {
      throw std::runtime_error("neuts_taboo_matrix: (I - U) became singular");
    }
    delta = (next - taboo).cwiseAbs().maxCoeff();
    taboo = std::move(next);
    if (delta < tol) {
      if (iterations) *iterations = m;
      return taboo;
    }
  }
  throw ConvergenceError("neuts_taboo_matrix: no convergence within iteration budget",
                         taboo, delta);
}

Matrix rate_matrix(const QbdBlocks& blocks, const Matrix& taboo) {
  const Eigen::Index k = blocks.hold.rows();
  const Matrix identity = Matrix::Identity(k, k);
  // R = up (I - U)^{-1}, solved as a transposed system.
  Matrix rate = (identity - taboo)
                    .transpose()
                    .partialPivLu()
                    .solve(blocks.up.transpose())
                    .transpose();
  if (!rate.allFinite()) {
    throw std::runtime_error("rate_matrix: (I - U) is singular");
  }
  return rate.cwiseMax(0.0);
}

BoundaryDistribution boundary_distribution(const QbdBlocks& blocks, const Matrix& rate) {
  const Eigen::Index k = blocks.hold.rows();
  const double radius = spectral_radius(rate);
  if (!(radius < 1.0 - kCriticalMargin)) {
    throw UnstableError("boundary_distribution: unstable (spectral radius of R is " +
                            std::to_string(radius) + ")",
                        std::numeric_limits<double>::quiet_NaN(),
                        std::numeric_limits<double>::quiet_NaN());
  }

  Matrix reduced(2 * k, 2 * k);
  reduced.topLeftCorner(k, k) = blocks.boundary_hold;
  reduced.topRightCorner(k, k) = blocks.boundary_up;
  reduced.bottomLeftCorner(k, k) = blocks.down;
  reduced.bottomRightCorner(k, k) = blocks.hold + rate * blocks.down;

  RowVector x;
  try {
    x = stationary_left_vector(reduced);
  } catch (const std::runtime_error& err) {
    throw UnstableError(std::string("boundary_distribution: ") + err.what() +
                            " (chain at criticality)",
                        std::numeric_limits<double>::quiet_NaN(),
                        std::numeric_limits<double>::quiet_NaN());
  }
  RowVector level0 = x.head(k);
  RowVector level1 = x.tail(k);

  const Matrix identity = Matrix::Identity(k, k);
  const Vector geometric_mass =
      (identity - rate).partialPivLu().solve(Vector::Ones(k));
  const double norm = level0.sum() + level1 * geometric_mass;
  level0 /= norm;
  level1 /= norm;
  return BoundaryDistribution{std::move(level0), std::move(level1)};
}

QbdSolution solve_qbd(const QbdBlocks& blocks, double tol, int max_iter) {
  QbdSolution sol;
  sol.taboo = neuts_taboo_matrix(blocks, tol, max_iter, &sol.iterations);
  sol.rate = rate_matrix(blocks, sol.taboo);
  sol.stable = spectral_radius(sol.rate) < 1.0 - kCriticalMargin;
  if (sol.stable) {
    BoundaryDistribution boundary = boundary_distribution(blocks, sol.rate);
    sol.level0 = std::move(boundary.level0);
    sol.level1 = std::move(boundary.level1);
  }
  return sol;
}

double service_rate(const FadingChannelModel& model, const DecodeMatrices& decode,
                    const SwitchingPolicy& policy) {
  const int k = model.state_count();
  check_policy(policy, k);
  const Matrix block_step = decode.success + decode.failure;

  Matrix onset_step = block_step;
  if (!policy.is_static()) {
    const RowVector stationary = stationary_distribution(model);
    for (int i = 0; i < k; ++i) {
      if (policy.reconfigures(i + 1)) onset_step.row(i) = stationary;
    }
  }
  const RowVector onset_law = stationary_left_vector(onset_step);

  double rate = 0.0;
  for (int i = 0; i < k; ++i) {
    if (!policy.reconfigures(i + 1)) rate += onset_law(i) * decode.success.row(i).sum();
  }
  return rate;
}

bool stability_check(const SegmentationParams& seg, double service) {
  if (seg.gamma == 0.0) return true;
  return seg.gamma / seg.rho_r < service;
}

nlohmann::json PerformanceReport::to_json() const {
  nlohmann::json j{
      {"policy_ell", policy_ell},
      {"K", info_bits},
      {"service_rate", service_rate},
      {"throughput_bpcu", throughput_bpcu},
      {"arrival_rate", arrival_rate},
      {"mean_queue", mean_queue},
      {"mean_wait", mean_wait},
      {"decay_rate", decay_rate},
      {"stable", stable},
  };
  for (const auto& [threshold, prob] : ccdf) {
    char key[48];
    std::snprintf(key, sizeof key, "ccdf_%g", threshold);
    j[key] = prob;
  }
  return j;
}

std::vector<std::string> PerformanceReport::csv_header(std::span<const double> thresholds) {
  std::vector<std::string> header{"policy_ell",   "K",
                                  "service_rate", "throughput_bpcu",
                                  "arrival_rate", "mean_queue",
                                  "mean_wait",    "decay_rate"};
  std::vector<double> sorted(thresholds.begin(), thresholds.end());
  std::sort(sorted.begin(), sorted.end());
  for (double t : sorted) {
    char key[48];
    std::snprintf(key, sizeof key, "ccdf_%g", t);
    header.emplace_back(key);
  }
  header.emplace_back("stable");
  return header;
}

std::vector<double> PerformanceReport::csv_row() const {
  std::vector<double> row{static_cast<double>(policy_ell),
                          static_cast<double>(info_bits),
                          service_rate,
                          throughput_bpcu,
                          arrival_rate,
                          mean_queue,
                          mean_wait,
                          decay_rate};
  for (const auto& [threshold, prob] : ccdf) row.push_back(prob);
  row.push_back(stable ? 1.0 : 0.0);
  return row;
}

PerformanceReport performance_report(const QbdBlocks& blocks, const QbdSolution& solution,
                                     const SegmentationParams& seg,
                                     const SwitchingPolicy& policy, int info_bits,
                                     int block_length, std::span<const double> thresholds) {
  const Eigen::Index k = blocks.hold.rows();
  const double gamma = seg.gamma;
  const double arrival = gamma > 0.0 ? gamma / seg.rho_r : 0.0;

  // Service rate straight from the blocks: the down block is
  // (1 - gamma) rho_r success on transmitting rows and zero elsewhere,
  // and boundary_hold + boundary_up is the channel-at-onset step matrix.
  const RowVector onset_law =
      stationary_left_vector(blocks.boundary_hold + blocks.boundary_up);
  const double service =
      (onset_law * blocks.down.rowwise().sum()).value() / ((1.0 - gamma) * seg.rho_r);

  if (!solution.stable) {
    throw UnstableError("performance_report: arrival rate " + std::to_string(arrival) +
                            " is not below service rate " + std::to_string(service),
                        arrival, service);
  }

  const Matrix identity = Matrix::Identity(k, k);
  auto lu = (identity - solution.rate).partialPivLu();
  const Vector ones = Vector::Ones(k);
  const Vector geo1 = lu.solve(ones);          // (I - R)^{-1} 1
  const Vector geo2 = lu.solve(geo1);          // (I - R)^{-2} 1
  const double mean_queue = solution.level1 * geo2;
  const double mean_wait = gamma > 0.0 ? mean_queue / gamma : 0.0;
  const double radius = spectral_radius(solution.rate);

  PerformanceReport report;
  report.policy_ell = policy.reconfigure_below;
  report.info_bits = info_bits;
  report.service_rate = service;
  report.throughput_bpcu = service * static_cast<double>(info_bits) / block_length;
  report.arrival_rate = arrival;
  report.mean_queue = mean_queue;
  report.mean_wait = mean_wait;
  report.decay_rate = std::log(radius);
  report.stable = true;

  std::vector<double> sorted(thresholds.begin(), thresholds.end());
  std::sort(sorted.begin(), sorted.end());
  report.ccdf.reserve(sorted.size());
  // Walk the levels once, recording 1 - sum_{q <= floor(t)} pi_q . 1.
  double cumulative = solution.level0.sum();
  RowVector level_mass = solution.level1;
  long level = 0;
  for (double t : sorted) {
    const long cutoff = t < 0.0 ? -1 : static_cast<long>(std::floor(t));
    while (level < cutoff) {
      cumulative += level_mass.sum();
      level_mass = level_mass * solution.rate;
      ++level;
    }
    const double prob = t < 0.0 ? 1.0 : std::clamp(1.0 - cumulative, 0.0, 1.0);
    report.ccdf.emplace_back(t, prob);
  }
  return report;
}

std::pair<int, double> optimal_throughput(const FadingChannelModel& model,
                                          const SwitchingPolicy& policy,
                                          int block_length) {
  if (block_length < 1) {
    throw std::invalid_argument("optimal_throughput: block_length must be >= 1");
  }
  const ErasureJointLaw law = erasure_joint_distribution(model, block_length);
  int best_bits = 1;
  double best_throughput = -1.0;
  for (int bits = 1; bits <= block_length; ++bits) {
    const DecodeMatrices decode = decode_matrices(law, bits);
    const double throughput =
        service_rate(model, decode, policy) * static_cast<double>(bits) / block_length;
    if (throughput > best_throughput) {
      best_throughput = throughput;
      best_bits = bits;
    }
  }
  return {best_bits, best_throughput};
}

PerformanceReport unstable_report(const SwitchingPolicy& policy, int info_bits,
                                  int block_length, double service, double arrival,
                                  std::span<const double> thresholds) {
  PerformanceReport report;
  report.policy_ell = policy.reconfigure_below;
  report.info_bits = info_bits;
  report.service_rate = service;
  report.throughput_bpcu = service * static_cast<double>(info_bits) / block_length;
  report.arrival_rate = arrival;
  report.mean_queue = std::numeric_limits<double>::infinity();
  report.mean_wait = std::numeric_limits<double>::infinity();
  report.decay_rate = std::numeric_limits<double>::quiet_NaN();
  report.stable = false;
  std::vector<double> sorted(thresholds.begin(), thresholds.end());
  std::sort(sorted.begin(), sorted.end());
  for (double t : sorted) {
    report.ccdf.emplace_back(t, std::numeric_limits<double>::quiet_NaN());
  }
  return report;
}

std::pair<int, PerformanceReport> optimize_info_bits(
    const FadingChannelModel& model, double gamma, double rho,
    const SwitchingPolicy& policy, int block_length,
    std::span<const double> thresholds) {
  const auto [best_bits, best_throughput] = optimal_throughput(model, policy, block_length);

  const ErasureJointLaw law = erasure_joint_distribution(model, block_length);
  const DecodeMatrices decode = decode_matrices(law, best_bits);
  const double rho_r = 1.0 - std::pow(1.0 - rho, best_bits);
  const SegmentationParams seg{gamma, rho, rho_r, best_bits};
  const QbdBlocks blocks = build_blocks(model, decode, seg, policy);
  const QbdSolution solution = solve_qbd(blocks);
  try {
    return {best_bits, performance_report(blocks, solution, seg, policy, best_bits,
                                          block_length, thresholds)};
  } catch (const UnstableError& err) {
    return {best_bits, unstable_report(policy, best_bits, block_length,
                                       err.service_rate, err.arrival_rate, thresholds)};
  }
}

}  // namespace vcq
