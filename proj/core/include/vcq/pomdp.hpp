#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "vcq/code.hpp"

namespace vcq {

enum class Observation { Ack, Nack };

/// Decision process over the belief about the channel state. At each
/// codeword cycle the controller either reconfigures the antenna
/// (action 0: no transmission, the belief resets to the stationary law)
/// or transmits at code rate a / block_length for an action a in
/// [1, block_length], observing the resulting ACK/NACK.
class PomdpModel {
 public:
  /// rate_stride subsamples the transmit actions (1, 1 + stride, ...);
  /// the full-rate action block_length is always included.
  static PomdpModel build(const FadingChannelModel& channel, int block_length,
                          double discount, bool allow_reconfigure,
                          int rate_stride = 1);

  const FadingChannelModel& channel() const { return channel_; }
  int state_count() const { return channel_.state_count(); }
  int block_length() const { return block_length_; }
  double discount() const { return discount_; }
  bool allow_reconfigure() const { return allow_reconfigure_; }
  const RowVector& stationary() const { return stationary_; }
  const std::vector<int>& actions() const { return actions_; }

  /// Decode matrices for a transmit action (a >= 1).
  const Matrix& success_for(int action) const;
  const Matrix& failure_for(int action) const;

 private:
  PomdpModel(FadingChannelModel channel, int block_length, double discount,
             bool allow_reconfigure);

  int transmit_index(int action) const;

  FadingChannelModel channel_;
  int block_length_;
  double discount_;
  bool allow_reconfigure_;
  RowVector stationary_;
  std::vector<int> actions_;            // sorted; 0 first when present
  std::vector<int> transmit_actions_;   // sorted rates only
  std::vector<Matrix> success_;         // parallel to transmit_actions_
  std::vector<Matrix> failure_;
};

/// Pr(observation | belief, action). A reconfiguration is always
/// acknowledged negatively.
double observation_probability(const PomdpModel& pomdp, const RowVector& belief,
                               int action, Observation obs);

/// Bayes update of the belief given the action and observation; action 0
/// resets to the stationary law. Throws std::domain_error when the
/// observation has probability zero under the belief.
RowVector belief_update(const PomdpModel& pomdp, const RowVector& belief, int action,
                        Observation obs);

/// Expected information throughput of one cycle, normalized by the block
/// length: (a / N) Pr(ACK | belief, a). Zero for a reconfiguration.
double reward(const PomdpModel& pomdp, const RowVector& belief, int action);

/// Triangular lattice over the 2-simplex with the given number of edge
/// subdivisions, parametrized by the last two belief coordinates.
/// Provides barycentric interpolation over the right-triangle split.
struct SimplexGrid {
  int subdivisions;

  int size() const { return (subdivisions + 1) * (subdivisions + 2) / 2; }
  int index(int i, int j) const;  // i = psi2 steps, j = psi3 steps, i + j <= m

  struct Interp {
    int idx[3];
    double weight[3];
  };
  Interp locate(double psi2, double psi3) const;
};

struct GridSpec {
  /// k = 2: number of grid points on [0, 1]; k = 3: edge subdivisions of
  /// the simplex lattice. 0 picks the default (1000 for k = 2, 200 for
  /// k = 3). Must be at least 100.
  int resolution = 0;
};

struct ValueFunction {
  int state_count = 0;
  int resolution = 0;
  double discount = 0.0;
  std::vector<RowVector> points;  // belief at each grid point
  std::vector<double> values;
  std::vector<int> policy;  // optimal action at each grid point

  /// Interpolated value (linear for k = 2, barycentric for k = 3).
  double value_at(const RowVector& belief) const;
  /// Action of the nearest grid point.
  int action_at(const RowVector& belief) const;

  std::string to_csv() const;  // belief coordinates, value, action
};

/// Discounted value iteration on the discretized belief simplex
/// (k <= 3). Stops when the sup-norm change falls below tol relative to
/// max(1, sup |V|); throws ConvergenceError past max_iter. Ties in the
/// action argmax break toward the lower action index.
ValueFunction value_iteration(const PomdpModel& pomdp, GridSpec grid = {},
                              double tol = 1e-9, int max_iter = 10000);

struct PolicyRegion {
  double lower;
  double upper;
  int action;
};

struct ThresholdScan {
  std::vector<PolicyRegion> regions;  // contiguous cover of [0, 1]
  bool monotone;                      // code rate nondecreasing in belief
};

/// Partition of the k = 2 belief axis (belief that the channel is in the
/// good state) into maximal constant-action regions. Boundaries sit at
/// midpoints between adjacent grid points.
ThresholdScan extract_thresholds(const ValueFunction& vf);

nlohmann::json thresholds_to_json(const ThresholdScan& scan);

/// Arithmetic mean of the value function over the uniform grid.
double mean_value(const ValueFunction& vf);

}  // namespace vcq
