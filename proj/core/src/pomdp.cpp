#include "vcq/pomdp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vcq/errors.hpp"

namespace vcq {

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

PomdpModel::PomdpModel(FadingChannelModel channel, int block_length, double discount,
                       bool allow_reconfigure)
    : channel_(std::move(channel)),
      block_length_(block_length),
      discount_(discount),
      allow_reconfigure_(allow_reconfigure),
      stationary_(stationary_distribution(channel_)) {}

PomdpModel PomdpModel::build(const FadingChannelModel& channel, int block_length,
                             double discount, bool allow_reconfigure, int rate_stride) {
  if (block_length < 1) throw std::invalid_argument("PomdpModel: block_length must be >= 1");
  if (!(discount > 0.0 && discount < 1.0)) {
    throw std::invalid_argument("PomdpModel: discount must lie in (0, 1)");
  }
  if (rate_stride < 1) throw std::invalid_argument("PomdpModel: rate_stride must be >= 1");

  PomdpModel model(channel, block_length, discount, allow_reconfigure);
  const ErasureJointLaw law = erasure_joint_distribution(channel, block_length);
  if (allow_reconfigure) model.actions_.push_back(0);
  for (int a = 1; a <= block_length; a += rate_stride) {
    model.transmit_actions_.push_back(a);
  }
  if (model.transmit_actions_.back() != block_length) {
    model.transmit_actions_.push_back(block_length);
  }
  for (int a : model.transmit_actions_) {
    model.actions_.push_back(a);
    DecodeMatrices decode = decode_matrices(law, a);
    model.success_.push_back(std::move(decode.success));
    model.failure_.push_back(std::move(decode.failure));
  }
  return model;
}

int PomdpModel::transmit_index(int action) const {
  auto it = std::lower_bound(transmit_actions_.begin(), transmit_actions_.end(), action);
  if (it == transmit_actions_.end() || *it != action) {
    throw std::invalid_argument("PomdpModel: unknown transmit action");
  }
  return static_cast<int>(it - transmit_actions_.begin());
}

const Matrix& PomdpModel::success_for(int action) const {
  return success_[transmit_index(action)];
}

const Matrix& PomdpModel::failure_for(int action) const {
  return failure_[transmit_index(action)];
}

double observation_probability(const PomdpModel& pomdp, const RowVector& belief,
                               int action, Observation obs) {
  if (belief.size() != pomdp.state_count()) {
    throw std::invalid_argument("observation_probability: belief dimension mismatch");
  }
  if (action == 0) return obs == Observation::Nack ? 1.0 : 0.0;
  const Matrix& m =
      obs == Observation::Ack ? pomdp.success_for(action) : pomdp.failure_for(action);
  return (belief * m).sum();
}

RowVector belief_update(const PomdpModel& pomdp, const RowVector& belief, int action,
                        Observation obs) {
  if (belief.size() != pomdp.state_count()) {
    throw std::invalid_argument("belief_update: belief dimension mismatch");
  }
  if (action == 0) return pomdp.stationary();
  const Matrix& m =
      obs == Observation::Ack ? pomdp.success_for(action) : pomdp.failure_for(action);
  RowVector updated = belief * m;
  const double mass = updated.sum();
  if (mass <= 0.0) {
    throw std::domain_error("belief_update: observation has probability zero under belief");
  }
  return updated / mass;
}

double reward(const PomdpModel& pomdp, const RowVector& belief, int action) {
  if (action == 0) return 0.0;
  const double ack = observation_probability(pomdp, belief, action, Observation::Ack);
  return static_cast<double>(action) / pomdp.block_length() * ack;
}

int SimplexGrid::index(int i, int j) const {
  // Row-major over i with shrinking rows: row i holds m - i + 1 entries.
  return i * (subdivisions + 1) - i * (i - 1) / 2 + j;
}

SimplexGrid::Interp SimplexGrid::locate(double psi2, double psi3) const {
  const int m = subdivisions;
  double u = std::clamp(psi2, 0.0, 1.0) * m;
  double v = std::clamp(psi3, 0.0, 1.0) * m;
  if (u + v > m) {  // round-off past the diagonal
    const double scale = m / (u + v);
    u *= scale;
    v *= scale;
  }
  int i0 = std::min(static_cast<int>(u), m);
  int j0 = std::min(static_cast<int>(v), m);
  const double f = u - i0;
  const double g = v - j0;

  Interp out{};
  if (i0 + j0 >= m) {  // exactly on the far vertex of a diagonal cell
    out.idx[0] = out.idx[1] = out.idx[2] = index(i0, j0);
    out.weight[0] = 1.0;
    return out;
  }
  if (f + g <= 1.0) {
    out.idx[0] = index(i0, j0);
    out.idx[1] = index(i0 + 1, j0);
    out.idx[2] = index(i0, j0 + 1);
    out.weight[0] = 1.0 - f - g;
    out.weight[1] = f;
    out.weight[2] = g;
  } else {
    out.idx[0] = index(i0 + 1, j0 + 1);
    out.idx[1] = index(i0, j0 + 1);
    out.idx[2] = index(i0 + 1, j0);
    out.weight[0] = f + g - 1.0;
    out.weight[1] = 1.0 - f;
    out.weight[2] = 1.0 - g;
  }
  return out;
}

namespace {

double interp_line(const std::vector<double>& values, double x) {
  const int n = static_cast<int>(values.size());
  const double t = std::clamp(x, 0.0, 1.0) * (n - 1);
  const int i = std::min(static_cast<int>(t), n - 2);
  const double frac = t - i;
  return values[i] + frac * (values[i + 1] - values[i]);
}

struct TransmitTables {
  // Per transmit action and grid point: observation mass and the good-state
  // coordinate of the updated belief.
  std::vector<double> ack_mass, ack_coord, nack_mass, nack_coord;
  double rate;
  int action;
};

ValueFunction value_iteration_line(const PomdpModel& pomdp, int points, double tol,
                                   int max_iter) {
  const int grid = points;
  std::vector<TransmitTables> tables;
  tables.reserve(pomdp.actions().size());
  for (int action : pomdp.actions()) {
    if (action == 0) continue;
    const Matrix& ds = pomdp.success_for(action);
    const Matrix& df = pomdp.failure_for(action);
    TransmitTables t;
    t.action = action;
    t.rate = static_cast<double>(action) / pomdp.block_length();
    t.ack_mass.resize(grid);
    t.ack_coord.resize(grid);
    t.nack_mass.resize(grid);
    t.nack_coord.resize(grid);
    for (int g = 0; g < grid; ++g) {
      const double x = static_cast<double>(g) / (grid - 1);
      const double bad = 1.0 - x;
      const double a1 = bad * ds(0, 0) + x * ds(1, 0);
      const double a2 = bad * ds(0, 1) + x * ds(1, 1);
      const double n1 = bad * df(0, 0) + x * df(1, 0);
      const double n2 = bad * df(0, 1) + x * df(1, 1);
      t.ack_mass[g] = a1 + a2;
      t.ack_coord[g] = t.ack_mass[g] > 0.0 ? a2 / t.ack_mass[g] : 0.0;
      t.nack_mass[g] = n1 + n2;
      t.nack_coord[g] = t.nack_mass[g] > 0.0 ? n2 / t.nack_mass[g] : 0.0;
    }
    tables.push_back(std::move(t));
  }

  const double beta = pomdp.discount();
  const double stationary_coord = pomdp.stationary()(1);
  std::vector<double> values(grid, 0.0), next(grid, 0.0);
  std::vector<int> policy(grid, tables.front().action);

  double delta = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < max_iter; ++sweep) {
    const double reconf_value =
        pomdp.allow_reconfigure() ? beta * interp_line(values, stationary_coord)
                                  : -std::numeric_limits<double>::infinity();
    delta = 0.0;
    for (int g = 0; g < grid; ++g) {
      double best = reconf_value;
      int best_action = 0;
      for (const TransmitTables& t : tables) {
        const double am = t.ack_mass[g];
        const double nm = t.nack_mass[g];
        double v = t.rate * am;
        if (am > 0.0) v += beta * am * interp_line(values, t.ack_coord[g]);
        if (nm > 0.0) v += beta * nm * interp_line(values, t.nack_coord[g]);
        if (v > best) {
          best = v;
          best_action = t.action;
        }
      }
      next[g] = best;
      policy[g] = best_action;
      delta = std::max(delta, std::abs(best - values[g]));
    }
    values.swap(next);
    const double scale = std::max(1.0, std::abs(*std::max_element(
                                            values.begin(), values.end(),
                                            [](double a, double b) {
                                              return std::abs(a) < std::abs(b);
                                            })));
    if (delta <= tol * scale) {
      ValueFunction vf;
      vf.state_count = 2;
      vf.resolution = grid;
      vf.discount = beta;
      vf.points.reserve(grid);
      for (int g = 0; g < grid; ++g) {
        RowVector p(2);
        const double x = static_cast<double>(g) / (grid - 1);
        p << 1.0 - x, x;
        vf.points.push_back(std::move(p));
      }
      vf.values = std::move(values);
      vf.policy = std::move(policy);
      return vf;
    }
  }
  Matrix last(1, grid);
  for (int g = 0; g < grid; ++g) last(0, g) = values[g];
  throw ConvergenceError("value_iteration: no convergence within iteration budget", last,
                         delta);
}

ValueFunction value_iteration_simplex(const PomdpModel& pomdp, int subdivisions,
                                      double tol, int max_iter) {
  const SimplexGrid grid{subdivisions};
  const int n = grid.size();
  const double beta = pomdp.discount();

  std::vector<RowVector> points;
  points.reserve(n);
  for (int i = 0; i <= subdivisions; ++i) {
    for (int j = 0; i + j <= subdivisions; ++j) {
      RowVector p(3);
      const double u = static_cast<double>(i) / subdivisions;
      const double v = static_cast<double>(j) / subdivisions;
      p << 1.0 - u - v, u, v;
      points.push_back(std::move(p));
    }
  }

  struct ActionMatrices {
    int action;
    double rate;
    const Matrix* success;
    const Matrix* failure;
  };
  std::vector<ActionMatrices> acts;
  for (int action : pomdp.actions()) {
    if (action == 0) continue;
    acts.push_back({action, static_cast<double>(action) / pomdp.block_length(),
                    &pomdp.success_for(action), &pomdp.failure_for(action)});
  }

  auto interp = [&grid](const std::vector<double>& values, double u, double v) {
    const SimplexGrid::Interp w = grid.locate(u, v);
    return w.weight[0] * values[w.idx[0]] + w.weight[1] * values[w.idx[1]] +
           w.weight[2] * values[w.idx[2]];
  };

  const RowVector& stationary = pomdp.stationary();
  std::vector<double> values(n, 0.0), next(n, 0.0);
  std::vector<int> policy(n, acts.front().action);

  double delta = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < max_iter; ++sweep) {
    const double reconf_value =
        pomdp.allow_reconfigure() ? beta * interp(values, stationary(1), stationary(2))
                                  : -std::numeric_limits<double>::infinity();
    delta = 0.0;
    for (int p = 0; p < n; ++p) {
      const RowVector& belief = points[p];
      double best = reconf_value;
      int best_action = 0;
      for (const ActionMatrices& act : acts) {
        const RowVector ack = belief * (*act.success);
        const RowVector nack = belief * (*act.failure);
        const double am = ack.sum();
        const double nm = nack.sum();
        double v = act.rate * am;
        if (am > 0.0) v += beta * am * interp(values, ack(1) / am, ack(2) / am);
        if (nm > 0.0) v += beta * nm * interp(values, nack(1) / nm, nack(2) / nm);
        if (v > best) {
          best = v;
          best_action = act.action;
        }
      }
      next[p] = best;
      policy[p] = best_action;
      delta = std::max(delta, std::abs(best - values[p]));
    }
    values.swap(next);
    double maxabs = 0.0;
    for (double v : values) maxabs = std::max(maxabs, std::abs(v));
    if (delta <= tol * std::max(1.0, maxabs)) {
      ValueFunction vf;
      vf.state_count = 3;
      vf.resolution = subdivisions;
      vf.discount = beta;
      vf.points = std::move(points);
      vf.values = std::move(values);
      vf.policy = std::move(policy);
      return vf;
    }
  }
  Matrix last(1, n);
  for (int p = 0; p < n; ++p) last(0, p) = values[p];
  throw ConvergenceError("value_iteration: no convergence within iteration budget", last,
                         delta);
}

}  // namespace

ValueFunction value_iteration(const PomdpModel& pomdp, GridSpec grid, double tol,
                              int max_iter) {
  const int k = pomdp.state_count();
  if (k != 2 && k != 3) {
    throw std::invalid_argument("value_iteration: grid iteration supports k = 2 or k = 3");
  }
  int resolution = grid.resolution;
  if (resolution == 0) resolution = (k == 2) ? 1000 : 200;
  if (resolution < 100) {
    throw std::invalid_argument("value_iteration: resolution must be at least 100");
  }
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
  return k == 2 ? value_iteration_line(pomdp, resolution, tol, max_iter)
                : value_iteration_simplex(pomdp, resolution, tol, max_iter);
}

double ValueFunction::value_at(const RowVector& belief) const {
  if (belief.size() != state_count) {
    throw std::invalid_argument("ValueFunction: belief dimension mismatch");
  }
  if (state_count == 2) return interp_line(values, belief(1));
  const SimplexGrid grid{resolution};
  const SimplexGrid::Interp w = grid.locate(belief(1), belief(2));
  return w.weight[0] * values[w.idx[0]] + w.weight[1] * values[w.idx[1]] +
         w.weight[2] * values[w.idx[2]];
}

int ValueFunction::action_at(const RowVector& belief) const {
  if (belief.size() != state_count) {
    throw std::invalid_argument("ValueFunction: belief dimension mismatch");
  }
  if (state_count == 2) {
    const double t = std::clamp(belief(1), 0.0, 1.0) * (resolution - 1);
    return policy[static_cast<int>(std::lround(t))];
  }
  const SimplexGrid grid{resolution};
  const SimplexGrid::Interp w = grid.locate(belief(1), belief(2));
  const int best =
      std::max_element(w.weight, w.weight + 3) - w.weight;
  return policy[w.idx[best]];
}

std::string ValueFunction::to_csv() const {
  std::string out;
  for (int s = 1; s <= state_count; ++s) {
    out += "psi" + std::to_string(s) + ",";
  }
  out += "value,action\n";
  for (size_t p = 0; p < points.size(); ++p) {
    for (int s = 0; s < state_count; ++s) {
      append_double(out, points[p](s));
      out += ',';
    }
    append_double(out, values[p]);
    out += ',';
    out += std::to_string(policy[p]);
    out += '\n';
  }
  return out;
}

ThresholdScan extract_thresholds(const ValueFunction& vf) {
  if (vf.state_count != 2) {
    throw std::invalid_argument("extract_thresholds: defined for k = 2 value functions");
  }
  const int grid = vf.resolution;
  ThresholdScan scan;
  scan.monotone = true;
  double lower = 0.0;
  int current = vf.policy.front();
  for (int g = 1; g < grid; ++g) {
    if (vf.policy[g] == current) continue;
    const double boundary =
        (static_cast<double>(g - 1) + 0.5) / (grid - 1);  // midpoint between points
    scan.regions.push_back({lower, boundary, current});
    if (vf.policy[g] < current) scan.monotone = false;
    lower = boundary;
    current = vf.policy[g];
  }
  scan.regions.push_back({lower, 1.0, current});
  return scan;
}

nlohmann::json thresholds_to_json(const ThresholdScan& scan) {
  nlohmann::json out = nlohmann::json::array();
  for (const PolicyRegion& r : scan.regions) {
    out.push_back({{"lower", r.lower}, {"upper", r.upper}, {"action", r.action}});
  }
  return nlohmann::json{{"regions", std::move(out)}, {"monotone", scan.monotone}};
}

double mean_value(const ValueFunction& vf) {
  double sum = 0.0;
  for (double v : vf.values) sum += v;
  return sum / static_cast<double>(vf.values.size());
}

}  // namespace vcq
