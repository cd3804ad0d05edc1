#include "vcq/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace vcq {

namespace {

void validate_model(const Matrix& b, const Vector& eps) {
  const Eigen::Index k = b.rows();
  if (k < 1 || b.cols() != k) {
    throw std::invalid_argument("channel: transition matrix must be square with k >= 1");
  }
  if (eps.size() != k) {
    throw std::invalid_argument("channel: epsilons length must equal the state count");
  }
  if ((b.array() < 0.0).any()) {
    throw std::invalid_argument("channel: transition probabilities must be nonnegative");
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    if (std::abs(b.row(i).sum() - 1.0) > 1e-12) {
      throw std::invalid_argument("channel: transition matrix rows must sum to 1");
    }
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    if (eps(i) < 0.0 || eps(i) > 1.0) {
      throw std::invalid_argument("channel: erasure probabilities must lie in [0, 1]");
    }
    if (i + 1 < k && eps(i) < eps(i + 1)) {
      throw std::invalid_argument(
          "channel: states must be ordered worst first (epsilon nonincreasing)");
    }
  }
  if (!is_primitive(b)) {
    throw std::invalid_argument("channel: transition matrix must be irreducible and aperiodic");
  }
}

}  // namespace

FadingChannelModel::FadingChannelModel(Matrix transition, Vector epsilons)
    : transition_(std::move(transition)), epsilons_(std::move(epsilons)) {
  validate_model(transition_, epsilons_);
}

FadingChannelModel FadingChannelModel::with_epsilons(Vector epsilons) const {
  return FadingChannelModel(transition_, std::move(epsilons));
}

nlohmann::json FadingChannelModel::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < transition_.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < transition_.cols(); ++j) row.push_back(transition_(i, j));
    rows.push_back(std::move(row));
  }
  nlohmann::json eps = nlohmann::json::array();
  for (Eigen::Index i = 0; i < epsilons_.size(); ++i) eps.push_back(epsilons_(i));
  return nlohmann::json{{"k", state_count()}, {"B", std::move(rows)}, {"epsilons", std::move(eps)}};
}

FadingChannelModel FadingChannelModel::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("k") || !j.contains("B") || !j.contains("epsilons")) {
    throw std::invalid_argument("channel: JSON document requires fields k, B, epsilons");
  }
  const int k = j.at("k").get<int>();
  const auto& rows = j.at("B");
  const auto& eps_json = j.at("epsilons");
  if (k < 1 || !rows.is_array() || static_cast<int>(rows.size()) != k ||
      !eps_json.is_array() || static_cast<int>(eps_json.size()) != k) {
    throw std::invalid_argument("channel: JSON dimensions do not match k");
  }
  Matrix b(k, k);
  for (int i = 0; i < k; ++i) {
    if (!rows[i].is_array() || static_cast<int>(rows[i].size()) != k) {
      throw std::invalid_argument("channel: JSON row length does not match k");
    }
    for (int col = 0; col < k; ++col) b(i, col) = rows[i][col].get<double>();
  }
  Vector eps(k);
  for (int i = 0; i < k; ++i) eps(i) = eps_json[i].get<double>();
  return FadingChannelModel(std::move(b), std::move(eps));
}

FadingChannelModel make_gilbert_elliott(double p_bad, double codeword_memory,
                                        int block_length) {
  return make_gilbert_elliott(p_bad, codeword_memory, block_length, 0.0, 0.0);
}

FadingChannelModel make_gilbert_elliott(double p_bad, double codeword_memory,
                                        int block_length, double eps_bad,
                                        double eps_good) {
  if (!(p_bad > 0.0 && p_bad < 1.0)) {
    throw std::invalid_argument("make_gilbert_elliott: p_bad must lie in (0, 1)");
  }
  if (!(codeword_memory >= 0.0 && codeword_memory < 1.0)) {
    throw std::invalid_argument("make_gilbert_elliott: codeword_memory must lie in [0, 1)");
  }
  if (block_length < 1) {
    throw std::invalid_argument("make_gilbert_elliott: block_length must be >= 1");
  }

  // Per-bit switching mass: b12 + b21 = 1 - memory^(1/N), split so the
  // stationary law of the bad state equals p_bad.
  const double total = 1.0 - std::pow(codeword_memory, 1.0 / block_length);
  const double b21 = p_bad * total;
  const double b12 = (1.0 - p_bad) * total;
  if (!(b12 > 0.0 && b12 < 1.0 && b21 > 0.0 && b21 < 1.0)) {
    throw std::invalid_argument("make_gilbert_elliott: parameters force b12 or b21 outside (0, 1)");
  }

  Matrix b(2, 2);
  b << 1.0 - b12, b12, b21, 1.0 - b21;
  Vector eps(2);
  eps << eps_bad, eps_good;
  return FadingChannelModel(std::move(b), std::move(eps));
}

FadingChannelModel make_rayleigh_fsmc(int state_count, double avg_snr_db,
                                      double doppler_hz, double bit_rate_bps,
                                      Vector epsilons) {
  (void)avg_snr_db;  // cancels out of the equiprobable-partition transitions
  if (state_count < 2) {
    throw std::invalid_argument("make_rayleigh_fsmc: state_count must be >= 2");
  }
  if (!(doppler_hz > 0.0)) {
    throw std::invalid_argument("make_rayleigh_fsmc: doppler_hz must be positive");
  }
  if (!(bit_rate_bps > 0.0)) {
    throw std::invalid_argument("make_rayleigh_fsmc: bit_rate_bps must be positive");
  }
  if (epsilons.size() != state_count) {
    throw std::invalid_argument("make_rayleigh_fsmc: epsilons length must equal state_count");
  }

  const int k = state_count;
  // Equiprobable regions of the exponential SNR law. The boundary between
  // regions j and j+1 sits at -ln(1 - j/k) in units of the mean SNR; the
  // level-crossing rate there, times the bit duration and the number of
  // states, gives the per-bit probability of stepping across.
  std::vector<double> crossing(k, 0.0);  // crossing[j]: boundary above state j+1 (1-based j)
  for (int j = 1; j < k; ++j) {
    const double x = -std::log(1.0 - static_cast<double>(j) / k);
    crossing[j] = std::sqrt(2.0 * std::numbers::pi * x) * doppler_hz * std::exp(-x);
  }

  Matrix b = Matrix::Zero(k, k);
  const double scale = static_cast<double>(k) / bit_rate_bps;
  for (int i = 0; i < k; ++i) {
    const double up = (i + 1 < k) ? crossing[i + 1] * scale : 0.0;
    const double down = (i > 0) ? crossing[i] * scale : 0.0;
    const double stay = 1.0 - up - down;
    if (up > 1.0 || down > 1.0 || stay < 0.0) {
      throw std::invalid_argument(
          "make_rayleigh_fsmc: Doppler too high for per-bit transitions (probability outside [0, 1])");
    }
    if (i + 1 < k) b(i, i + 1) = up;
    if (i > 0) b(i, i - 1) = down;
    b(i, i) = stay;
  }
  return FadingChannelModel(std::move(b), std::move(epsilons));
}

Vector rayleigh8_epsilons() {
  Vector eps(8);
  eps << 0.4244, 0.3591, 0.3134, 0.2732, 0.2348, 0.1954, 0.1512, 0.0879;
  return eps;
}

FadingChannelModel make_rayleigh8_preset(double doppler_hz) {
  return make_rayleigh_fsmc(8, -5.0, doppler_hz, 1e5, rayleigh8_epsilons());
}

RowVector stationary_distribution(const FadingChannelModel& model) {
  return stationary_left_vector(model.transition());
}

Matrix n_step_matrix(const FadingChannelModel& model, long n) {
  if (n < 1) throw std::invalid_argument("n_step_matrix: n must be >= 1");
  return matrix_power(model.transition(), n);
}

double memory_coefficient(const FadingChannelModel& model, long n) {
  if (model.state_count() != 2) {
    throw std::invalid_argument("memory_coefficient: defined for two-state channels only");
  }
  const Matrix bn = n_step_matrix(model, n);
  return 1.0 - bn(0, 1) - bn(1, 0);
}

}  // namespace vcq
