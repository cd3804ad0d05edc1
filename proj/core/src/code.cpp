#include "vcq/code.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace vcq {

ErasureJointLaw::ErasureJointLaw(int state_count, int block_length, std::vector<double> data)
    : k_(state_count), n_(block_length), data_(std::move(data)) {
  if (k_ < 1 || n_ < 1) throw std::invalid_argument("ErasureJointLaw: bad dimensions");
  if (data_.size() != static_cast<size_t>(k_) * k_ * (n_ + 1)) {
    throw std::invalid_argument("ErasureJointLaw: data size mismatch");
  }
}

Matrix ErasureJointLaw::end_state_marginal() const {
  Matrix m = Matrix::Zero(k_, k_);
  for (int i = 0; i < k_; ++i) {
    for (int j = 0; j < k_; ++j) {
      double sum = 0.0;
      for (int e = 0; e <= n_; ++e) sum += prob(i, j, e);
      m(i, j) = sum;
    }
  }
  return m;
}

std::vector<double> ErasureJointLaw::erasure_pmf(int from) const {
  std::vector<double> pmf(n_ + 1, 0.0);
  for (int j = 0; j < k_; ++j) {
    for (int e = 0; e <= n_; ++e) pmf[e] += prob(from, j, e);
  }
  return pmf;
}

nlohmann::json ErasureJointLaw::to_json() const {
  nlohmann::json tensor = nlohmann::json::array();
  for (int i = 0; i < k_; ++i) {
    nlohmann::json by_end = nlohmann::json::array();
    for (int j = 0; j < k_; ++j) {
      nlohmann::json pmf = nlohmann::json::array();
      for (int e = 0; e <= n_; ++e) pmf.push_back(prob(i, j, e));
      by_end.push_back(std::move(pmf));
    }
    tensor.push_back(std::move(by_end));
  }
  return nlohmann::json{{"k", k_}, {"N", n_}, {"phi", std::move(tensor)}};
}

ErasureJointLaw erasure_joint_distribution(const FadingChannelModel& model, int block_length) {
  if (block_length < 1) {
    throw std::invalid_argument("erasure_joint_distribution: block_length must be >= 1");
  }
  const int k = model.state_count();
  const int n = block_length;
  const Matrix& b = model.transition();
  const Vector& eps = model.epsilons();

  // One DP per start state: mass over (current state, erasures so far).
  // Each bit first splits the mass by the erasure outcome in the current
  // state, then applies the transition.
  std::vector<double> out(static_cast<size_t>(k) * k * (n + 1), 0.0);
  Matrix cur(k, n + 1), split(k, n + 1), next(k, n + 1);
  for (int start = 0; start < k; ++start) {
    cur.setZero();
    cur(start, 0) = 1.0;
    for (int bit = 0; bit < n; ++bit) {
      const int emax = bit;  // at most `bit` erasures before this bit
      split.setZero();
      for (int s = 0; s < k; ++s) {
        const double pe = eps(s);
        for (int e = emax; e >= 0; --e) {
          const double mass = cur(s, e);
          if (mass == 0.0) continue;
          split(s, e) += mass * (1.0 - pe);
          split(s, e + 1) += mass * pe;
        }
      }
      next.setZero();
      for (int s = 0; s < k; ++s) {
        for (int t = 0; t < k; ++t) {
          const double p = b(s, t);
          if (p == 0.0) continue;
          for (int e = 0; e <= emax + 1; ++e) next(t, e) += p * split(s, e);
        }
      }
      cur.swap(next);
    }
    for (int j = 0; j < k; ++j) {
      for (int e = 0; e <= n; ++e) {
        out[(static_cast<size_t>(start) * k + j) * (n + 1) + e] = cur(j, e);
      }
    }
  }
  return ErasureJointLaw(k, n, std::move(out));
}

double random_code_failure(int redundancy, int erasures) {
  if (redundancy < 0 || erasures < 0) {
    throw std::invalid_argument("random_code_failure: arguments must be nonnegative");
  }
  double product = 1.0;
  for (int i = 0; i < erasures; ++i) {
    const double factor = 1.0 - std::exp2(static_cast<double>(i - redundancy));
    if (factor <= 0.0) return 1.0;
    product *= factor;
  }
  return std::clamp(1.0 - product, 0.0, 1.0);
}

DecodeMatrices decode_matrices(const ErasureJointLaw& law, int info_bits) {
  const int n = law.block_length();
  const int k = law.state_count();
  if (info_bits < 1 || info_bits > n) {
    throw std::invalid_argument("decode_matrices: info_bits must lie in [1, block_length]");
  }
  std::vector<double> pf(n + 1);
  for (int e = 0; e <= n; ++e) pf[e] = random_code_failure(n - info_bits, e);

  Matrix success = Matrix::Zero(k, k);
  Matrix failure = Matrix::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      double ds = 0.0, df = 0.0;
      for (int e = 0; e <= n; ++e) {
        const double p = law.prob(i, j, e);
        df += pf[e] * p;
        ds += (1.0 - pf[e]) * p;
      }
      success(i, j) = ds;
      failure(i, j) = df;
    }
  }
  return DecodeMatrices{n, info_bits, std::move(success), std::move(failure)};
}

SegmentationParams segment_params(double gamma, double rho, int info_bits) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("segment_params: gamma must lie in (0, 1)");
  }
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("segment_params: rho must lie in (0, 1)");
  }
  if (info_bits < 1) {
    throw std::invalid_argument("segment_params: info_bits must be >= 1");
  }
  const double rho_r = 1.0 - std::pow(1.0 - rho, info_bits);
  return SegmentationParams{gamma, rho, rho_r, info_bits};
}

}  // namespace vcq
