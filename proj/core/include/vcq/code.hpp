#pragma once

#include <nlohmann/json.hpp>
#include <vector>

#include "vcq/channel.hpp"

namespace vcq {

/// Joint law of the erasure count and the channel end state over one
/// block: prob(i, j, e) = Pr(E = e, C_{N+1} = j | C_1 = i). Marginalizing
/// over e recovers the N-step transition matrix.
class ErasureJointLaw {
 public:
  ErasureJointLaw(int state_count, int block_length, std::vector<double> data);

  int state_count() const { return k_; }
  int block_length() const { return n_; }

  double prob(int from, int to, int erasures) const {
    return data_[(static_cast<size_t>(from) * k_ + to) * (n_ + 1) + erasures];
  }

  /// Sum over erasure counts; equals the N-step transition matrix.
  Matrix end_state_marginal() const;

  /// Erasure-count pmf conditioned on the start state (end state summed out).
  std::vector<double> erasure_pmf(int from) const;

  nlohmann::json to_json() const;

 private:
  int k_;
  int n_;
  std::vector<double> data_;  // indexed (from, to, erasures)
};

/// N-bit dynamic program over the channel: per bit, each state's mass
/// splits into erased/unerased parts before the transition is applied.
ErasureJointLaw erasure_joint_distribution(const FadingChannelModel& model,
                                           int block_length);

/// Probability that a random binary parity-check code with the given
/// redundancy fails to recover a codeword with the given erasure count:
/// 1 - prod_{i=0..e-1} (1 - 2^(i - r)). Zero for e = 0, one for e > r.
double random_code_failure(int redundancy, int erasures);

/// Per-codeword decode success/failure matrices for a code carrying
/// info_bits information bits: failure(i, j) weights the joint law by the
/// random-code failure probability; success is its complement against the
/// end-state marginal.
struct DecodeMatrices {
  int block_length;
  int info_bits;
  Matrix success;  // entries Pr(decode success, end state j | start state i)
  Matrix failure;
};

DecodeMatrices decode_matrices(const ErasureJointLaw& law, int info_bits);

/// Arrival-side parameters. A packet arrives with probability gamma per
/// codeword cycle; packet length in bits is geometric with parameter rho,
/// so the number of info_bits-sized segments is geometric with parameter
/// rho_r = 1 - (1 - rho)^info_bits.
struct SegmentationParams {
  double gamma;
  double rho;
  double rho_r;
  int info_bits;
};

SegmentationParams segment_params(double gamma, double rho, int info_bits);

}  // namespace vcq
