#pragma once

#include <nlohmann/json.hpp>

#include "vcq/linalg.hpp"

namespace vcq {

/// Per-bit finite-state erasure channel. The chain moves between k states
/// according to a row-stochastic transition matrix; a bit sent while the
/// chain sits in state i is erased with probability epsilon(i).
///
/// States are ordered from worst to best: i < j implies
/// epsilon(i) >= epsilon(j). The transition matrix must be irreducible and
/// aperiodic; this is enforced at construction so solvers can assume it.
/// Instances are immutable and safe to share across threads.
class FadingChannelModel {
 public:
  FadingChannelModel(Matrix transition, Vector epsilons);

  int state_count() const { return static_cast<int>(transition_.rows()); }
  const Matrix& transition() const { return transition_; }
  const Vector& epsilons() const { return epsilons_; }
  double epsilon(int state) const { return epsilons_(state); }

  /// Copy of this model with replaced erasure probabilities (revalidated).
  FadingChannelModel with_epsilons(Vector epsilons) const;

  nlohmann::json to_json() const;
  static FadingChannelModel from_json(const nlohmann::json& j);

 private:
  Matrix transition_;
  Vector epsilons_;
};

/// Two-state channel parametrized by the stationary probability of the bad
/// state and the codeword-level memory coefficient
/// (1 - b12 - b21)^block_length. Erasure probabilities default to zero;
/// set them with the five-argument overload or with_epsilons.
FadingChannelModel make_gilbert_elliott(double p_bad, double codeword_memory,
                                        int block_length);
FadingChannelModel make_gilbert_elliott(double p_bad, double codeword_memory,
                                        int block_length, double eps_bad,
                                        double eps_good);

/// k-state birth-death channel quantizing a Rayleigh fading envelope into
/// equiprobable SNR regions. Adjacent-state transition probabilities come
/// from level-crossing rates scaled by the bit duration; the stationary
/// distribution is uniform by construction. Erasure probabilities are
/// caller-supplied (the SNR-to-erasure mapping is model-specific), ordered
/// worst state first. avg_snr_db fixes the region boundaries in absolute
/// SNR but cancels out of the transition probabilities.
FadingChannelModel make_rayleigh_fsmc(int state_count, double avg_snr_db,
                                      double doppler_hz, double bit_rate_bps,
                                      Vector epsilons);

/// 8-state Rayleigh preset: -5 dB average SNR, 1e5 bits/s, fixed erasure
/// profile with average erasure rate 0.2549.
FadingChannelModel make_rayleigh8_preset(double doppler_hz);
Vector rayleigh8_epsilons();

RowVector stationary_distribution(const FadingChannelModel& model);

/// Transition matrix over an n-bit block, i.e. the n-th matrix power.
Matrix n_step_matrix(const FadingChannelModel& model, long n);

/// Codeword-level memory of a two-state channel:
/// 1 - b12^(n) - b21^(n) = (1 - b12 - b21)^n. Zero means memoryless.
double memory_coefficient(const FadingChannelModel& model, long n);

}  // namespace vcq
