#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "vcq/errors.hpp"
#include "vcq/qbd.hpp"

using namespace vcq;

namespace {

struct Instance {
  FadingChannelModel model;
  DecodeMatrices decode;
  SegmentationParams seg;
  SwitchingPolicy policy;
  QbdBlocks blocks;
};

Instance make_instance(const FadingChannelModel& model, int n, int bits, double gamma,
                       double rho, int ell) {
  const auto law = erasure_joint_distribution(model, n);
  auto decode = decode_matrices(law, bits);
  SegmentationParams seg{gamma, rho, 1.0 - std::pow(1.0 - rho, bits), bits};
  SwitchingPolicy policy = SwitchingPolicy::below(ell);
  auto blocks = build_blocks(model, decode, seg, policy);
  return Instance{model, std::move(decode), seg, policy, std::move(blocks)};
}

FadingChannelModel random_model(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  Matrix b(k, k);
  for (int i = 0; i < k; ++i) {
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      b(i, j) = unif(rng);
      sum += b(i, j);
    }
    b.row(i) /= sum;
  }
  Vector eps(k);
  std::uniform_real_distribution<double> eunif(0.0, 0.9);
  for (int i = 0; i < k; ++i) eps(i) = eunif(rng);
  std::sort(eps.data(), eps.data() + k, std::greater<double>());
  return FadingChannelModel(b, eps);
}

QbdBlocks scalar_blocks(double down, double hold, double up, double gamma) {
  QbdBlocks b;
  b.down = Matrix::Constant(1, 1, down);
  b.hold = Matrix::Constant(1, 1, hold);
  b.up = Matrix::Constant(1, 1, up);
  b.boundary_hold = Matrix::Constant(1, 1, 1.0 - gamma);
  b.boundary_up = Matrix::Constant(1, 1, gamma);
  return b;
}

}  // namespace

TEST_CASE("block construction reproduces the transition-probability formulas") {
  const auto inst = make_instance(make_gilbert_elliott(0.2, 0.3, 24, 0.5, 0.125), 24, 12,
                                  0.2, 0.01, 1);
  const double gamma = 0.2;
  const double rho_r = inst.seg.rho_r;
  const Matrix bn = inst.decode.success + inst.decode.failure;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double ds = inst.decode.success(i, j);
      const double df = inst.decode.failure(i, j);
      CHECK(inst.blocks.down(i, j) ==
            doctest::Approx((1 - gamma) * ds * rho_r).epsilon(1e-15));
      CHECK(inst.blocks.hold(i, j) ==
            doctest::Approx((1 - gamma) * (df + ds * (1 - rho_r)) + gamma * ds * rho_r)
                .epsilon(1e-15));
      CHECK(inst.blocks.up(i, j) ==
            doctest::Approx(gamma * (df + ds * (1 - rho_r))).epsilon(1e-15));
      CHECK(inst.blocks.boundary_hold(i, j) ==
            doctest::Approx((1 - gamma) * bn(i, j)).epsilon(1e-15));
      CHECK(inst.blocks.boundary_up(i, j) ==
            doctest::Approx(gamma * bn(i, j)).epsilon(1e-15));
    }
  }
}

TEST_CASE("switching rows carry the stationary law and forbid departures") {
  const auto model = make_gilbert_elliott(0.2, 0.3, 24, 0.5, 0.125);
  const auto inst = make_instance(model, 24, 12, 0.2, 0.01, 2);
  const RowVector p = stationary_distribution(model);
  CHECK(inst.blocks.down.row(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK((inst.blocks.hold.row(0) - 0.8 * p).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((inst.blocks.up.row(0) - 0.2 * p).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((inst.blocks.boundary_hold.row(0) - 0.8 * p).cwiseAbs().maxCoeff() < 1e-15);
  // transmitting row is untouched
  CHECK(inst.blocks.down.row(1).sum() > 0.0);
}

TEST_CASE("static policy equals the policy-free construction bit for bit") {
  const auto model = make_rayleigh8_preset(50.0);
  const auto inst = make_instance(model, 30, 20, 0.15, 0.02, 1);
  // Assemble the same blocks without any policy notion.
  const double gamma = inst.seg.gamma;
  const double rho_r = inst.seg.rho_r;
  const Matrix block_step = inst.decode.success + inst.decode.failure;
  for (int i = 0; i < model.state_count(); ++i) {
    const auto success = inst.decode.success.row(i);
    const auto failure = inst.decode.failure.row(i);
    const RowVector down = (1.0 - gamma) * rho_r * success;
    const RowVector hold =
        (1.0 - gamma) * (failure + (1.0 - rho_r) * success) + gamma * rho_r * success;
    const RowVector up = gamma * (failure + (1.0 - rho_r) * success);
    CHECK((inst.blocks.down.row(i) - down).cwiseAbs().maxCoeff() == 0.0);
    CHECK((inst.blocks.hold.row(i) - hold).cwiseAbs().maxCoeff() == 0.0);
    CHECK((inst.blocks.up.row(i) - up).cwiseAbs().maxCoeff() == 0.0);
    CHECK((inst.blocks.boundary_hold.row(i) - (1.0 - gamma) * block_step.row(i))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("blocks are row-stochastic across random instances") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 5);
    const auto model = random_model(rng, k);
    const int n = 4 + static_cast<int>(rng() % 20);
    const int bits = 1 + static_cast<int>(rng() % n);
    const double gamma = 0.05 + 0.4 * (rng() % 1000) / 1000.0;
    const double rho = 0.01 + 0.3 * (rng() % 1000) / 1000.0;
    const int ell = 1 + static_cast<int>(rng() % (k + 1));
    const auto inst = make_instance(model, n, bits, gamma, rho, ell);
    const Matrix level = inst.blocks.down + inst.blocks.hold + inst.blocks.up;
    const Matrix boundary = inst.blocks.boundary_hold + inst.blocks.boundary_up;
    CHECK(is_row_stochastic(level, 1e-10));
    CHECK(is_row_stochastic(boundary, 1e-10));
  }
}

TEST_CASE("scalar chain taboo probability matches the quadratic closed form") {
  // u = hold + up * down / (1 - u): minimal root of
  // u^2 - (1 + hold) u + (hold + up down) = 0.
  for (auto [down, up] : {std::pair{0.3, 0.2}, {0.45, 0.1}, {0.2, 0.15}}) {
    const double hold = 1.0 - down - up;
    const auto blocks = scalar_blocks(down, hold, up, 0.3);
    int iters = 0;
    const Matrix u = neuts_taboo_matrix(blocks, 1e-13, 100000, &iters);
    const double b = 1.0 + hold;
    const double root = (b - std::sqrt(b * b - 4.0 * (hold + up * down))) / 2.0;
    CHECK(u(0, 0) == doctest::Approx(root).epsilon(1e-12));
    CHECK(iters >= 1);

    // rate matrix: up / (1 - u), which collapses to up/down here
    const Matrix r = rate_matrix(blocks, u);
    CHECK(r(0, 0) == doctest::Approx(up / (1.0 - u(0, 0))).epsilon(1e-12));
    CHECK(r(0, 0) == doctest::Approx(up / down).epsilon(1e-10));
  }
}

TEST_CASE("no upward transitions collapse the iteration immediately") {
  const auto inst = make_instance(make_gilbert_elliott(0.2, 0.3, 12, 0.5, 0.125), 12, 6,
                                  0.0, 0.05, 1);
  REQUIRE(inst.blocks.up.isZero(0.0));
  int iters = 0;
  const Matrix u = neuts_taboo_matrix(inst.blocks, 1e-13, 100000, &iters);
  CHECK(iters == 1);
  CHECK((u - inst.blocks.hold).cwiseAbs().maxCoeff() == 0.0);
  CHECK(rate_matrix(inst.blocks, u).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("taboo iterates increase monotonically toward the fixed point") {
  const auto inst = make_instance(make_gilbert_elliott(0.2, 0.4, 24, 0.6, 0.1), 24, 16,
                                  0.3, 0.02, 2);
  const Matrix limit = neuts_taboo_matrix(inst.blocks);
  const Matrix identity = Matrix::Identity(2, 2);
  Matrix iterate = inst.blocks.hold;
  for (int m = 0; m < 60; ++m) {
    const Matrix next =
        inst.blocks.hold +
        inst.blocks.up * (identity - iterate).partialPivLu().solve(inst.blocks.down);
    CHECK((next - iterate).minCoeff() >= -1e-15);
    iterate = next;
    CHECK(iterate.maxCoeff() <= 1.0 + 1e-12);
  }
  CHECK((iterate - limit).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(limit.minCoeff() >= 0.0);
  for (int i = 0; i < 2; ++i) CHECK(limit.row(i).sum() <= 1.0 + 1e-12);
}

TEST_CASE("boundary distribution with no arrivals sits at the stationary law") {
  const auto model = make_gilbert_elliott(0.2, 0.3, 12, 0.5, 0.125);
  const auto inst = make_instance(model, 12, 6, 0.0, 0.05, 1);
  const auto solution = solve_qbd(inst.blocks);
  REQUIRE(solution.stable);
  const RowVector p = stationary_distribution(model);
  CHECK((solution.level0 - p).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(solution.level1.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("scalar birth-death boundary matches the balance closed form") {
  const double gamma = 0.25;
  const double service = 0.55;  // per-cycle departure probability when busy
  const double down = (1.0 - gamma) * service;
  const double up = gamma * (1.0 - service);
  const auto blocks = scalar_blocks(down, 1.0 - down - up, up, gamma);
  const auto solution = solve_qbd(blocks);
  REQUIRE(solution.stable);

  const double ratio = solution.rate(0, 0);
  // level-crossing balance: pi0 gamma = pi1 down, pi_{q+1} = pi_q (up/down)
  const double pi1_over_pi0 = gamma / down;
  const double norm = 1.0 + pi1_over_pi0 / (1.0 - ratio);
  CHECK(solution.level0(0) == doctest::Approx(1.0 / norm).epsilon(1e-10));
  CHECK(solution.level1(0) == doctest::Approx(pi1_over_pi0 / norm).epsilon(1e-10));
  CHECK(ratio == doctest::Approx(up / down).epsilon(1e-10));
}

TEST_CASE("solved distribution satisfies global balance on the lowest levels") {
  std::mt19937_64 rng(5150);
  int tested = 0;
  while (tested < 12) {
    const int k = 1 + static_cast<int>(rng() % 4);
    const auto model = random_model(rng, k);
    const int n = 6 + static_cast<int>(rng() % 18);
    const int bits = 1 + static_cast<int>(rng() % n);
    const double gamma = 0.05 + 0.35 * (rng() % 1000) / 1000.0;
    const double rho = 0.02 + 0.25 * (rng() % 1000) / 1000.0;
    const int ell = 1 + static_cast<int>(rng() % k);
    const auto inst = make_instance(model, n, bits, gamma, rho, ell);
    const double service = service_rate(model, inst.decode, inst.policy);
    if (!stability_check(inst.seg, service)) continue;
    ++tested;

    const auto sol = solve_qbd(inst.blocks);
    REQUIRE(sol.stable);

    std::vector<RowVector> pi(8);
    pi[0] = sol.level0;
    pi[1] = sol.level1;
    for (int q = 2; q < 8; ++q) pi[q] = pi[q - 1] * sol.rate;

    // level 0: pi0 C1 + pi1 A0
    CHECK((pi[0] * inst.blocks.boundary_hold + pi[1] * inst.blocks.down - pi[0])
              .cwiseAbs()
              .maxCoeff() < 1e-9);
    // level 1: pi0 C2 + pi1 A1 + pi2 A0
    CHECK((pi[0] * inst.blocks.boundary_up + pi[1] * inst.blocks.hold +
           pi[2] * inst.blocks.down - pi[1])
              .cwiseAbs()
              .maxCoeff() < 1e-9);
    for (int q = 2; q <= 5; ++q) {
      CHECK((pi[q - 1] * inst.blocks.up + pi[q] * inst.blocks.hold +
             pi[q + 1] * inst.blocks.down - pi[q])
                .cwiseAbs()
                .maxCoeff() < 1e-9);
    }

    // normalization including the geometric tail
    const Matrix identity = Matrix::Identity(k, k);
    const Vector tail = (identity - sol.rate).partialPivLu().solve(Vector::Ones(k));
    CHECK(sol.level0.sum() + sol.level1 * tail == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("spectral radius of R agrees with the drift stability condition") {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 4);
    const auto model = random_model(rng, k);
    const int n = 6 + static_cast<int>(rng() % 18);
    const int bits = 1 + static_cast<int>(rng() % n);
    const double gamma = 0.05 + 0.6 * (rng() % 1000) / 1000.0;
    const double rho = 0.02 + 0.3 * (rng() % 1000) / 1000.0;
    const int ell = 1 + static_cast<int>(rng() % (k + 1));
    const auto inst = make_instance(model, n, bits, gamma, rho, ell);
    const double service = service_rate(model, inst.decode, inst.policy);
    const bool drift_stable = stability_check(inst.seg, service);

    const Matrix u = neuts_taboo_matrix(inst.blocks);
    const double radius = spectral_radius(rate_matrix(inst.blocks, u));
    if (drift_stable) {
      CHECK(radius < 1.0);
    } else {
      CHECK(radius >= 1.0 - 1e-9);
    }
  }
}

TEST_CASE("service rate closed cases") {
  // perfect channel at full rate serves one segment per block
  const auto clean = make_gilbert_elliott(0.2, 0.3, 12);
  const auto clean_law = erasure_joint_distribution(clean, 12);
  const auto clean_dm = decode_matrices(clean_law, 12);
  CHECK(service_rate(clean, clean_dm, SwitchingPolicy::fixed()) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // always-reconfigure never transmits
  CHECK(service_rate(clean, clean_dm, SwitchingPolicy::below(3)) == 0.0);

  // static service rate is the stationary-weighted success mass
  const auto model = make_gilbert_elliott(0.2, 0.3, 12, 0.5, 0.125);
  const auto law = erasure_joint_distribution(model, 12);
  const auto dm = decode_matrices(law, 6);
  const RowVector p = stationary_distribution(model);
  const double expected = p(0) * dm.success.row(0).sum() + p(1) * dm.success.row(1).sum();
  CHECK(service_rate(model, dm, SwitchingPolicy::fixed()) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("stability check boundary semantics") {
  SegmentationParams none{0.0, 0.05, 0.3, 8};
  CHECK(stability_check(none, 0.0));
  CHECK(stability_check(none, 0.5));

  SegmentationParams seg{0.2, 0.05, 0.4, 10};
  CHECK(stability_check(seg, 0.5000001));
  CHECK_FALSE(stability_check(seg, 0.5));  // equality is not stable
  CHECK_FALSE(stability_check(seg, 0.49));
}

TEST_CASE("performance report metrics") {
  const auto model = make_gilbert_elliott(0.2, 0.3, 114, 0.5, 0.125);
  const auto inst = make_instance(model, 114, 86, 0.2, 1.0 / 195.0, 1);
  const auto sol = solve_qbd(inst.blocks);
  REQUIRE(sol.stable);
  const std::vector<double> thresholds{-1.0, 0.0, 1.0, 2.0, 5.0, 10.0};
  const auto report = performance_report(inst.blocks, sol, inst.seg, inst.policy, 86, 114,
                                         thresholds);

  CHECK(report.stable);
  CHECK(report.service_rate ==
        doctest::Approx(service_rate(model, inst.decode, inst.policy)).epsilon(1e-12));
  CHECK(report.throughput_bpcu ==
        doctest::Approx(report.service_rate * 86.0 / 114.0).epsilon(1e-12));
  CHECK(report.arrival_rate == doctest::Approx(0.2 / inst.seg.rho_r).epsilon(1e-12));
  CHECK(report.mean_wait == doctest::Approx(report.mean_queue / 0.2).epsilon(1e-12));
  CHECK(report.decay_rate < 0.0);

  SUBCASE("mean queue matches a truncated series") {
    // sum q pi_q 1 with the tail bounded below 1e-10
    RowVector level = sol.level1;
    double series = 0.0;
    const Matrix identity = Matrix::Identity(2, 2);
    const Vector tail_mass = (identity - sol.rate).partialPivLu().solve(Vector::Ones(2));
    for (int q = 1; q <= 100000; ++q) {
      series += q * level.sum();
      const double remaining = (level * sol.rate * tail_mass).value() * (q + 1);
      if (remaining < 1e-12) break;
      level = level * sol.rate;
    }
    CHECK(report.mean_queue == doctest::Approx(series).epsilon(1e-8));
  }

  SUBCASE("ccdf is a proper tail function") {
    for (size_t i = 0; i < report.ccdf.size(); ++i) {
      CHECK(report.ccdf[i].second >= 0.0);
      CHECK(report.ccdf[i].second <= 1.0);
      if (i > 0) CHECK(report.ccdf[i].second <= report.ccdf[i - 1].second + 1e-15);
    }
    CHECK(report.ccdf.front().second == 1.0);  // threshold -1
    // direct check at threshold 0: 1 - pi0 . 1
    CHECK(report.ccdf[1].second == doctest::Approx(1.0 - sol.level0.sum()).epsilon(1e-12));
  }

  SUBCASE("tail levels decay at the spectral radius of R") {
    const double radius = spectral_radius(sol.rate);
    RowVector level = sol.level1;
    for (int q = 1; q < 300; ++q) level = level * sol.rate;
    const double ratio = (level * sol.rate).sum() / level.sum();
    CHECK(std::abs(ratio - radius) < 1e-6);
  }
}

TEST_CASE("unstable configurations raise an explicit error with the rates") {
  const auto model = make_gilbert_elliott(0.2, 0.3, 114, 0.5, 0.125);
  // gamma close to 1 overwhelms any service rate
  const auto inst = make_instance(model, 114, 86, 0.9, 1.0 / 195.0, 1);
  const auto sol = solve_qbd(inst.blocks);
  CHECK_FALSE(sol.stable);
  const std::vector<double> thresholds{0.0};
  try {
    performance_report(inst.blocks, sol, inst.seg, inst.policy, 86, 114, thresholds);
    FAIL("expected UnstableError");
  } catch (const UnstableError& err) {
    CHECK(err.arrival_rate > err.service_rate);
    CHECK(err.service_rate > 0.0);
  }
}

TEST_CASE("rate optimization") {
  const std::vector<double> thresholds{0.0, 5.0};

  SUBCASE("perfect channel always fills the block") {
    const auto clean = make_gilbert_elliott(0.2, 0.3, 16);
    const auto [bits, tput] = optimal_throughput(clean, SwitchingPolicy::fixed(), 16);
    CHECK(bits == 16);
    CHECK(tput == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("hopeless channel falls back to the smallest rate") {
    Matrix b(2, 2);
    b << 0.7, 0.3, 0.3, 0.7;
    Vector eps(2);
    eps << 1.0, 1.0;
    const FadingChannelModel ruined(b, eps);
    const auto [bits, tput] = optimal_throughput(ruined, SwitchingPolicy::fixed(), 8);
    CHECK(bits == 1);
    CHECK(tput == doctest::Approx(0.0).epsilon(1e-30));
  }

  SUBCASE("search agrees with an exhaustive rescan") {
    const auto model = make_gilbert_elliott(0.2, 0.3, 40, 0.5, 0.125);
    const auto [bits, tput] = optimal_throughput(model, SwitchingPolicy::below(2), 40);
    const auto law = erasure_joint_distribution(model, 40);
    double best = -1.0;
    int best_bits = 0;
    for (int candidate = 1; candidate <= 40; ++candidate) {
      const auto dm = decode_matrices(law, candidate);
      const double t =
          service_rate(model, dm, SwitchingPolicy::below(2)) * candidate / 40.0;
      if (t > best) {
        best = t;
        best_bits = candidate;
      }
    }
    CHECK(bits == best_bits);
    CHECK(tput == doctest::Approx(best).epsilon(1e-14));

    const auto [bits2, report] = optimize_info_bits(model, 0.2, 1.0 / 195.0,
                                                    SwitchingPolicy::below(2), 40,
                                                    thresholds);
    CHECK(bits2 == bits);
    CHECK(report.throughput_bpcu == doctest::Approx(tput).epsilon(1e-12));
    CHECK(report.policy_ell == 2);
  }
}
