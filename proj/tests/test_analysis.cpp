#include <cmath>
#include <random>

#include "doctest.h"
#include "zoomctl/analysis.hpp"
#include "zoomctl/random.hpp"

using namespace zoomctl;

namespace {

std::vector<std::complex<double>> real_eigs(std::initializer_list<double> v) {
  std::vector<std::complex<double>> out;
  for (double x : v) out.emplace_back(x, 0.0);
  return out;
}

RunReport synthetic_report(const std::vector<double>& xs,
                           const std::vector<double>& deltas,
                           const std::vector<std::uint8_t>& zoomed,
                           int K = 6, double F = 2.0) {
  RunReport rep;
  rep.n = 1;
  rep.steps = static_cast<int>(zoomed.size());
  rep.K = {K};
  rep.channel_dims = {1};
  rep.F = F;
  rep.x_hist.resize(xs.size(), 1);
  rep.delta_hist.resize(deltas.size(), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) rep.x_hist(i, 0) = xs[i];
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    rep.delta_hist(i, 0) = deltas[i];
  }
  rep.zoomed = zoomed;
  rep.feedback = zoomed;
  rep.symbols = {std::vector<std::int64_t>(zoomed.size(), 1)};
  return rep;
}

}  // namespace

TEST_CASE("minimum rate") {
  CHECK(min_rate(real_eigs({2.0, 3.0})) ==
        doctest::Approx(1.0 + std::log2(3.0)));
  CHECK(min_rate(real_eigs({0.5})) == 0.0);
  CHECK(min_rate({{1.0, 1.0}, {1.0, -1.0}}) == doctest::Approx(1.0));
  // permutation and conjugation invariance
  CHECK(min_rate({{1.0, -1.0}, {1.0, 1.0}}) == doctest::Approx(1.0));
}

TEST_CASE("average rate of the periodic policy") {
  SUBCASE("T = 1 worked example, both variants") {
    const AvgRate r = avg_rate(real_eigs({2.0}), 1, 1e-9, 0);
    CHECK(r.paper_formula == doctest::Approx(0.5 * std::log2(6.0)));
    CHECK(r.implemented_policy == doctest::Approx(0.5 * std::log2(7.0)));
  }

  SUBCASE("T = 20 approaches the floor") {
    const AvgRate r = avg_rate(real_eigs({2.0}), 20, 0.5, 0);
    CHECK(r.implemented_policy == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.implemented_policy > 1.0);
  }

  SUBCASE("each feedback link adds 1/(T 2n) bits") {
    const AvgRate r0 = avg_rate(real_eigs({2.0}), 5, 0.5, 0);
    const AvgRate r1 = avg_rate(real_eigs({2.0}), 5, 0.5, 1);
    CHECK(r1.implemented_policy - r0.implemented_policy ==
          doctest::Approx(1.0 / 10.0));
  }

  SUBCASE("gap stays positive and decreasing out to T = 50") {
    for (const double lam : {2.0, 3.0, 1.5}) {
      for (const int n : {1, 2}) {
        std::vector<std::complex<double>> eigs(n, {lam, 0.0});
        double prev = std::numeric_limits<double>::infinity();
        for (int T = 1; T <= 50; ++T) {
          const AvgRate gap = avg_rate_gap(eigs, T, 0.5, 0);
          CHECK(gap.implemented_policy > 0.0);
          CHECK(gap.implemented_policy < prev);
          prev = gap.implemented_policy;
        }
        CHECK(prev < 1e-4);
      }
    }
  }

  SUBCASE("overheads stay within the ceil and feedback terms") {
    // gap <= (2n + M) / (T 2n): one forced-even ceil unit per eigenvalue
    // plus the feedback bits.
    for (const double lam : {1.5, 2.0, 3.0}) {
      for (const int n : {1, 2}) {
        for (const int links : {0, 1, 2}) {
          std::vector<std::complex<double>> eigs(n, {lam, 0.0});
          for (int T = 1; T <= 20; ++T) {
            const double period = T * 2.0 * n;
            const AvgRate gap = avg_rate_gap(eigs, T, 0.5, links);
            CHECK(gap.implemented_policy <= (2.0 * n + links) / period);
          }
        }
      }
    }
  }

  SUBCASE("gap equals rate minus floor where both are exact") {
    const auto eigs = real_eigs({2.0, 3.0});
    const AvgRate rate = avg_rate(eigs, 2, 0.5, 1);
    const AvgRate gap = avg_rate_gap(eigs, 2, 0.5, 1);
    CHECK(rate.implemented_policy - min_rate(eigs) ==
          doctest::Approx(gap.implemented_policy).epsilon(1e-12));
  }

  SUBCASE("invalid inputs") {
    CHECK_THROWS_AS(avg_rate(real_eigs({2.0}), 0, 0.5, 0), InputError);
    CHECK_THROWS_AS(avg_rate(real_eigs({0.9}), 1, 0.5, 0), InputError);
    CHECK_THROWS_AS(avg_rate({}, 1, 0.5, 0), InputError);
  }
}

TEST_CASE("Gaussian tail bound") {
  SUBCASE("scalar value and dominance") {
    const double bound = gaussian_tail_bound(Matrix::Identity(1, 1),
                                             Vector::Constant(1, 2.0));
    CHECK(bound == doctest::Approx(2.0 / std::sqrt(2.0 * M_PI) *
                                   std::exp(-2.0)));
    const double truth = std::erfc(2.0 / std::sqrt(2.0));
    CHECK(bound >= truth);
  }

  SUBCASE("two dimensional value") {
    const double bound = gaussian_tail_bound(Matrix::Identity(2, 2),
                                             Vector::Constant(2, 2.0));
    CHECK(bound == doctest::Approx(2.0 / std::sqrt(2.0 * M_PI) * 2.0 *
                                   std::exp(-2.0)));
  }

  SUBCASE("monotone decreasing in each threshold") {
    double prev = std::numeric_limits<double>::infinity();
    for (double d = 1.0; d <= 10.0; d += 0.5) {
      const double bound = gaussian_tail_bound(Matrix::Identity(1, 1),
                                               Vector::Constant(1, d));
      CHECK(bound < prev);
      prev = bound;
    }
    CHECK(gaussian_tail_bound(Matrix::Identity(1, 1),
                              Vector::Constant(1, 10.0)) < 1e-20);
  }

  SUBCASE("input validation") {
    CHECK_THROWS_AS(gaussian_tail_bound(Matrix::Zero(2, 2),
                                        Vector::Constant(2, 2.0)),
                    InputError);
    CHECK_THROWS_AS(gaussian_tail_bound(Matrix::Identity(2, 2),
                                        Vector::Constant(2, 0.5)),
                    InputError);
  }

  SUBCASE("dominates Monte Carlo estimates on random covariances") {
    std::mt19937 gen(31);
    std::normal_distribution<double> dist;
    for (int rep = 0; rep < 10; ++rep) {
      const int n = 1 + static_cast<int>(gen() % 4);
      Matrix G(n, n);
      for (int i = 0; i < n * n; ++i) G(i / n, i % n) = dist(gen);
      const Matrix Sigma = G * G.transpose() + Matrix::Identity(n, n) * 0.1;
      Vector Delta(n);
      for (int i = 0; i < n; ++i) Delta(i) = 1.0 + 0.8 * (gen() % 100) / 100.0;

      const Matrix chol = psd_sqrt(Sigma);
      GaussianSource src(500 + rep, 0);
      const int samples = 20000;
      long exceed = 0;
      for (int s = 0; s < samples; ++s) {
        const Vector x = chol * src.normal_vector(n);
        for (int i = 0; i < n; ++i) {
          if (std::abs(x(i)) > Delta(i)) {
            ++exceed;
            break;
          }
        }
      }
      const double p_hat = static_cast<double>(exceed) / samples;
      const double se = std::sqrt(p_hat * (1 - p_hat) / samples);
      CHECK(gaussian_tail_bound(Sigma, Delta) >= p_hat - 4 * se);
    }
  }
}

TEST_CASE("tail decay fits") {
  SUBCASE("synthetic geometric gaps recover the ratio") {
    std::mt19937 gen(8);
    std::geometric_distribution<int> geo(0.5);  // gap - 1 ~ geometric
    std::vector<int> gaps;
    for (int i = 0; i < 100000; ++i) gaps.push_back(1 + geo(gen));
    const TailDecay fit = tail_decay_from_gaps(gaps, 3);
    REQUIRE(fit.conclusive);
    const double want = std::log(0.5);
    CHECK(fit.ci_low <= want);
    CHECK(want <= fit.ci_high);
    CHECK(fit.slope < 0.0);
  }

  SUBCASE("degenerate all-ones gaps have an empty tail") {
    std::vector<int> gaps(5000, 1);
    const TailDecay fit = tail_decay_from_gaps(gaps, 3);
    CHECK_FALSE(fit.conclusive);  // nothing beyond k = 0 to fit
    REQUIRE_FALSE(fit.survival.empty());
    CHECK(fit.survival[1] == 0.0);
  }

  SUBCASE("too few intervals is inconclusive") {
    std::vector<int> gaps(100, 2);
    CHECK_FALSE(tail_decay_from_gaps(gaps, 3).conclusive);
  }
}

TEST_CASE("drift check bookkeeping") {
  // Excursions built by hand: deltas shrink outside S and pay inside S.
  std::vector<double> deltas = {8, 7, 6, 5, 1, 6, 5.5, 5, 4.5, 4};
  std::vector<double> xs(10, 0.0);
  std::vector<std::uint8_t> zoomed(10, 1);
  std::vector<RunReport> reps{synthetic_report(xs, deltas, zoomed, 6,
                                               /*F=*/2.0)};
  ZoomParams zoom;
  const DriftCheck drift = drift_diagnostic(reps, zoom, reps[0].F, 1);
  REQUIRE(drift.conclusive);
  // One-step excursions: starts at 8,7,6,5 are outside S (delta > F), the
  // start at 1 is inside.
  CHECK(drift.excursions_inside == 1);
  CHECK(drift.excursions_outside == 8);
  CHECK(drift.gamma_hat > 0.0);
  CHECK(drift.b_hat >= 0.0);
}

TEST_CASE("moment verdicts") {
  SUBCASE("flat series is bounded") {
    std::vector<RunReport> reps;
    std::mt19937 gen(4);
    std::normal_distribution<double> dist;
    for (int t = 0; t < 120; ++t) {
      std::vector<double> xs(200), deltas(200, 1.0);
      for (auto& x : xs) x = dist(gen);
      std::vector<std::uint8_t> zoomed(199, 1);
      reps.push_back(synthetic_report(xs, deltas, zoomed));
    }
    const MomentDiagnostics diag = moment_diagnostic(reps);
    CHECK(diag.overall == Verdict::kBounded);
    CHECK(diag.kappa_hat > 0.0);
  }

  SUBCASE("geometric growth is diverging") {
    std::vector<RunReport> reps;
    for (int t = 0; t < 120; ++t) {
      std::vector<double> xs(200), deltas(200, 1.0);
      for (int s = 0; s < 200; ++s) xs[s] = std::pow(1.05, s) * (t + 1);
      std::vector<std::uint8_t> zoomed(199, 1);
      reps.push_back(synthetic_report(xs, deltas, zoomed));
    }
    CHECK(moment_diagnostic(reps).overall == Verdict::kDiverging);
  }

  SUBCASE("decay to zero is bounded") {
    std::vector<RunReport> reps;
    for (int t = 0; t < 120; ++t) {
      std::vector<double> xs(200), deltas(200, 1.0);
      for (int s = 0; s < 200; ++s) xs[s] = std::pow(0.9, s);
      std::vector<std::uint8_t> zoomed(199, 1);
      reps.push_back(synthetic_report(xs, deltas, zoomed));
    }
    CHECK(moment_diagnostic(reps).overall == Verdict::kBounded);
  }

  SUBCASE("few trials is inconclusive") {
    std::vector<RunReport> reps;
    for (int t = 0; t < 5; ++t) {
      std::vector<double> xs(50, 1.0), deltas(50, 1.0);
      std::vector<std::uint8_t> zoomed(49, 1);
      reps.push_back(synthetic_report(xs, deltas, zoomed));
    }
    CHECK(moment_diagnostic(reps).overall == Verdict::kInconclusive);
  }
}

TEST_CASE("distribution distance") {
  std::mt19937 gen(10);
  std::normal_distribution<double> dist;

  SUBCASE("identical marginals stay within the null band") {
    std::vector<RunReport> reps;
    for (int t = 0; t < 400; ++t) {
      std::vector<double> xs(101), deltas(101, 1.0);
      for (auto& x : xs) x = dist(gen);
      std::vector<std::uint8_t> zoomed(100, 1);
      reps.push_back(synthetic_report(xs, deltas, zoomed));
    }
    const DistributionDistance d =
        invariant_distribution_diagnostic(reps, 50, 100);
    REQUIRE(d.ks_between_times.size() == 1);
    CHECK(d.stationary_consistent[0]);
    CHECK(d.ks_null[0] <= d.critical_null);
  }

  SUBCASE("variance inflation is detected") {
    std::vector<RunReport> reps;
    for (int t = 0; t < 400; ++t) {
      std::vector<double> xs(101), deltas(101, 1.0);
      for (int s = 0; s <= 100; ++s) xs[s] = dist(gen) * (1.0 + s * 0.2);
      std::vector<std::uint8_t> zoomed(100, 1);
      reps.push_back(synthetic_report(xs, deltas, zoomed));
    }
    const DistributionDistance d =
        invariant_distribution_diagnostic(reps, 10, 100);
    CHECK_FALSE(d.stationary_consistent[0]);
  }

  SUBCASE("bad time arguments throw") {
    std::vector<RunReport> reps;
    CHECK_THROWS_AS(invariant_distribution_diagnostic(reps, 10, 5),
                    InputError);
  }
}
