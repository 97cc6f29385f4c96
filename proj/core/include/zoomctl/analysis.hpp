#pragma once

#include <complex>
#include <span>
#include <vector>

#include "zoomctl/closed_loop.hpp"
#include "zoomctl/numerics.hpp"
#include "zoomctl/quantizer.hpp"

namespace zoomctl {

/// Data-rate floor: sum of log2 |lambda| over eigenvalues outside the unit
/// circle, in bits per raw stage.
double min_rate(const std::vector<std::complex<double>>& eigs);

/// Average-rate upper bound for the periodic policy with sampling period
/// T * 2n: (M + sum_i log2(K_i + 1)) / (T 2n) with K_i = ceil(|lambda_i|^{T2n}
/// + epsilon). `paper_formula` uses that K directly; `implemented_policy`
/// forces K up to the next even integer, matching the quantizer actually
/// built. Exponents too large for exact integer arithmetic switch to a log2
/// path whose ceil correction is replaced by its upper bound, so the result
/// stays a valid upper bound without materializing the power.
struct AvgRate {
  double paper_formula = 0.0;
  double implemented_policy = 0.0;
};
AvgRate avg_rate(const std::vector<std::complex<double>>& eigs, int T,
                 double epsilon, int feedback_links);

/// avg_rate minus min_rate evaluated without cancellation, so the excess
/// stays strictly positive in floating point even at large T.
AvgRate avg_rate_gap(const std::vector<std::complex<double>>& eigs, int T,
                     double epsilon, int feedback_links);

/// Union-bound Gaussian tail envelope for P(|X_i| > Delta_i for some i),
/// X ~ N(0, Sigma):
///   2 sqrt(lam_max^{n+1} / (2 pi det Sigma)) sum_i exp(-Delta_i^2 /
///   (2 lam_max)).
/// Sigma must be positive definite and every Delta_i >= 1.
double gaussian_tail_bound(const Matrix& Sigma, const Vector& Delta);

/// Empirical survival function of the gaps between perfectly-zoomed times,
/// with a weighted least-squares line (binomial per-point variances) fitted
/// to the log survival beyond `fit_start`.
struct TailDecay {
  bool conclusive = false;
  long intervals = 0;
  std::vector<double> survival;  // survival[k] = P(gap > k), k = 0, 1, ...
  int fit_start = 0;
  int fit_end = 0;     // inclusive
  double slope = 0.0;  // natural-log slope per step
  double slope_se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};
TailDecay tail_decay_diagnostic(std::span<const RunReport> reports,
                                int fit_start = 3, long min_intervals = 1000);

/// Same fit applied to a raw list of gaps (synthetic-oracle entry point).
TailDecay tail_decay_from_gaps(const std::vector<int>& gaps,
                               int fit_start = 3, long min_intervals = 1000);

/// Empirical random-time drift check on the leading bin size. Excursions
/// between consecutive perfectly-zoomed times are split by whether they
/// start inside the compact set S = {|x_i| <= K_i F / 2, Delta_i <= F};
/// gamma_hat is the largest drift coefficient the outside-S excursions
/// support in empirical mean, and b_hat the offset the inside-S ones need.
struct DriftCheck {
  bool conclusive = false;
  bool ok = false;  // conclusive and gamma_hat > 0
  double gamma_hat = 0.0;
  double b_hat = 0.0;
  long excursions_outside = 0;
  long excursions_inside = 0;
  double mean_cost_outside = 0.0;   // E[sum Delta_1^2 over excursion]
  double mean_drop_outside = 0.0;   // E[Delta_1^2 start - end]
  double mean_cost_inside = 0.0;
  double mean_drop_inside = 0.0;
};
DriftCheck drift_diagnostic(std::span<const RunReport> reports,
                            const ZoomParams& zoom, double F,
                            long min_outside = 30);

enum class Verdict { kBounded, kDiverging, kInconclusive };

/// Second-moment series with a finite-sample boundedness verdict: bounded
/// when the last-quarter mean stays within `bounded_factor` of the mid-run
/// mean, no sustained growth is detected, and almost no trial aborted.
struct MomentDiagnostics {
  int trials = 0;
  int trials_aborted = 0;
  std::vector<double> mean_sq;  // E ||x_s||^2 over alive trials
  std::vector<double> se_sq;
  std::vector<Verdict> per_coordinate;
  Verdict overall = Verdict::kInconclusive;
  double mid_run_mean = 0.0;
  double last_quarter_mean = 0.0;
  double kappa_hat = 0.0;  // E[sum (x_n)^2 over excursion] / E[Delta_1^2]
};
MomentDiagnostics moment_diagnostic(std::span<const RunReport> reports,
                                    double bounded_factor = 1.5,
                                    int min_trials = 100);

/// Kolmogorov-Smirnov distances between the per-coordinate state marginals
/// at two times, with a same-time split-halves distance as null calibration.
struct DistributionDistance {
  int s1 = 0;
  int s2 = 0;
  std::vector<double> ks_between_times;
  std::vector<double> ks_null;  // two seed groups at s2
  double critical_between = 0.0;  // 1% asymptotic two-sample threshold
  double critical_null = 0.0;
  std::vector<bool> stationary_consistent;
};
DistributionDistance invariant_distribution_diagnostic(
    std::span<const RunReport> reports, int s1, int s2);

/// Measured channel bits per sampled period from a run, for auditing
/// against the configured rate.
double measured_bits_per_period(const RunReport& report);

}  // namespace zoomctl
