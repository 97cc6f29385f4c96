#include "zoomctl/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace zoomctl {

namespace {

constexpr double kLn2 = 0.6931471805599453;

// log2(K + 1) - e for K = ceil(2^e + epsilon) (optionally forced even),
// computed without cancellation. e = T 2n log2|lambda|.
double rate_excess_term(double e, double epsilon, bool force_even) {
  if (e <= 50.0) {
    const double pow_val = std::exp2(e);
    double K = std::ceil(pow_val + epsilon);
    if (force_even && std::fmod(K, 2.0) != 0.0) K += 1.0;
    return std::log2(K + 1.0) - e;
  }
  // ceil(2^e + eps) = 2^e + r with r in [eps, eps + 1) (+1 more when the
  // even forcing applies); use the upper end so the bound stays valid.
  const double r = epsilon + (force_even ? 2.0 : 1.0);
  return std::log1p((r + 1.0) * std::exp2(-e)) / kLn2;
}

TailDecay fit_tail(const std::vector<int>& gaps, int fit_start,
                   long min_intervals) {
  TailDecay out;
  out.intervals = static_cast<long>(gaps.size());
  out.fit_start = fit_start;
  if (gaps.empty()) return out;

  int max_gap = 0;
  for (int g : gaps) max_gap = std::max(max_gap, g);
  std::vector<long> exceed(max_gap + 1, 0);
  for (int g : gaps) {
    for (int k = 0; k <= max_gap && k < g; ++k) ++exceed[k];
  }
  // P(gap > k); gaps are >= 1 so survival[0] = 1.
  out.survival.resize(max_gap + 1);
  for (int k = 0; k <= max_gap; ++k) {
    out.survival[k] =
        static_cast<double>(exceed[k]) / static_cast<double>(gaps.size());
  }

  // Weighted least squares on ln survival over k in [fit_start, last k with
  // >= 10 exceedances]. Per-point variance from the binomial delta method,
  // var(ln S_k) = (1 - S_k) / (N S_k), carries the slope standard error, so
  // two supported points already yield a usable confidence interval.
  std::vector<double> xs, ys, ws;
  int fit_end = fit_start - 1;
  for (int k = fit_start; k <= max_gap; ++k) {
    if (exceed[k] < 10) break;
    const double s = out.survival[k];
    xs.push_back(static_cast<double>(k));
    ys.push_back(std::log(s));
    ws.push_back(static_cast<double>(gaps.size()) * s / (1.0 - s + 1e-12));
    fit_end = k;
  }
  out.fit_end = fit_end;
  const int m = static_cast<int>(xs.size());
  if (out.intervals < min_intervals || m < 2) return out;

  double sw = 0, swx = 0, swy = 0;
  for (int i = 0; i < m; ++i) {
    sw += ws[i];
    swx += ws[i] * xs[i];
    swy += ws[i] * ys[i];
  }
  const double mx = swx / sw;
  const double my = swy / sw;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    sxx += ws[i] * (xs[i] - mx) * (xs[i] - mx);
    sxy += ws[i] * (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0) return out;
  out.slope = sxy / sxx;
  out.slope_se = std::sqrt(1.0 / sxx);
  out.ci_low = out.slope - 1.96 * out.slope_se;
  out.ci_high = out.slope + 1.96 * out.slope_se;
  out.conclusive = true;
  return out;
}

// Two-sample Kolmogorov-Smirnov distance.
double ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
    const double fa = static_cast<double>(i) / a.size();
    const double fb = static_cast<double>(j) / b.size();
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

double ks_critical(std::size_t m, std::size_t n_other, double c_alpha) {
  return c_alpha * std::sqrt(static_cast<double>(m + n_other) /
                             (static_cast<double>(m) * n_other));
}

Verdict series_verdict(const std::vector<double>& series, double factor,
                       double aborted_frac) {
  const int S = static_cast<int>(series.size());
  if (S < 8) return Verdict::kInconclusive;
  if (aborted_frac > 0.5) return Verdict::kDiverging;
  const auto window_mean = [&](int lo, int hi) {
    double acc = 0;
    int cnt = 0;
    for (int s = lo; s < hi; ++s) {
      if (std::isfinite(series[s])) {
        acc += series[s];
        ++cnt;
      }
    }
    return cnt > 0 ? acc / cnt : std::numeric_limits<double>::quiet_NaN();
  };
  const double mid = window_mean(S / 4, S / 2);
  const double last = window_mean(3 * S / 4, S);
  if (!std::isfinite(mid) || !std::isfinite(last)) return Verdict::kDiverging;
  if (mid == 0.0 && last == 0.0) return Verdict::kBounded;
  // Sustained growth: four consecutive second-half windows, each ahead of
  // the one before it.
  bool growing = true;
  double prev = window_mean(S / 2, 5 * S / 8);
  for (int w = 1; w < 4; ++w) {
    const double cur = window_mean((4 + w) * S / 8, (5 + w) * S / 8);
    if (!(cur > 1.2 * prev)) {
      growing = false;
      break;
    }
    prev = cur;
  }
  if (growing) return Verdict::kDiverging;
  if (last <= factor * std::max(mid, 1e-300)) return Verdict::kBounded;
  return Verdict::kDiverging;
}

}  // namespace

double min_rate(const std::vector<std::complex<double>>& eigs) {
  double rate = 0.0;
  for (const auto& lam : eigs) {
    const double mag = std::abs(lam);
    if (mag > 1.0) rate += std::log2(mag);
  }
  return rate;
}

AvgRate avg_rate_gap(const std::vector<std::complex<double>>& eigs, int T,
                     double epsilon, int feedback_links) {
  if (T < 1) throw InputError("avg_rate: T must be at least 1");
  if (!(epsilon > 0.0)) throw InputError("avg_rate: epsilon must be positive");
  if (feedback_links < 0) {
    throw InputError("avg_rate: negative feedback link count");
  }
  const int n = static_cast<int>(eigs.size());
  if (n == 0) throw InputError("avg_rate: empty eigenvalue list");
  const double period = static_cast<double>(T) * 2.0 * n;
  AvgRate gap;
  gap.paper_formula = feedback_links / period;
  gap.implemented_policy = feedback_links / period;
  for (const auto& lam : eigs) {
    const double mag = std::abs(lam);
    if (!(mag > 1.0)) {
      throw InputError("avg_rate: eigenvalues must lie outside the unit circle");
    }
    const double e = period * std::log2(mag);
    gap.paper_formula += rate_excess_term(e, epsilon, false) / period;
    gap.implemented_policy += rate_excess_term(e, epsilon, true) / period;
  }
  return gap;
}

AvgRate avg_rate(const std::vector<std::complex<double>>& eigs, int T,
                 double epsilon, int feedback_links) {
  const AvgRate gap = avg_rate_gap(eigs, T, epsilon, feedback_links);
  double base = 0.0;
  for (const auto& lam : eigs) base += std::log2(std::abs(lam));
  return {base + gap.paper_formula, base + gap.implemented_policy};
}

double gaussian_tail_bound(const Matrix& Sigma, const Vector& Delta) {
  const int n = static_cast<int>(Sigma.rows());
  if (Sigma.cols() != n || Delta.size() != n || n == 0) {
    throw InputError("gaussian_tail_bound: dimension mismatch");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(Sigma);
  const Vector& evs = es.eigenvalues();
  const double lam_max = evs(n - 1);
  if (evs(0) <= kRankTol * std::max(1.0, lam_max)) {
    throw InputError("gaussian_tail_bound: covariance must be positive "
                     "definite");
  }
  double det = 1.0;
  for (int i = 0; i < n; ++i) det *= evs(i);
  for (int i = 0; i < n; ++i) {
    if (!(Delta(i) >= 1.0)) {
      throw InputError("gaussian_tail_bound: thresholds must be at least 1");
    }
  }
  double tail_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    tail_sum += std::exp(-Delta(i) * Delta(i) / (2.0 * lam_max));
  }
  return 2.0 * std::sqrt(std::pow(lam_max, n + 1) / (2.0 * M_PI * det)) *
         tail_sum;
}

TailDecay tail_decay_from_gaps(const std::vector<int>& gaps, int fit_start,
                               long min_intervals) {
  return fit_tail(gaps, fit_start, min_intervals);
}

TailDecay tail_decay_diagnostic(std::span<const RunReport> reports,
                                int fit_start, long min_intervals) {
  std::vector<int> gaps;
  for (const auto& rep : reports) {
    const std::vector<int> taus = stopping_times(rep);
    for (std::size_t z = 0; z + 1 < taus.size(); ++z) {
      gaps.push_back(taus[z + 1] - taus[z]);
    }
  }
  return fit_tail(gaps, fit_start, min_intervals);
}

DriftCheck drift_diagnostic(std::span<const RunReport> reports,
                            const ZoomParams& zoom, double F,
                            long min_outside) {
  (void)zoom;
  DriftCheck out;
  double cost_out = 0, drop_out = 0, cost_in = 0, drop_in = 0;
  for (const auto& rep : reports) {
    const std::vector<int> taus = stopping_times(rep);
    const int recorded = static_cast<int>(rep.x_hist.rows());
    for (std::size_t z = 0; z + 1 < taus.size(); ++z) {
      const int t0 = taus[z];
      const int t1 = taus[z + 1];
      if (t1 >= recorded) break;
      bool in_S = true;
      for (int i = 0; i < rep.n; ++i) {
        if (rep.delta_hist(t0, i) > F ||
            std::abs(rep.x_hist(t0, i)) > 0.5 * rep.K[i] * F) {
          in_S = false;
          break;
        }
      }
      double cost = 0.0;
      for (int s = t0; s < t1; ++s) {
        cost += rep.delta_hist(s, 0) * rep.delta_hist(s, 0);
      }
      const double drop = rep.delta_hist(t0, 0) * rep.delta_hist(t0, 0) -
                          rep.delta_hist(t1, 0) * rep.delta_hist(t1, 0);
      if (in_S) {
        cost_in += cost;
        drop_in += drop;
        ++out.excursions_inside;
      } else {
        cost_out += cost;
        drop_out += drop;
        ++out.excursions_outside;
      }
    }
  }
  if (out.excursions_outside > 0) {
    out.mean_cost_outside = cost_out / out.excursions_outside;
    out.mean_drop_outside = drop_out / out.excursions_outside;
  }
  if (out.excursions_inside > 0) {
    out.mean_cost_inside = cost_in / out.excursions_inside;
    out.mean_drop_inside = drop_in / out.excursions_inside;
  }
  out.conclusive = out.excursions_outside >= min_outside;
  if (!out.conclusive) return out;
  out.gamma_hat = out.mean_drop_outside / out.mean_cost_outside;
  out.b_hat = std::max(
      0.0, out.gamma_hat * out.mean_cost_inside - out.mean_drop_inside);
  out.ok = out.gamma_hat > 0.0;
  return out;
}

MomentDiagnostics moment_diagnostic(std::span<const RunReport> reports,
                                    double bounded_factor, int min_trials) {
  MomentDiagnostics out;
  out.trials = static_cast<int>(reports.size());
  if (reports.empty()) return out;
  const int n = reports[0].n;
  int max_rows = 0;
  for (const auto& rep : reports) {
    if (rep.aborted) ++out.trials_aborted;
    max_rows = std::max(max_rows, static_cast<int>(rep.x_hist.rows()));
  }

  out.mean_sq.assign(max_rows, 0.0);
  out.se_sq.assign(max_rows, 0.0);
  std::vector<std::vector<double>> coord_mean(n,
                                              std::vector<double>(max_rows, 0));
  for (int s = 0; s < max_rows; ++s) {
    double acc = 0, acc2 = 0;
    long alive = 0;
    std::vector<double> cacc(n, 0.0);
    for (const auto& rep : reports) {
      if (rep.x_hist.rows() <= s) continue;
      const double sq = rep.x_hist.row(s).squaredNorm();
      acc += sq;
      acc2 += sq * sq;
      for (int i = 0; i < n; ++i) {
        cacc[i] += rep.x_hist(s, i) * rep.x_hist(s, i);
      }
      ++alive;
    }
    if (alive == 0) {
      out.mean_sq[s] = std::numeric_limits<double>::quiet_NaN();
      out.se_sq[s] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    out.mean_sq[s] = acc / alive;
    const double var =
        alive > 1 ? (acc2 - acc * acc / alive) / (alive - 1) : 0.0;
    out.se_sq[s] = std::sqrt(std::max(0.0, var) / alive);
    for (int i = 0; i < n; ++i) coord_mean[i][s] = cacc[i] / alive;
  }

  const double aborted_frac =
      static_cast<double>(out.trials_aborted) / out.trials;
  out.per_coordinate.reserve(n);
  for (int i = 0; i < n; ++i) {
    out.per_coordinate.push_back(
        series_verdict(coord_mean[i], bounded_factor, aborted_frac));
  }
  out.overall = out.trials < min_trials
                    ? Verdict::kInconclusive
                    : series_verdict(out.mean_sq, bounded_factor, aborted_frac);
  {
    const int S = max_rows;
    const auto wm = [&](int lo, int hi) {
      double a = 0;
      int c = 0;
      for (int s = lo; s < hi; ++s) {
        if (s < S && std::isfinite(out.mean_sq[s])) {
          a += out.mean_sq[s];
          ++c;
        }
      }
      return c ? a / c : std::numeric_limits<double>::quiet_NaN();
    };
    out.mid_run_mean = wm(S / 4, S / 2);
    out.last_quarter_mean = wm(3 * S / 4, S);
  }

  // Excursion cost of the last coordinate against the leading bin size.
  double num = 0, den = 0;
  long excursions = 0;
  for (const auto& rep : reports) {
    const std::vector<int> taus = stopping_times(rep);
    const int recorded = static_cast<int>(rep.x_hist.rows());
    for (std::size_t z = 0; z + 1 < taus.size(); ++z) {
      if (taus[z + 1] >= recorded) break;
      for (int s = taus[z]; s < taus[z + 1]; ++s) {
        num += rep.x_hist(s, n - 1) * rep.x_hist(s, n - 1);
      }
      den += rep.delta_hist(taus[z], 0) * rep.delta_hist(taus[z], 0);
      ++excursions;
    }
  }
  out.kappa_hat = (excursions > 0 && den > 0) ? num / den : 0.0;
  return out;
}

DistributionDistance invariant_distribution_diagnostic(
    std::span<const RunReport> reports, int s1, int s2) {
  if (!(0 <= s1 && s1 < s2)) {
    throw InputError(
        "invariant_distribution_diagnostic: need 0 <= s1 < s2");
  }
  DistributionDistance out;
  out.s1 = s1;
  out.s2 = s2;
  if (reports.empty()) return out;
  const int n = reports[0].n;

  std::vector<std::vector<double>> at1(n), at2(n), grp_a(n), grp_b(n);
  std::size_t idx = 0;
  for (const auto& rep : reports) {
    if (rep.x_hist.rows() <= s2) continue;
    for (int i = 0; i < n; ++i) {
      at1[i].push_back(rep.x_hist(s1, i));
      at2[i].push_back(rep.x_hist(s2, i));
      ((idx % 2 == 0) ? grp_a[i] : grp_b[i]).push_back(rep.x_hist(s2, i));
    }
    ++idx;
  }
  if (at1[0].size() < 4 || grp_a[0].size() < 2 || grp_b[0].size() < 2) {
    throw InputError(
        "invariant_distribution_diagnostic: too few usable trials");
  }
  constexpr double kC01 = 1.628;  // two-sample KS critical factor, alpha=0.01
  out.critical_between = ks_critical(at1[0].size(), at2[0].size(), kC01);
  out.critical_null = ks_critical(grp_a[0].size(), grp_b[0].size(), kC01);
  for (int i = 0; i < n; ++i) {
    out.ks_between_times.push_back(ks_distance(at1[i], at2[i]));
    out.ks_null.push_back(ks_distance(grp_a[i], grp_b[i]));
    out.stationary_consistent.push_back(out.ks_between_times.back() <=
                                        out.critical_between);
  }
  return out;
}

double measured_bits_per_period(const RunReport& report) {
  double bits = static_cast<double>(report.feedback_links);
  int offset = 0;
  for (std::size_t c = 0; c < report.channel_dims.size(); ++c) {
    std::int64_t space = 1;
    std::int64_t max_symbol = 0;
    for (int i = 0; i < report.channel_dims[c]; ++i) {
      space *= report.K[offset + i];
    }
    for (std::int64_t q : report.symbols[c]) {
      max_symbol = std::max(max_symbol, q);
    }
    if (max_symbol > space) {
      throw NumericError(
          "measured_bits_per_period: symbol outside the channel alphabet");
    }
    offset += report.channel_dims[c];
    bits += std::log2(static_cast<double>(space) + 1.0);
  }
  return bits;
}

}  // namespace zoomctl
