#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "zoomctl/numerics.hpp"

namespace zoomctl {

/// Zoom-rate parameters of the adaptive uniform quantizer.
///
/// On overflow every bin grows by rho * |lambda|; otherwise a bin above its
/// floor L shrinks by |lambda| / (|lambda| + epsilon - eta) and a bin at or
/// below the floor holds. rho > 1 and 0 < eta < epsilon are required so the
/// shrink factor stays below one for |lambda| > 1.
struct ZoomParams {
  double rho = 1.5;
  double epsilon = 0.5;
  double eta = 0.25;
  double delta_ratio = 0.5;  // adjacent-bin ordering ratio (delta)
  double floor_scale = 1.0;  // c in L = c * Delta_0, c in (0, 1]
  Vector L;                  // per-component hold thresholds; set by init_bins

  double grow_factor(double lam_abs) const { return rho * lam_abs; }
  double shrink_factor(double lam_abs) const {
    return lam_abs / (lam_abs + epsilon - eta);
  }

  void validate() const;
};

enum class BinMode { kReal, kComplex };

/// Per-component bin sizes Delta, one entry per state coordinate.
///
/// When lattice mode is active the exponents k_i with Delta_i = 2^(k_i * ell)
/// are tracked as integers and bin sizes are recomputed from them, so
/// log2(Delta_i) / ell stays exactly integral under any update sequence.
struct BinState {
  Vector delta;
  bool lattice = false;
  double ell = 1.0;
  std::vector<std::int64_t> lattice_exponents;

  int size() const { return static_cast<int>(delta.size()); }
};

/// Smallest even K with K >= ceil(lam_abs + epsilon). The stability results
/// need an even granular bin count, so odd counts round up.
int forced_even_bin_count(double lam_abs, double epsilon);

/// Symbol in {1, ..., K+1} for the K-bin uniform quantizer with bin size
/// delta. Bin k covers [(-K/2 + k - 1) delta, (-K/2 + k) delta); the point
/// x = (K/2) delta belongs to bin K; |x| > (K/2) delta yields the overflow
/// symbol K+1. The lower edge -(K/2) delta falls in bin 1 by the half-open
/// rule.
int scalar_encode(double x, double delta, int K);

/// Bin midpoint (-(K+1)/2 + k) delta for k <= K; 0 for the overflow symbol.
double scalar_decode(int symbol, double delta, int K);

/// Joint symbol for an n-component observation: 0 if any component
/// overflows, else the mixed-radix index
///   1 + sum_i (q_i - 1) * prod_{j > i} K_j
/// which is a bijection onto {1, ..., prod K_i}.
std::int64_t vector_encode(const Vector& y, const BinState& bins,
                           const std::vector<int>& K);

/// Inverse of vector_encode composed with per-component decode; the zero
/// symbol decodes to the all-zeros estimate.
Vector vector_decode(std::int64_t symbol, const BinState& bins,
                     const std::vector<int>& K);

/// Zoom update for a single-eigenvalue block: symbol 0 grows every bin by
/// rho * lam_abs; otherwise bins at or below their floor hold and the rest
/// shrink.
BinState update_bins(std::int64_t symbol, const BinState& bins,
                     const ZoomParams& zoom, double lam_abs);

/// Same update with a per-component eigenvalue magnitude (one entry per
/// coordinate; components of one block share their block's value).
BinState update_bins(std::int64_t symbol, const BinState& bins,
                     const ZoomParams& zoom, const Vector& lam_abs);

struct BinInit {
  BinState bins;
  ZoomParams zoom;  // input params with L = floor_scale * Delta_0 filled in
};

/// Initial bin ladder for one block: real mode sets Delta_{i+1} =
/// delta_ratio * Delta_i; complex mode keeps conjugate pairs equal with the
/// ratio applied pair to pair (n must be even).
BinInit init_bins(double delta1, int n, BinMode mode, const ZoomParams& zoom);

/// Adjusts rho, epsilon, eta minimally so that log2 of the grow and shrink
/// factors are integer multiples of ell with coprime quotients, keeping each
/// parameter within 10% of its input and rho > 1. Already-conforming
/// parameters are returned unchanged.
ZoomParams snap_to_lattice(const ZoomParams& zoom, double lam_abs, double ell);

/// Integer exponents (grow, shrink) of a lattice-conforming parameter set:
/// log2(grow factor) = a * ell, log2(shrink factor) = b * ell.
struct LatticeExponents {
  std::int64_t grow;
  std::int64_t shrink;
};
LatticeExponents lattice_exponents_for(const ZoomParams& zoom, double lam_abs,
                                       double ell);

/// Round each bin size to the nearest lattice point 2^(k * ell) and switch
/// the state to exact exponent tracking.
BinState snap_bins_to_lattice(const BinState& bins, double ell);

}  // namespace zoomctl
