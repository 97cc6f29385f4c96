#include "zoomctl/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace zoomctl {

namespace {

constexpr std::int64_t kMaxSymbolSpace = std::int64_t{1} << 62;

std::int64_t symbol_space(const std::vector<int>& K) {
  std::int64_t prod = 1;
  for (int k : K) {
    if (k < 2 || k % 2 != 0) {
      throw InputError("bin counts must be even and at least 2");
    }
    if (prod > kMaxSymbolSpace / k) {
      throw ConfigError("joint symbol space exceeds 2^62");
    }
    prod *= k;
  }
  return prod;
}

bool nearly_integer(double q, double tol = 1e-9) {
  return std::abs(q - std::round(q)) <= tol * std::max(1.0, std::abs(q));
}

double lattice_delta(std::int64_t exponent, double ell) {
  return std::exp2(static_cast<double>(exponent) * ell);
}

}  // namespace

void ZoomParams::validate() const {
  if (!(rho > 1.0)) throw ConfigError("zoom: rho must exceed 1");
  if (!(epsilon > 0.0)) throw ConfigError("zoom: epsilon must be positive");
  if (!(eta > 0.0 && eta < epsilon)) {
    throw ConfigError("zoom: eta must lie in (0, epsilon)");
  }
  if (!(delta_ratio > 0.0)) {
    throw ConfigError("zoom: delta_ratio must be positive");
  }
  if (!(floor_scale > 0.0 && floor_scale <= 1.0)) {
    throw ConfigError("zoom: floor_scale must lie in (0, 1]");
  }
}

int forced_even_bin_count(double lam_abs, double epsilon) {
  if (!(lam_abs > 0.0) || !(epsilon > 0.0)) {
    throw InputError("forced_even_bin_count: arguments must be positive");
  }
  double k = std::ceil(lam_abs + epsilon);
  if (k > 1e15) throw ConfigError("bin count overflow");
  auto K = static_cast<std::int64_t>(k);
  if (K < 2) K = 2;
  if (K % 2 != 0) ++K;
  return static_cast<int>(K);
}

int scalar_encode(double x, double delta, int K) {
  if (std::isnan(x)) throw InputError("scalar_encode: NaN input");
  if (!(delta > 0.0)) throw InputError("scalar_encode: delta must be positive");
  if (K < 2 || K % 2 != 0) {
    throw InputError("scalar_encode: K must be even and at least 2");
  }
  const double half_range = 0.5 * K * delta;
  if (std::abs(x) > half_range) return K + 1;
  if (x == half_range) return K;
  const double pos = x / delta + 0.5 * K;  // in [0, K)
  int k = static_cast<int>(std::floor(pos)) + 1;
  return std::clamp(k, 1, K);
}

double scalar_decode(int symbol, double delta, int K) {
  if (!(delta > 0.0)) throw InputError("scalar_decode: delta must be positive");
  if (K < 2 || K % 2 != 0) {
    throw InputError("scalar_decode: K must be even and at least 2");
  }
  if (symbol < 1 || symbol > K + 1) {
    throw InputError("scalar_decode: symbol out of range");
  }
  if (symbol == K + 1) return 0.0;
  return (-0.5 * (K + 1) + symbol) * delta;
}

std::int64_t vector_encode(const Vector& y, const BinState& bins,
                           const std::vector<int>& K) {
  const int n = bins.size();
  if (y.size() != n || static_cast<int>(K.size()) != n) {
    throw InputError("vector_encode: component count mismatch");
  }
  symbol_space(K);
  std::int64_t index = 0;
  for (int i = 0; i < n; ++i) {
    const int qi = scalar_encode(y(i), bins.delta(i), K[i]);
    if (qi == K[i] + 1) return 0;
    index = index * K[i] + (qi - 1);
  }
  return index + 1;
}

Vector vector_decode(std::int64_t symbol, const BinState& bins,
                     const std::vector<int>& K) {
  const int n = bins.size();
  if (static_cast<int>(K.size()) != n) {
    throw InputError("vector_decode: component count mismatch");
  }
  const std::int64_t space = symbol_space(K);
  if (symbol < 0 || symbol > space) {
    throw InputError("vector_decode: symbol out of range");
  }
  if (symbol == 0) return Vector::Zero(n);
  std::int64_t t = symbol - 1;
  Vector out(n);
  for (int i = n - 1; i >= 0; --i) {
    const int qi = static_cast<int>(t % K[i]) + 1;
    t /= K[i];
    out(i) = scalar_decode(qi, bins.delta(i), K[i]);
  }
  return out;
}

BinState update_bins(std::int64_t symbol, const BinState& bins,
                     const ZoomParams& zoom, double lam_abs) {
  return update_bins(symbol, bins, zoom,
                     Vector::Constant(bins.size(), lam_abs));
}

BinState update_bins(std::int64_t symbol, const BinState& bins,
                     const ZoomParams& zoom, const Vector& lam_abs) {
  const int n = bins.size();
  if (lam_abs.size() != n) {
    throw InputError("update_bins: lam_abs length mismatch");
  }
  if (zoom.L.size() != n) {
    throw ConfigError("update_bins: zoom.L not initialized for this state");
  }
  for (int i = 0; i < n; ++i) {
    if (!(lam_abs(i) > 1.0)) {
      throw InputError("update_bins: |lambda| must exceed 1");
    }
  }
  BinState next = bins;
  if (bins.lattice) {
    for (int i = 0; i < n; ++i) {
      LatticeExponents exps = lattice_exponents_for(zoom, lam_abs(i), bins.ell);
      std::int64_t& e = next.lattice_exponents[i];
      if (symbol == 0) {
        e += exps.grow;
      } else if (!(bins.delta(i) <= zoom.L(i))) {
        e += exps.shrink;
      }
      next.delta(i) = lattice_delta(e, bins.ell);
    }
    return next;
  }
  for (int i = 0; i < n; ++i) {
    if (symbol == 0) {
      next.delta(i) = bins.delta(i) * zoom.grow_factor(lam_abs(i));
    } else if (bins.delta(i) <= zoom.L(i)) {
      // at or below the hold threshold: bin size unchanged
    } else {
      next.delta(i) = bins.delta(i) * zoom.shrink_factor(lam_abs(i));
    }
  }
  return next;
}

BinInit init_bins(double delta1, int n, BinMode mode, const ZoomParams& zoom) {
  zoom.validate();
  if (!(delta1 > 0.0)) throw InputError("init_bins: delta1 must be positive");
  if (n < 1) throw InputError("init_bins: n must be positive");
  if (mode == BinMode::kComplex && n % 2 != 0) {
    throw InputError("init_bins: complex mode requires even n");
  }
  BinInit out;
  out.bins.delta.resize(n);
  for (int i = 0; i < n; ++i) {
    const int level = (mode == BinMode::kReal) ? i : i / 2;
    out.bins.delta(i) = delta1 * std::pow(zoom.delta_ratio, level);
  }
  out.zoom = zoom;
  out.zoom.L = zoom.floor_scale * out.bins.delta;
  return out;
}

LatticeExponents lattice_exponents_for(const ZoomParams& zoom, double lam_abs,
                                       double ell) {
  if (!(ell > 0.0)) throw InputError("lattice exponents: ell must be positive");
  const double qg = std::log2(zoom.grow_factor(lam_abs)) / ell;
  const double qs = std::log2(zoom.shrink_factor(lam_abs)) / ell;
  if (!nearly_integer(qg) || !nearly_integer(qs)) {
    throw ConfigError(
        "zoom parameters are not on the log2 lattice; run snap_to_lattice");
  }
  return {static_cast<std::int64_t>(std::llround(qg)),
          static_cast<std::int64_t>(std::llround(qs))};
}

BinState snap_bins_to_lattice(const BinState& bins, double ell) {
  if (!(ell > 0.0)) {
    throw InputError("snap_bins_to_lattice: ell must be positive");
  }
  BinState out = bins;
  out.lattice = true;
  out.ell = ell;
  out.lattice_exponents.resize(bins.size());
  for (int i = 0; i < bins.size(); ++i) {
    if (!(bins.delta(i) > 0.0)) {
      throw InputError("snap_bins_to_lattice: bin sizes must be positive");
    }
    const auto e = std::llround(std::log2(bins.delta(i)) / ell);
    out.lattice_exponents[i] = e;
    out.delta(i) = lattice_delta(e, ell);
  }
  return out;
}

ZoomParams snap_to_lattice(const ZoomParams& zoom, double lam_abs,
                           double ell) {
  zoom.validate();
  if (!(lam_abs > 1.0)) {
    throw InputError("snap_to_lattice: |lambda| must exceed 1");
  }
  if (!(ell > 0.0)) throw InputError("snap_to_lattice: ell must be positive");

  const double qg0 = std::log2(zoom.grow_factor(lam_abs)) / ell;
  const double qs0 = std::log2(zoom.shrink_factor(lam_abs)) / ell;
  if (nearly_integer(qg0) && nearly_integer(qs0)) {
    const auto a = std::llround(qg0);
    const auto b = std::llround(qs0);
    if (a > 0 && b < 0 && std::gcd(a, -b) == 1) return zoom;
  }

  const double diff0 = zoom.epsilon - zoom.eta;
  constexpr double kMaxRelChange = 0.10;
  double best_cost = std::numeric_limits<double>::infinity();
  ZoomParams best = zoom;
  bool found = false;

  const auto a0 = std::llround(qg0);
  const auto b0 = std::llround(qs0);
  for (std::int64_t a = a0 - 6; a <= a0 + 6; ++a) {
    const double rho = std::exp2(static_cast<double>(a) * ell) / lam_abs;
    if (!(rho > 1.0)) continue;
    const double rho_change = std::abs(rho - zoom.rho) / zoom.rho;
    if (rho_change > kMaxRelChange) continue;
    for (std::int64_t b = b0 - 6; b <= b0 + 6; ++b) {
      if (b >= 0) continue;
      if (std::gcd(a, -b) != 1) continue;
      // shrink = lam / (lam + eps - eta) = 2^(b ell)
      const double diff =
          lam_abs * (std::exp2(-static_cast<double>(b) * ell) - 1.0);
      const double scale = diff / diff0;
      const double eps_change = std::abs(scale - 1.0);
      if (eps_change > kMaxRelChange) continue;
      const double cost = rho_change * rho_change + eps_change * eps_change;
      if (cost < best_cost) {
        best_cost = cost;
        best = zoom;
        best.rho = rho;
        best.epsilon = zoom.epsilon * scale;
        best.eta = zoom.eta * scale;
        found = true;
      }
    }
  }
  if (!found) {
    throw ConfigError(
        "snap_to_lattice: no coprime exponent pair within 10% of the given "
        "parameters");
  }
  best.validate();
  return best;
}

}  // namespace zoomctl
