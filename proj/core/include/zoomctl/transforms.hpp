#pragma once

#include <optional>
#include <vector>

#include "zoomctl/linear_system.hpp"
#include "zoomctl/numerics.hpp"

namespace zoomctl {

/// One diagonal block of a real Jordan form.
struct JordanBlock {
  int offset = 0;       // first coordinate of the block
  int size = 0;         // number of real coordinates
  bool complex_pair = false;
  double lam_abs = 0.0;  // eigenvalue magnitude of the block
};

/// Real Jordan decomposition J = P A P^{-1}. Real eigenvalues give 1x1
/// diagonal entries (with unit superdiagonals inside a defective chain);
/// complex pairs a +- ib give 2x2 blocks [[a, b], [-b, a]].
struct RealJordanForm {
  Matrix P;
  Matrix J;
  std::vector<JordanBlock> blocks;

  Vector lam_abs_per_component() const;
};

/// Computes a real Jordan form. Three routes, tried in order:
///   1. A already structurally in real Jordan form: P = I, J = A.
///   2. A diagonalizable: eigenvector-based transform, blocks ordered by
///      decreasing eigenvalue magnitude.
///   3. A block-diagonal with upper-triangular Toeplitz blocks (the shape a
///      power of a defective Jordan matrix takes): nilpotent chain transform.
/// Anything else is refused with UnsupportedSystemError; pass an explicit
/// transform via the second overload for such systems.
RealJordanForm to_real_jordan(const Matrix& A);

/// Uses the supplied transform: J = P A P^{-1} must come out structurally in
/// real Jordan form or the call fails.
RealJordanForm to_real_jordan(const Matrix& A, const Matrix& user_P);

/// True when M is structurally a real Jordan matrix within tolerance.
bool is_real_jordan_form(const Matrix& M, double rel_tol = kStructureTol);

/// Real Jordan form of the k-th power of an already-decomposed matrix. Each
/// Jordan block is raised and re-chained independently, so block order and
/// coordinate grouping survive; the returned transform maps original
/// coordinates (P_out = T_local * P_in).
RealJordanForm power_jordan(const RealJordanForm& jordan, int power);

enum class EstimatorKind {
  kSubset,       // invert n independent rows of the observability stack
  kLeastSquares  // min-norm least squares over all stacked rows
};

/// The plant sampled every 2n stages, with the observation window collapsed
/// into a direct state estimate and the dynamics rotated into real Jordan
/// coordinates:
///   x_{s+1} = A_bar x_s + u_s + w_s,  y_s = x_s + v_s.
/// Noise covariances are expressed in the Jordan coordinates; w_s and v_s at
/// equal times are correlated through the shared plant noise.
struct SampledSystem {
  int n = 0;
  int window_rows = 0;            // stacked observation rows per window
  Matrix A_pow;                   // A^{2n} in original coordinates
  RealJordanForm jordan_base;     // of A itself
  Matrix local_transform;         // jordan.P = local_transform * jordan_base.P
  RealJordanForm jordan;          // of A_pow; jordan.J is the loop dynamics
  Matrix estimator;               // y window -> x0 estimate, original coords
  std::vector<Matrix> xi;         // plant-noise-to-estimate maps, i = 0..n-2
  std::vector<Matrix> zeta;       // obs-noise-to-estimate maps, i = 0..n-1
  Matrix Sigma_w_bar;
  Matrix Sigma_v_bar;
  Matrix Sigma_wv_bar;            // cross covariance E[w v^T]
  Vector x0_mean_bar;             // P * mu_x0
  Matrix x0_cov_bar;              // P Sigma_x0 P^T
  Matrix window_noise_w;          // raw [w_0..w_{2n-1}] stack -> w_bar (Jordan)
  Matrix estimate_noise_w;        // raw [w_0..w_{n-2}] stack -> v_bar (Jordan)
  Matrix estimate_noise_v;        // raw [v_0..v_{n-1}] stack -> v_bar (Jordan)
  Matrix control_gains;           // aggregate input (original) -> per-step u

  const Matrix& A_bar() const { return jordan.J; }
  const Matrix& P() const { return jordan.P; }
  Vector lam_abs() const { return jordan.lam_abs_per_component(); }
};

/// Builds the sampled system from the stacked listed sensors (all sensors
/// when empty). The estimator selects n independent rows of the stacked
/// observability matrix greedily, preferring earlier time stages so fewer
/// plant-noise terms enter the estimate; kLeastSquares uses every row
/// instead. An explicit Jordan transform for A^{2n} may be supplied.
SampledSystem build_sampled_system(
    const LinearSystem& sys, const std::vector<int>& sensors = {},
    EstimatorKind estimator = EstimatorKind::kSubset,
    const std::optional<Matrix>& user_P = std::nullopt);

/// Applies the estimator to one stacked observation window (length n in
/// time); returns the initial-state estimate in original coordinates.
Vector estimate_initial_state(const SampledSystem& samp,
                              const Vector& y_window);

/// Splits a desired aggregate control (given in sampled Jordan coordinates,
/// typically -A_bar * x_hat) into the n per-stage inputs applied over raw
/// stages n..2n-1. Returns an input_dim x n matrix, one column per stage.
/// The achieved aggregate matches to 1e-9 relative or the call fails.
Matrix realize_control(const LinearSystem& sys, const SampledSystem& samp,
                       const Vector& u_bar_desired);

}  // namespace zoomctl
