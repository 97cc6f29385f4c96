#include "zoomctl/transforms.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace zoomctl {

namespace {

Matrix matrix_power(const Matrix& A, int k) {
  Matrix out = Matrix::Identity(A.rows(), A.cols());
  for (int i = 0; i < k; ++i) out = out * A;
  return out;
}

struct JordanUnit {
  int offset;
  int size;  // 1 (real eigenvalue) or 2 (complex pair)
  double a;
  double b;  // 0 for real units
};

// Parses the block layout of a structural real Jordan matrix. Returns an
// empty optional when M does not have the required shape.
std::optional<std::vector<JordanBlock>> parse_jordan_blocks(const Matrix& M,
                                                            double rel_tol) {
  if (M.rows() != M.cols() || M.rows() == 0) return std::nullopt;
  const int n = static_cast<int>(M.rows());
  const double tol = rel_tol * std::max(1.0, M.cwiseAbs().maxCoeff());
  const auto near = [tol](double x, double y) { return std::abs(x - y) <= tol; };

  std::vector<JordanUnit> units;
  for (int i = 0; i < n;) {
    if (i + 1 < n && std::abs(M(i + 1, i)) > tol) {
      const double a = M(i, i);
      const double b = M(i, i + 1);
      if (!near(M(i + 1, i + 1), a) || !near(M(i + 1, i), -b)) {
        return std::nullopt;
      }
      units.push_back({i, 2, a, b});
      i += 2;
    } else {
      units.push_back({i, 1, M(i, i), 0.0});
      i += 1;
    }
  }

  // Any nonzero outside the unit diagonal must be an identity coupling
  // between adjacent units of identical eigenvalue.
  std::vector<bool> coupled(units.size(), false);
  for (std::size_t u = 0; u + 1 < units.size(); ++u) {
    const auto& cur = units[u];
    const auto& nxt = units[u + 1];
    const Matrix coupling = M.block(cur.offset, nxt.offset, cur.size, nxt.size);
    if (coupling.cwiseAbs().maxCoeff() <= tol) continue;
    if (cur.size != nxt.size || !near(cur.a, nxt.a) || !near(cur.b, nxt.b)) {
      return std::nullopt;
    }
    const Matrix eye = Matrix::Identity(cur.size, cur.size);
    if ((coupling - eye).cwiseAbs().maxCoeff() > tol) return std::nullopt;
    coupled[u] = true;
  }
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (std::size_t v = 0; v < units.size(); ++v) {
      if (u == v || (v == u + 1)) continue;
      const Matrix blk = M.block(units[u].offset, units[v].offset,
                                 units[u].size, units[v].size);
      if (blk.cwiseAbs().maxCoeff() > tol) return std::nullopt;
    }
  }

  std::vector<JordanBlock> blocks;
  for (std::size_t u = 0; u < units.size();) {
    JordanBlock blk;
    blk.offset = units[u].offset;
    blk.complex_pair = units[u].size == 2;
    blk.lam_abs = std::hypot(units[u].a, units[u].b);
    int size = units[u].size;
    std::size_t v = u;
    while (v + 1 < units.size() && coupled[v]) {
      ++v;
      size += units[v].size;
    }
    blk.size = size;
    blocks.push_back(blk);
    u = v + 1;
  }
  return blocks;
}

struct EigenPair {
  std::complex<double> lam;
  int column;         // representative column in the eigenvector matrix
  bool complex_pair;  // uses two real columns
};

// Route 2: diagonalizable matrices via the eigensolver; returns nullopt when
// the eigenbasis is numerically rank deficient or reconstruction fails.
std::optional<RealJordanForm> jordan_from_eigensolver(const Matrix& A) {
  const int n = static_cast<int>(A.rows());
  Eigen::EigenSolver<Matrix> es(A);
  if (es.info() != Eigen::Success) return std::nullopt;
  const auto& vals = es.eigenvalues();
  const auto& vecs = es.eigenvectors();
  const double im_tol = 1e-9 * std::max(1.0, vals.cwiseAbs().maxCoeff());

  std::vector<bool> used(n, false);
  std::vector<EigenPair> pairs;
  for (int i = 0; i < n; ++i) {
    if (used[i]) continue;
    used[i] = true;
    if (std::abs(vals(i).imag()) <= im_tol) {
      pairs.push_back({std::complex<double>(vals(i).real(), 0.0), i, false});
      continue;
    }
    int partner = -1;
    for (int j = i + 1; j < n; ++j) {
      if (used[j]) continue;
      if (std::abs(vals(j) - std::conj(vals(i))) <=
          1e-6 * std::max(1.0, std::abs(vals(i)))) {
        partner = j;
        break;
      }
    }
    if (partner < 0) return std::nullopt;
    used[partner] = true;
    const int rep = vals(i).imag() > 0.0 ? i : partner;
    pairs.push_back({vals(rep), rep, true});
  }

  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const EigenPair& x, const EigenPair& y) {
                     const double ax = std::abs(x.lam);
                     const double ay = std::abs(y.lam);
                     if (ax != ay) return ax > ay;
                     if (x.lam.real() != y.lam.real()) {
                       return x.lam.real() > y.lam.real();
                     }
                     return x.lam.imag() > y.lam.imag();
                   });

  Matrix V(n, n);
  Matrix J = Matrix::Zero(n, n);
  std::vector<JordanBlock> blocks;
  int col = 0;
  for (const auto& p : pairs) {
    if (!p.complex_pair) {
      Vector v = vecs.col(p.column).real();
      // A real eigenvalue can surface with an arbitrary complex phase.
      if (v.norm() < 0.5 * vecs.col(p.column).norm()) {
        v = vecs.col(p.column).imag();
      }
      const double norm = v.norm();
      if (norm <= 0.0) return std::nullopt;
      V.col(col) = v / norm;
      J(col, col) = p.lam.real();
      blocks.push_back({col, 1, false, std::abs(p.lam.real())});
      col += 1;
    } else {
      Vector u = vecs.col(p.column).real();
      Vector w = vecs.col(p.column).imag();
      const double norm = std::sqrt(u.squaredNorm() + w.squaredNorm());
      if (norm <= 0.0) return std::nullopt;
      V.col(col) = u / norm;
      V.col(col + 1) = w / norm;
      const double a = p.lam.real();
      const double b = p.lam.imag();
      J(col, col) = a;
      J(col, col + 1) = b;
      J(col + 1, col) = -b;
      J(col + 1, col + 1) = a;
      blocks.push_back({col, 2, true, std::abs(p.lam)});
      col += 2;
    }
  }

  Eigen::JacobiSVD<Matrix> svd(V);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= kRankTol * sv(0)) return std::nullopt;

  RealJordanForm out;
  out.P = V.partialPivLu().inverse();
  out.J = std::move(J);
  out.blocks = std::move(blocks);
  const double scale = std::max(1.0, A.norm());
  if ((out.P * A * V - out.J).norm() > 1e-9 * scale) return std::nullopt;
  return out;
}

// Route 3: block-diagonal matrices whose diagonal blocks are upper-triangular
// Toeplitz in the (scalar or rotation-scale) eigenvalue -- the shape powers
// of defective real Jordan matrices take. A nilpotent chain rebuilds the unit
// superdiagonal.
std::optional<RealJordanForm> jordan_from_toeplitz_chain(const Matrix& A) {
  const int n = static_cast<int>(A.rows());
  const double tol = kStructureTol * std::max(1.0, A.cwiseAbs().maxCoeff());

  // Contiguous connected components of the nonzero pattern.
  std::vector<int> component(n, -1);
  int comp_count = 0;
  for (int i = 0; i < n; ++i) {
    if (component[i] >= 0) continue;
    const int c = comp_count++;
    component[i] = c;
    int hi = i;
    for (int j = i; j <= hi && j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        if (std::abs(A(j, k)) > tol || std::abs(A(k, j)) > tol) {
          if (k < i) return std::nullopt;  // non-contiguous component
          hi = std::max(hi, k);
        }
      }
      component[j] = c;
    }
    for (int j = i; j <= hi; ++j) component[j] = c;
    i = hi;
  }

  Matrix P = Matrix::Zero(n, n);
  Matrix J = Matrix::Zero(n, n);
  std::vector<JordanBlock> blocks;

  int start = 0;
  while (start < n) {
    int end = start;
    while (end + 1 < n && component[end + 1] == component[start]) ++end;
    const int d = end - start + 1;
    const Matrix B = A.block(start, start, d, d);

    const bool complex_unit = d >= 2 && std::abs(B(1, 0)) > tol;
    const int unit = complex_unit ? 2 : 1;
    if (d % unit != 0) return std::nullopt;
    const int chain_len = d / unit;

    Matrix D(unit, unit);
    if (complex_unit) {
      D << B(0, 0), B(0, 1), B(1, 0), B(1, 1);
      if (std::abs(D(0, 0) - D(1, 1)) > tol ||
          std::abs(D(0, 1) + D(1, 0)) > tol) {
        return std::nullopt;
      }
    } else {
      D << B(0, 0);
    }
    // All diagonal units must repeat D; everything below them must vanish.
    Matrix Dstack = Matrix::Zero(d, d);
    for (int k = 0; k < chain_len; ++k) {
      const Matrix Dk = B.block(k * unit, k * unit, unit, unit);
      if ((Dk - D).cwiseAbs().maxCoeff() > tol) return std::nullopt;
      Dstack.block(k * unit, k * unit, unit, unit) = D;
    }
    const Matrix Nil = B - Dstack;
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) {
        if (c / unit <= r / unit && std::abs(Nil(r, c)) > tol) {
          return std::nullopt;  // nilpotent part must be strictly block upper
        }
      }
    }

    // Chain columns u_k = Nil * u_{k+1}, seeded with the trailing unit
    // vectors.
    Matrix U(d, d);
    U.rightCols(unit) = Matrix::Zero(d, unit);
    U.block(d - unit, d - unit, unit, unit) = Matrix::Identity(unit, unit);
    for (int k = chain_len - 2; k >= 0; --k) {
      U.middleCols(k * unit, unit) = Nil * U.middleCols((k + 1) * unit, unit);
    }
    Eigen::JacobiSVD<Matrix> svd(U);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= kRankTol * sv(0)) return std::nullopt;

    Matrix Jb = Matrix::Zero(d, d);
    for (int k = 0; k < chain_len; ++k) {
      Jb.block(k * unit, k * unit, unit, unit) = D;
      if (k + 1 < chain_len) {
        Jb.block(k * unit, (k + 1) * unit, unit, unit) =
            Matrix::Identity(unit, unit);
      }
    }
    const Matrix Pb = U.partialPivLu().inverse();
    if ((Pb * B * U - Jb).cwiseAbs().maxCoeff() >
        1e-9 * std::max(1.0, B.cwiseAbs().maxCoeff())) {
      return std::nullopt;
    }

    P.block(start, start, d, d) = Pb;
    J.block(start, start, d, d) = Jb;
    blocks.push_back({start, d, complex_unit,
                      complex_unit ? std::hypot(D(0, 0), D(0, 1))
                                   : std::abs(D(0, 0))});
    start = end + 1;
  }

  RealJordanForm out;
  out.P = std::move(P);
  out.J = std::move(J);
  out.blocks = std::move(blocks);
  return out;
}

}  // namespace

Vector RealJordanForm::lam_abs_per_component() const {
  int n = 0;
  for (const auto& b : blocks) n += b.size;
  Vector out(n);
  for (const auto& b : blocks) {
    out.segment(b.offset, b.size).setConstant(b.lam_abs);
  }
  return out;
}

RealJordanForm power_jordan(const RealJordanForm& jordan, int power) {
  const int n = static_cast<int>(jordan.J.rows());
  const Matrix Jpow = matrix_power(jordan.J, power);
  RealJordanForm out;
  out.P = Matrix::Zero(n, n);
  out.J = Matrix::Zero(n, n);
  for (const auto& b : jordan.blocks) {
    const Matrix sub = Jpow.block(b.offset, b.offset, b.size, b.size);
    RealJordanForm local = to_real_jordan(sub);
    out.P.block(b.offset, b.offset, b.size, b.size) = local.P;
    out.J.block(b.offset, b.offset, b.size, b.size) = local.J;
    for (auto lb : local.blocks) {
      lb.offset += b.offset;
      out.blocks.push_back(lb);
    }
  }
  out.P = (out.P * jordan.P).eval();
  return out;
}

bool is_real_jordan_form(const Matrix& M, double rel_tol) {
  return parse_jordan_blocks(M, rel_tol).has_value();
}

RealJordanForm to_real_jordan(const Matrix& A) {
  if (A.rows() != A.cols() || A.rows() == 0) {
    throw InputError("to_real_jordan: matrix must be square and nonempty");
  }
  if (auto blocks = parse_jordan_blocks(A, kStructureTol)) {
    RealJordanForm out;
    out.P = Matrix::Identity(A.rows(), A.cols());
    out.J = A;
    out.blocks = std::move(*blocks);
    return out;
  }
  if (auto form = jordan_from_eigensolver(A)) return std::move(*form);
  if (auto form = jordan_from_toeplitz_chain(A)) return std::move(*form);
  throw UnsupportedSystemError(
      "to_real_jordan: matrix is defective and not in a recognizable form; "
      "supply an explicit transform");
}

RealJordanForm to_real_jordan(const Matrix& A, const Matrix& user_P) {
  if (A.rows() != A.cols() || user_P.rows() != A.rows() ||
      user_P.cols() != A.cols()) {
    throw InputError("to_real_jordan: transform dimensions must match A");
  }
  Eigen::PartialPivLU<Matrix> lu(user_P);
  const Matrix J = user_P * A * lu.inverse();
  auto blocks = parse_jordan_blocks(J, 1e-6);
  if (!blocks) {
    throw ConfigError(
        "to_real_jordan: supplied transform does not produce a real Jordan "
        "form");
  }
  RealJordanForm out;
  out.P = user_P;
  out.J = J;
  out.blocks = std::move(*blocks);
  return out;
}

SampledSystem build_sampled_system(const LinearSystem& sys,
                                   const std::vector<int>& sensors,
                                   EstimatorKind estimator,
                                   const std::optional<Matrix>& user_P) {
  const int n = sys.n();
  std::vector<int> picked = sensors;
  if (picked.empty()) {
    picked.resize(sys.sensor_count());
    std::iota(picked.begin(), picked.end(), 0);
  }
  int p = 0;
  for (int j : picked) p += sys.sensor_dim(j);
  Matrix C_st(p, n);
  Matrix Sv_st = Matrix::Zero(p, p);
  {
    int row = 0;
    for (int j : picked) {
      const int pj = sys.sensor_dim(j);
      C_st.middleRows(row, pj) = sys.C[j];
      Sv_st.block(row, row, pj, pj) = sys.Sigma_v[j];
      row += pj;
    }
  }

  const Matrix O = observability_matrix(C_st, sys.A);
  if (numeric_rank(O) < n) {
    throw StructuralError(
        "build_sampled_system: stacked sensors are not observable");
  }

  SampledSystem samp;
  samp.n = n;
  samp.window_rows = n * p;

  // Estimator in original coordinates: E * O = I.
  if (estimator == EstimatorKind::kSubset) {
    std::vector<int> selected;
    Matrix sel_rows(0, n);
    for (int r = 0; r < O.rows() && static_cast<int>(selected.size()) < n;
         ++r) {
      Matrix candidate(sel_rows.rows() + 1, n);
      candidate.topRows(sel_rows.rows()) = sel_rows;
      candidate.bottomRows(1) = O.row(r);
      if (numeric_rank(candidate) > static_cast<int>(selected.size())) {
        sel_rows = std::move(candidate);
        selected.push_back(r);
      }
    }
    if (static_cast<int>(selected.size()) < n) {
      throw StructuralError(
          "build_sampled_system: could not select n independent rows");
    }
    const Matrix inv = sel_rows.partialPivLu().inverse();
    samp.estimator = Matrix::Zero(n, O.rows());
    for (int k = 0; k < n; ++k) samp.estimator.col(selected[k]) = inv.col(k);
  } else {
    samp.estimator = O.completeOrthogonalDecomposition().pseudoInverse();
  }
  if ((samp.estimator * O - Matrix::Identity(n, n)).norm() > 1e-8) {
    throw NumericError("build_sampled_system: estimator inversion failed");
  }

  // Plant-noise contribution to the observation window:
  // stage t sees C * sum_{i<t} A^{t-1-i} w_i.
  std::vector<Matrix> A_pows(2 * n);
  A_pows[0] = Matrix::Identity(n, n);
  for (int k = 1; k < 2 * n; ++k) A_pows[k] = sys.A * A_pows[k - 1];
  Matrix Gw = Matrix::Zero(n * p, std::max(0, (n - 1)) * n);
  for (int t = 1; t < n; ++t) {
    for (int i = 0; i < t; ++i) {
      Gw.block(t * p, i * n, p, n) = C_st * A_pows[t - 1 - i];
    }
  }
  samp.xi.clear();
  samp.zeta.clear();
  for (int i = 0; i + 1 < n; ++i) {
    samp.xi.push_back(samp.estimator * Gw.middleCols(i * n, n));
  }
  for (int i = 0; i < n; ++i) {
    samp.zeta.push_back(samp.estimator.middleCols(i * p, p));
  }

  samp.A_pow = matrix_power(sys.A, 2 * n);
  // Two-stage transform: Jordan-decompose A itself, then re-chain each
  // block's 2n-th power. Powers of defective blocks stay handled and the
  // block layout matches the unsampled spectrum.
  samp.jordan_base =
      user_P ? to_real_jordan(sys.A, *user_P) : to_real_jordan(sys.A);
  RealJordanForm base_coords;
  base_coords.P = Matrix::Identity(n, n);
  base_coords.J = samp.jordan_base.J;
  base_coords.blocks = samp.jordan_base.blocks;
  const RealJordanForm pw = power_jordan(base_coords, 2 * n);
  samp.local_transform = pw.P;
  samp.jordan.P = pw.P * samp.jordan_base.P;
  samp.jordan.J = pw.J;
  samp.jordan.blocks = pw.blocks;
  const Matrix& P = samp.jordan.P;

  Matrix Ww = Matrix::Zero(n, 2 * n * n);
  for (int i = 0; i < 2 * n; ++i) {
    Ww.middleCols(i * n, n) = A_pows[2 * n - 1 - i];
  }
  samp.window_noise_w = P * Ww;
  Matrix Ev_w = Matrix::Zero(n, std::max(0, (n - 1)) * n);
  for (std::size_t i = 0; i < samp.xi.size(); ++i) {
    Ev_w.middleCols(static_cast<int>(i) * n, n) = samp.xi[i];
  }
  samp.estimate_noise_w = P * Ev_w;
  samp.estimate_noise_v = P * samp.estimator;

  Matrix Sw_t = Matrix::Zero(n, n);
  for (int k = 0; k < 2 * n; ++k) {
    Sw_t += A_pows[k] * sys.Sigma_w * A_pows[k].transpose();
  }
  Matrix Sv_t = Matrix::Zero(n, n);
  for (const auto& xi : samp.xi) {
    Sv_t += xi * sys.Sigma_w * xi.transpose();
  }
  for (const auto& zeta : samp.zeta) {
    Sv_t += zeta * Sv_st * zeta.transpose();
  }
  Matrix Swv_t = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < samp.xi.size(); ++i) {
    Swv_t += A_pows[2 * n - 1 - static_cast<int>(i)] * sys.Sigma_w *
             samp.xi[i].transpose();
  }
  samp.Sigma_w_bar = P * Sw_t * P.transpose();
  samp.Sigma_v_bar = P * Sv_t * P.transpose();
  samp.Sigma_wv_bar = P * Swv_t * P.transpose();
  samp.x0_mean_bar = P * sys.mu_x0;
  samp.x0_cov_bar = P * sys.Sigma_x0 * P.transpose();

  Matrix joint(2 * n, 2 * n);
  joint.topLeftCorner(n, n) = samp.Sigma_w_bar;
  joint.topRightCorner(n, n) = samp.Sigma_wv_bar;
  joint.bottomLeftCorner(n, n) = samp.Sigma_wv_bar.transpose();
  joint.bottomRightCorner(n, n) = samp.Sigma_v_bar;
  if (!is_symmetric_psd(0.5 * (joint + joint.transpose()))) {
    throw NumericError(
        "build_sampled_system: assembled noise covariance is not PSD");
  }

  // Aggregate-control splitter over raw stages n..2n-1. Left empty for
  // uncontrollable pairs; realize_control reports the failure.
  const int m = sys.input_dim();
  Matrix Smap(n, n * m);
  for (int j = 0; j < n; ++j) {
    Smap.middleCols(j * m, m) = A_pows[n - 1 - j] * sys.B;
  }
  if (numeric_rank(Smap) == n) {
    samp.control_gains = Smap.completeOrthogonalDecomposition().pseudoInverse();
  }
  return samp;
}

Vector estimate_initial_state(const SampledSystem& samp,
                              const Vector& y_window) {
  if (y_window.size() != samp.window_rows) {
    throw InputError("estimate_initial_state: window length mismatch");
  }
  return samp.estimator * y_window;
}

Matrix realize_control(const LinearSystem& sys, const SampledSystem& samp,
                       const Vector& u_bar_desired) {
  const int n = samp.n;
  const int m = sys.input_dim();
  if (u_bar_desired.size() != n) {
    throw InputError("realize_control: aggregate input has wrong length");
  }
  if (samp.control_gains.size() == 0) {
    throw StructuralError("realize_control: (A, B) is not controllable");
  }
  const Vector u_tilde = samp.P().partialPivLu().solve(u_bar_desired);
  const Vector stacked = samp.control_gains * u_tilde;

  Vector achieved = Vector::Zero(n);
  Matrix out(m, n);
  Matrix A_pow = Matrix::Identity(n, n);
  std::vector<Matrix> pows(n);
  for (int k = 0; k < n; ++k) {
    pows[k] = A_pow;
    A_pow = sys.A * A_pow;
  }
  for (int j = 0; j < n; ++j) {
    out.col(j) = stacked.segment(j * m, m);
    achieved += pows[n - 1 - j] * sys.B * out.col(j);
  }
  if ((achieved - u_tilde).norm() > 1e-9 * std::max(1.0, u_tilde.norm())) {
    throw StructuralError(
        "realize_control: aggregate input is not reachable over one period");
  }
  return out;
}

}  // namespace zoomctl
