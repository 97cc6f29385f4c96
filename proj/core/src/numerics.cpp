#include "zoomctl/numerics.hpp"

#include <cmath>

namespace zoomctl {

int numeric_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  const double cutoff = rel_tol * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) ++rank;
  }
  return rank;
}

bool is_symmetric_psd(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol * scale;
}

Matrix psd_sqrt(const Matrix& sigma) {
  if (!is_symmetric_psd(sigma)) {
    throw InputError("psd_sqrt: matrix is not symmetric PSD");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal();
}

double normal_upper_quantile(double p) {
  if (!(p > 0.0 && p < 0.5)) {
    throw InputError("normal_upper_quantile: p must be in (0, 0.5)");
  }
  // Newton iterations on the survival function, seeded by a log bound.
  double z = std::sqrt(-2.0 * std::log(p));
  for (int it = 0; it < 60; ++it) {
    const double surv = 0.5 * std::erfc(z / std::sqrt(2.0));
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    if (pdf <= 0.0) break;
    const double step = (surv - p) / pdf;
    z += step;
    if (std::abs(step) < 1e-13 * std::max(1.0, std::abs(z))) break;
  }
  return z;
}

}  // namespace zoomctl
