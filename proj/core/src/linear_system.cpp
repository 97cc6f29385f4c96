#include "zoomctl/linear_system.hpp"

#include <Eigen/Eigenvalues>

namespace zoomctl {

namespace {

void require_psd(const Matrix& m, const std::string& label) {
  if (m.rows() != m.cols()) {
    throw InputError(label + " must be square");
  }
  if (!is_symmetric_psd(m)) {
    throw InputError(label + " must be symmetric positive semidefinite");
  }
}

}  // namespace

LinearSystem::LinearSystem(Matrix A_in, Matrix B_in, std::vector<Matrix> C_in,
                           Matrix Sigma_w_in, std::vector<Matrix> Sigma_v_in,
                           Vector mu_x0_in, Matrix Sigma_x0_in)
    : A(std::move(A_in)),
      B(std::move(B_in)),
      C(std::move(C_in)),
      Sigma_w(std::move(Sigma_w_in)),
      Sigma_v(std::move(Sigma_v_in)),
      mu_x0(std::move(mu_x0_in)),
      Sigma_x0(std::move(Sigma_x0_in)) {
  if (A.rows() != A.cols()) throw InputError("A must be square");
  const Eigen::Index dim = A.rows();
  if (dim == 0) throw InputError("state dimension must be positive");
  if (B.rows() != dim) throw InputError("B row count must match A");
  if (B.cols() == 0) throw InputError("B must have at least one column");
  if (C.empty()) throw InputError("at least one sensor is required");
  if (Sigma_v.size() != C.size()) {
    throw InputError("one observation covariance per sensor is required");
  }
  for (std::size_t j = 0; j < C.size(); ++j) {
    if (C[j].cols() != dim) {
      throw InputError("sensor " + std::to_string(j) +
                       ": column count must match A");
    }
    if (C[j].rows() == 0) {
      throw InputError("sensor " + std::to_string(j) + ": empty C matrix");
    }
    if (Sigma_v[j].rows() != C[j].rows()) {
      throw InputError("sensor " + std::to_string(j) +
                       ": Sigma_v dimension must match C rows");
    }
    require_psd(Sigma_v[j], "Sigma_v[" + std::to_string(j) + "]");
  }
  if (Sigma_w.rows() != dim) throw InputError("Sigma_w must be n x n");
  require_psd(Sigma_w, "Sigma_w");
  if (mu_x0.size() != dim) throw InputError("mu_x0 must have length n");
  if (Sigma_x0.rows() != dim) throw InputError("Sigma_x0 must be n x n");
  require_psd(Sigma_x0, "Sigma_x0");
}

namespace {

std::vector<Matrix> identity_sensor_covariances(const std::vector<Matrix>& C) {
  std::vector<Matrix> out;
  out.reserve(C.size());
  for (const auto& Cj : C) {
    out.push_back(Matrix::Identity(Cj.rows(), Cj.rows()));
  }
  return out;
}

}  // namespace

LinearSystem::LinearSystem(Matrix A_in, Matrix B_in, std::vector<Matrix> C_in)
    : LinearSystem(A_in, std::move(B_in), C_in,
                   Matrix::Identity(A_in.rows(), A_in.rows()),
                   identity_sensor_covariances(C_in),
                   Vector::Zero(A_in.rows()),
                   Matrix::Identity(A_in.rows(), A_in.rows())) {}

int LinearSystem::sensor_dim(int sensor) const {
  if (sensor < 0 || sensor >= sensor_count()) {
    throw InputError("sensor index out of range");
  }
  return static_cast<int>(C[sensor].rows());
}

int LinearSystem::total_sensor_dim() const {
  int total = 0;
  for (const auto& Cj : C) total += static_cast<int>(Cj.rows());
  return total;
}

Matrix LinearSystem::stacked_C() const {
  Matrix out(total_sensor_dim(), n());
  Eigen::Index row = 0;
  for (const auto& Cj : C) {
    out.middleRows(row, Cj.rows()) = Cj;
    row += Cj.rows();
  }
  return out;
}

Matrix LinearSystem::stacked_Sigma_v() const {
  const int p = total_sensor_dim();
  Matrix out = Matrix::Zero(p, p);
  Eigen::Index row = 0;
  for (const auto& Sj : Sigma_v) {
    out.block(row, row, Sj.rows(), Sj.cols()) = Sj;
    row += Sj.rows();
  }
  return out;
}

Vector step(const LinearSystem& sys, const Vector& x, const Vector& u,
            const Vector& w) {
  if (x.size() != sys.n() || w.size() != sys.n() ||
      u.size() != sys.input_dim()) {
    throw InputError("step: dimension mismatch");
  }
  return sys.A * x + sys.B * u + w;
}

Vector observe(const LinearSystem& sys, int sensor, const Vector& x,
               const Vector& v) {
  if (sensor < 0 || sensor >= sys.sensor_count()) {
    throw InputError("observe: sensor index out of range");
  }
  const Matrix& Cj = sys.C[sensor];
  if (x.size() != sys.n() || v.size() != Cj.rows()) {
    throw InputError("observe: dimension mismatch");
  }
  return Cj * x + v;
}

Matrix observability_matrix(const Matrix& C, const Matrix& A) {
  if (A.rows() != A.cols() || C.cols() != A.rows()) {
    throw InputError("observability_matrix: dimension mismatch");
  }
  const Eigen::Index n = A.rows();
  const Eigen::Index p = C.rows();
  Matrix out(n * p, n);
  Matrix block = C;
  for (Eigen::Index k = 0; k < n; ++k) {
    out.middleRows(k * p, p) = block;
    if (k + 1 < n) block = block * A;
  }
  return out;
}

Matrix controllability_matrix(const Matrix& A, const Matrix& B) {
  if (A.rows() != A.cols() || B.rows() != A.rows()) {
    throw InputError("controllability_matrix: dimension mismatch");
  }
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  Matrix out(n, n * m);
  Matrix block = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    out.middleCols(k * m, m) = block;
    if (k + 1 < n) block = A * block;
  }
  return out;
}

AssumptionReport check_assumptions(const LinearSystem& sys) {
  AssumptionReport report;
  report.state_dim = sys.n();
  const int n = sys.n();

  report.controllable =
      numeric_rank(controllability_matrix(sys.A, sys.B)) == n;
  report.jointly_observable =
      numeric_rank(observability_matrix(sys.stacked_C(), sys.A)) == n;
  report.per_sensor_observable.reserve(sys.C.size());
  for (const auto& Cj : sys.C) {
    report.per_sensor_observable.push_back(
        numeric_rank(observability_matrix(Cj, sys.A)) == n);
  }

  Eigen::EigenSolver<Matrix> es(sys.A);
  report.all_modes_unstable = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lam = es.eigenvalues()(i);
    if (std::abs(lam) > 1.0) {
      report.unstable_eigenvalues.push_back(lam);
    } else {
      report.all_modes_unstable = false;
    }
  }
  return report;
}

}  // namespace zoomctl
