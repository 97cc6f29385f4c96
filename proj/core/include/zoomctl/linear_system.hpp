#pragma once

#include <complex>
#include <vector>

#include "zoomctl/numerics.hpp"

namespace zoomctl {

/// Discrete-time LTI plant with multiple sensors and Gaussian noise:
///   x_{t+1} = A x_t + B u_t + w_t,   y^j_t = C^j x_t + v^j_t.
///
/// All covariance matrices are validated symmetric PSD at construction;
/// value-type, immutable after construction, safe to share between trials.
struct LinearSystem {
  Matrix A;
  Matrix B;
  std::vector<Matrix> C;        // one observation matrix per sensor
  Matrix Sigma_w;               // plant noise covariance
  std::vector<Matrix> Sigma_v;  // per-sensor observation noise covariance
  Vector mu_x0;                 // initial state mean
  Matrix Sigma_x0;              // initial state covariance

  LinearSystem(Matrix A_in, Matrix B_in, std::vector<Matrix> C_in,
               Matrix Sigma_w_in, std::vector<Matrix> Sigma_v_in,
               Vector mu_x0_in, Matrix Sigma_x0_in);

  /// Convenience constructor with identity noise covariances and
  /// standard-normal initial state.
  LinearSystem(Matrix A_in, Matrix B_in, std::vector<Matrix> C_in);

  int n() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
  int sensor_count() const { return static_cast<int>(C.size()); }
  int sensor_dim(int sensor) const;
  int total_sensor_dim() const;

  /// Stacked [C^0; C^1; ...] across all sensors.
  Matrix stacked_C() const;
  /// Block-diagonal observation covariance matching stacked_C().
  Matrix stacked_Sigma_v() const;
};

/// One plant step: A x + B u + w.
Vector step(const LinearSystem& sys, const Vector& x, const Vector& u,
            const Vector& w);

/// Sensor reading: C^sensor x + v. Sensor index is zero based.
Vector observe(const LinearSystem& sys, int sensor, const Vector& x,
               const Vector& v);

/// Stacked [C; CA; ...; CA^{n-1}], n = A.rows().
Matrix observability_matrix(const Matrix& C, const Matrix& A);

/// Stacked [B, AB, ..., A^{n-1}B].
Matrix controllability_matrix(const Matrix& A, const Matrix& B);

struct AssumptionReport {
  bool controllable = false;
  bool jointly_observable = false;
  std::vector<bool> per_sensor_observable;
  std::vector<std::complex<double>> unstable_eigenvalues;  // |lambda| > 1
  // The coding policy requires every mode strictly unstable; systems mixing
  // stable and unstable modes are reported and rejected upstream.
  bool all_modes_unstable = false;
  int state_dim = 0;
  bool ok() const {
    return controllable && jointly_observable && all_modes_unstable;
  }
};

/// Rank-based controllability / joint observability report. Pure: identical
/// systems yield identical reports.
AssumptionReport check_assumptions(const LinearSystem& sys);

}  // namespace zoomctl
