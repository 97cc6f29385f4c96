#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace zoomctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Bad call arguments (dimension mismatch, out-of-range symbol, NaN input).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid scenario / parameter configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Rank or model-structure failure (observability, controllability, ...).
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// System shape the library deliberately refuses to handle.
class UnsupportedSystemError : public StructuralError {
 public:
  using StructuralError::StructuralError;
};

/// Non-finite values or magnitude blow-up at run time.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failures while emitting results.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Singular values below kRankTol * sigma_max count as zero.
inline constexpr double kRankTol = 1e-9;
// Symmetric matrices with min eigenvalue >= -kPsdTol * scale pass as PSD.
inline constexpr double kPsdTol = 1e-9;
// Relative tolerance for structural zero patterns (Jordan, block triangular).
inline constexpr double kStructureTol = 1e-9;

int numeric_rank(const Matrix& m, double rel_tol = kRankTol);

bool is_symmetric_psd(const Matrix& m, double tol = kPsdTol);

/// Factor S of a PSD matrix with S * S^T = sigma (eigenvalue based; negative
/// eigenvalues within tolerance are clamped to zero).
Matrix psd_sqrt(const Matrix& sigma);

/// Standard normal upper-quantile: z with P(N(0,1) > z) = p, p in (0, 0.5).
double normal_upper_quantile(double p);

}  // namespace zoomctl
