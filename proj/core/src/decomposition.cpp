#include "zoomctl/decomposition.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace zoomctl {

namespace {

std::vector<std::complex<double>> block_eigenvalues(const Matrix& block) {
  std::vector<std::complex<double>> out;
  if (block.rows() == 0) return out;
  Eigen::EigenSolver<Matrix> es(block, /*computeEigenvectors=*/false);
  out.reserve(block.rows());
  for (Eigen::Index i = 0; i < block.rows(); ++i) {
    out.push_back(es.eigenvalues()(i));
  }
  return out;
}

// Orthonormal basis of the row space (columns of the returned matrix).
Matrix row_space_basis(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return Matrix(m.cols(), 0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > kRankTol * sv(0)) ++rank;
  }
  return svd.matrixV().leftCols(rank);
}

}  // namespace

double DecompositionBlock::max_abs_eig() const {
  double out = 0.0;
  for (const auto& lam : eigenvalues) out = std::max(out, std::abs(lam));
  return out;
}

double DecompositionBlock::min_abs_eig() const {
  double out = std::numeric_limits<double>::infinity();
  for (const auto& lam : eigenvalues) out = std::min(out, std::abs(lam));
  return out;
}

BlockDecomposition build_block_decomposition(
    const LinearSystem& sys, const std::vector<int>& sensor_order) {
  const int n = sys.n();
  const int M = sys.sensor_count();
  std::vector<int> order = sensor_order;
  if (order.empty()) {
    order.resize(M);
    std::iota(order.begin(), order.end(), 0);
  }
  {
    std::vector<int> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> want(M);
    std::iota(want.begin(), want.end(), 0);
    if (sorted != want) {
      throw InputError(
          "build_block_decomposition: sensor_order must be a permutation of "
          "all sensors");
    }
  }

  // Claim independent rows sensor by sensor; the first processed sensor's
  // rows end up at the bottom of Q.
  std::vector<Matrix> claimed(M);   // rows claimed per processing position
  Matrix accumulated(0, n);
  std::vector<int> dims(M, 0);
  for (int pos = 0; pos < M; ++pos) {
    const Matrix O = observability_matrix(sys.C[order[pos]], sys.A);
    Matrix claimed_rows(0, n);
    int rank = numeric_rank(accumulated);
    for (int r = 0; r < O.rows(); ++r) {
      Matrix candidate(accumulated.rows() + 1, n);
      candidate.topRows(accumulated.rows()) = accumulated;
      candidate.bottomRows(1) = O.row(r);
      if (numeric_rank(candidate) > rank) {
        accumulated = std::move(candidate);
        ++rank;
        Matrix grown(claimed_rows.rows() + 1, n);
        grown.topRows(claimed_rows.rows()) = claimed_rows;
        grown.bottomRows(1) = O.row(r);
        claimed_rows = std::move(grown);
      }
    }
    dims[pos] = static_cast<int>(claimed_rows.rows());
    claimed[pos] = std::move(claimed_rows);
  }
  if (numeric_rank(accumulated) < n) {
    throw StructuralError(
        "build_block_decomposition: sensors are not jointly observable");
  }

  BlockDecomposition out;
  out.sensor_order = order;
  out.Q.resize(n, n);
  {
    int row = 0;
    for (int pos = M - 1; pos >= 0; --pos) {  // last processed on top
      if (dims[pos] == 0) continue;
      out.Q.middleRows(row, dims[pos]) = claimed[pos];
      row += dims[pos];
    }
  }
  const Matrix Q_inv = out.Q.partialPivLu().inverse();
  out.A_bar = out.Q * sys.A * Q_inv;
  out.C_bars.reserve(M);
  for (int j = 0; j < M; ++j) out.C_bars.push_back(sys.C[j] * Q_inv);

  {
    int offset = 0;
    for (int pos = M - 1; pos >= 0; --pos) {
      DecompositionBlock blk;
      blk.sensor = order[pos];
      blk.offset = offset;
      blk.dim = dims[pos];
      blk.eigenvalues =
          block_eigenvalues(out.A_bar.block(offset, offset, dims[pos], dims[pos]));
      offset += dims[pos];
      out.blocks.push_back(std::move(blk));
    }
  }

  // Structural residuals: entries below the block diagonal of A_bar, and the
  // column pattern of the stacked transformed sensor matrices.
  double below = 0.0;
  double coupling = 0.0;
  for (std::size_t bi = 0; bi < out.blocks.size(); ++bi) {
    const auto& rb = out.blocks[bi];
    for (std::size_t bj = 0; bj < bi; ++bj) {
      const auto& cb = out.blocks[bj];
      if (rb.dim == 0 || cb.dim == 0) continue;
      below = std::max(below, out.A_bar.block(rb.offset, cb.offset, rb.dim,
                                              cb.dim)
                                  .cwiseAbs()
                                  .maxCoeff());
    }
    for (std::size_t bj = bi + 1; bj < out.blocks.size(); ++bj) {
      const auto& cb = out.blocks[bj];
      if (rb.dim == 0 || cb.dim == 0) continue;
      coupling = std::max(coupling, out.A_bar.block(rb.offset, cb.offset,
                                                    rb.dim, cb.dim)
                                        .cwiseAbs()
                                        .maxCoeff());
    }
  }
  out.below_block_residual = below;

  double c_resid = 0.0;
  for (const auto& blk : out.blocks) {
    const Matrix& Cb = out.C_bars[blk.sensor];
    if (blk.offset > 0) {
      c_resid =
          std::max(c_resid, Cb.leftCols(blk.offset).cwiseAbs().maxCoeff());
    }
  }
  out.c_pattern_residual = c_resid;

  const double a_scale = std::max(1.0, out.A_bar.cwiseAbs().maxCoeff());
  out.decoupled = coupling <= kStructureTol * a_scale;
  if (below > kStructureTol * a_scale) {
    throw NumericError(
        "build_block_decomposition: triangular structure failed numerically");
  }
  return out;
}

EigenspaceAssignment check_eigenspace_assumption(const LinearSystem& sys) {
  const int n = sys.n();
  const int M = sys.sensor_count();
  EigenspaceAssignment out;
  out.jordan = to_real_jordan(sys.A);

  std::vector<Matrix> row_bases;
  std::vector<Matrix> obs;
  row_bases.reserve(M);
  obs.reserve(M);
  for (int j = 0; j < M; ++j) {
    obs.push_back(observability_matrix(sys.C[j], sys.A));
    row_bases.push_back(row_space_basis(obs.back()));
  }

  const auto& blocks = out.jordan.blocks;
  out.block_sensor.assign(blocks.size(), -1);
  out.coefficient_maps.resize(blocks.size());

  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const Matrix basis =
        out.jordan.P.middleRows(blocks[bi].offset, blocks[bi].size);
    for (int j = 0; j < M; ++j) {
      const Matrix& U = row_bases[j];
      bool contained = true;
      for (int r = 0; r < basis.rows(); ++r) {
        const Vector v = basis.row(r).transpose();
        const double resid = (v - U * (U.transpose() * v)).norm();
        if (resid > 1e-9 * std::max(1.0, v.norm())) {
          contained = false;
          break;
        }
      }
      if (!contained) continue;
      out.block_sensor[bi] = j;
      // Row-space coordinates: k with k * O_j = eigenvector row.
      auto cod = obs[j].transpose().completeOrthogonalDecomposition();
      Matrix coeff(basis.rows(), obs[j].rows());
      for (int r = 0; r < basis.rows(); ++r) {
        const Vector k = cod.solve(basis.row(r).transpose());
        if ((k.transpose() * obs[j] - basis.row(r)).norm() >
            1e-9 * std::max(1.0, basis.row(r).norm())) {
          throw NumericError(
              "check_eigenspace_assumption: coefficient solve failed");
        }
        coeff.row(r) = k.transpose();
      }
      out.coefficient_maps[bi] = std::move(coeff);
      break;
    }
    if (out.block_sensor[bi] < 0) {
      out.unassigned_blocks.push_back(static_cast<int>(bi));
    }
  }
  out.satisfied = out.unassigned_blocks.empty();
  if (!out.satisfied) return out;

  // Assignment transform: per-sensor groups of Jordan basis rows, highest
  // sensor index on top to match the triangular decomposition layout.
  out.Q.resize(n, n);
  int row = 0;
  for (int j = M - 1; j >= 0; --j) {
    int sensor_dim = 0;
    const int block_offset = row;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      if (out.block_sensor[bi] != j) continue;
      out.Q.middleRows(row, blocks[bi].size) =
          out.jordan.P.middleRows(blocks[bi].offset, blocks[bi].size);
      row += blocks[bi].size;
      sensor_dim += blocks[bi].size;
    }
    if (sensor_dim == 0) continue;
    DecompositionBlock blk;
    blk.sensor = j;
    blk.offset = block_offset;
    blk.dim = sensor_dim;
    out.sensor_blocks.push_back(std::move(blk));
  }

  const Matrix A_diag = out.Q * sys.A * out.Q.partialPivLu().inverse();
  double offdiag = 0.0;
  for (const auto& rb : out.sensor_blocks) {
    for (const auto& cb : out.sensor_blocks) {
      if (rb.offset == cb.offset) continue;
      offdiag = std::max(
          offdiag,
          A_diag.block(rb.offset, cb.offset, rb.dim, cb.dim).cwiseAbs().maxCoeff());
    }
  }
  out.offdiag_residual = offdiag;
  for (auto& blk : out.sensor_blocks) {
    blk.eigenvalues =
        block_eigenvalues(A_diag.block(blk.offset, blk.offset, blk.dim, blk.dim));
  }
  return out;
}

double sufficient_rate(const BlockDecomposition& decomp) {
  std::vector<const DecompositionBlock*> blocks;
  for (const auto& b : decomp.blocks) {
    if (b.dim > 0) blocks.push_back(&b);
  }
  double rate = 0.0;
  if (decomp.decoupled) {
    // Block-diagonal dynamics: every block is stabilized independently, no
    // lower block acts as noise, so each eigenvalue is charged at its own
    // magnitude and the floor is met.
    for (const auto* blk : blocks) {
      for (const auto& lam : blk->eigenvalues) {
        rate += std::log2(std::abs(lam));
      }
    }
    return rate;
  }
  // Suffix maxima over the blocks below each position.
  std::vector<double> below_max(blocks.size() + 1, 0.0);
  for (int i = static_cast<int>(blocks.size()) - 1; i >= 0; --i) {
    below_max[i] = std::max(below_max[i + 1], blocks[i]->max_abs_eig());
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (const auto& lam : blocks[i]->eigenvalues) {
      const double charged = std::max(std::abs(lam), below_max[i + 1]);
      rate += std::log2(charged);
    }
  }
  return rate;
}

bool check_decreasing_order(const BlockDecomposition& decomp) {
  double max_below = 0.0;
  for (auto it = decomp.blocks.rbegin(); it != decomp.blocks.rend(); ++it) {
    if (it->dim == 0) continue;
    if (it->min_abs_eig() + 1e-12 < max_below) return false;
    max_below = std::max(max_below, it->max_abs_eig());
  }
  return true;
}

std::optional<BlockDecomposition> find_decreasing_order(
    const LinearSystem& sys) {
  const int M = sys.sensor_count();
  if (M > 6) {
    throw ConfigError("find_decreasing_order: too many sensors (max 6)");
  }
  std::vector<int> order(M);
  std::iota(order.begin(), order.end(), 0);
  do {
    BlockDecomposition decomp = build_block_decomposition(sys, order);
    if (check_decreasing_order(decomp)) return decomp;
  } while (std::next_permutation(order.begin(), order.end()));
  return std::nullopt;
}

}  // namespace zoomctl
