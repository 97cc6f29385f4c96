#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "zoomctl/linear_system.hpp"
#include "zoomctl/transforms.hpp"

namespace zoomctl {

struct DecompositionBlock {
  int sensor = 0;  // zero-based sensor the block is observable through
  int offset = 0;  // first transformed coordinate (blocks listed top first)
  int dim = 0;
  std::vector<std::complex<double>> eigenvalues;

  double max_abs_eig() const;
  double min_abs_eig() const;
};

/// Similarity transform making the dynamics block upper triangular, one
/// diagonal block per sensor in the order its rows were claimed from the
/// stacked observability matrices. The stacked transformed sensor matrices
/// share the same block-triangular column pattern.
struct BlockDecomposition {
  Matrix Q;
  Matrix A_bar;                    // Q A Q^{-1}
  std::vector<Matrix> C_bars;      // per original sensor index: C^j Q^{-1}
  std::vector<DecompositionBlock> blocks;  // top-to-bottom
  std::vector<int> sensor_order;   // processing order used
  double below_block_residual = 0.0;   // max |entry| below the block diagonal
  double c_pattern_residual = 0.0;     // same for the stacked C pattern
  bool decoupled = false;              // all coupling blocks vanish
};

/// Builds the decomposition processing sensors in the given order (first
/// processed ends up in the bottom-right block). Default order 0..M-1.
/// Requires joint observability.
BlockDecomposition build_block_decomposition(
    const LinearSystem& sys, const std::vector<int>& sensor_order = {});

/// Assignment of every Jordan block's eigenspace to a sensor whose
/// observability row space contains it, plus the block-diagonalizing
/// transform built from those row-space eigenvector coordinates.
struct EigenspaceAssignment {
  bool satisfied = false;
  RealJordanForm jordan;               // of A
  std::vector<int> block_sensor;       // per Jordan block; -1 when unassigned
  std::vector<int> unassigned_blocks;  // violation report
  // Filled only when satisfied:
  Matrix Q;                                  // rows grouped by sensor, highest
                                             // sensor index on top
  std::vector<Matrix> coefficient_maps;      // per Jordan block: rows k with
                                             // k * O_sensor = eigenvector row
  std::vector<DecompositionBlock> sensor_blocks;  // per-sensor diagonal blocks
  double offdiag_residual = 0.0;             // block-diagonality of Q A Q^{-1}
};

/// Tests each Jordan-block eigenspace for containment in some sensor's
/// observability row space (least-squares projection residual below 1e-9)
/// and greedily assigns blocks to the first containing sensor.
EigenspaceAssignment check_eigenspace_assumption(const LinearSystem& sys);

/// Asymptotic sufficient rate (bits per raw stage): every eigenvalue is
/// charged at the running maximum magnitude over its own block and all
/// blocks below it. A fully decoupled decomposition has no lower-block
/// noise, so each eigenvalue is charged at its own magnitude and the rate
/// equals the floor.
double sufficient_rate(const BlockDecomposition& decomp);

/// True when block magnitudes decrease from top to bottom: every block fully
/// dominates (non-strictly) all blocks below it.
bool check_decreasing_order(const BlockDecomposition& decomp);

/// Searches all sensor orders (M <= 6) for one whose decomposition passes
/// check_decreasing_order.
std::optional<BlockDecomposition> find_decreasing_order(
    const LinearSystem& sys);

}  // namespace zoomctl
