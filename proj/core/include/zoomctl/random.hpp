#pragma once

#include <cstdint>

#include "zoomctl/numerics.hpp"

namespace zoomctl {

/// Deterministic per-stream Gaussian generator.
///
/// The (seed, stream) pair fixes the draw sequence exactly; distinct streams
/// hash to unrelated states so parallel trials never share a sequence. The
/// uniform core is splitmix64 and normals come from a Box-Muller pair, so the
/// output is identical across platforms and standard libraries.
class GaussianSource {
 public:
  GaussianSource(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform in (0, 1).
  double next_uniform();
  /// Standard normal draw.
  double next_normal();

  Vector normal_vector(int n);

  /// Draw from N(mean, chol * chol^T).
  Vector sample(const Vector& mean, const Matrix& chol);

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Stable 64-bit mix used to derive sub-stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace zoomctl
