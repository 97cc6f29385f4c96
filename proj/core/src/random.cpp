#include "zoomctl/random.hpp"

#include <cmath>

namespace zoomctl {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0xD1B54A32D192ED03ull * (stream + 1));
  // Two scrambling rounds decorrelate adjacent stream ids.
  splitmix64(s);
  return splitmix64(s) ^ s;
}

GaussianSource::GaussianSource(std::uint64_t seed, std::uint64_t stream)
    : state_(mix_seed(seed, stream)) {}

std::uint64_t GaussianSource::next_u64() { return splitmix64(state_); }

double GaussianSource::next_uniform() {
  // 53-bit mantissa, shifted into (0, 1).
  const std::uint64_t bits = next_u64() >> 11;
  double u = (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  return u;
}

double GaussianSource::next_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Vector GaussianSource::normal_vector(int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = next_normal();
  return v;
}

Vector GaussianSource::sample(const Vector& mean, const Matrix& chol) {
  if (chol.rows() != mean.size()) {
    throw InputError("GaussianSource::sample: dimension mismatch");
  }
  return mean + chol * normal_vector(static_cast<int>(chol.cols()));
}

}  // namespace zoomctl
