#pragma once

// Counter-based sample streams: sample i of stream s under seed k is drawn
// from a generator keyed only by (k, s, i), so any worker can produce it.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace stabkit {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed ^ splitmix64(stream)) + index));
}

// Stream identifiers keep the draws of different consumers independent.
enum SampleStream : std::uint64_t {
  kStreamCertificate = 1,
  kStreamInnerSphere = 2,
  kStreamOuterSphere = 3,
  kStreamAdmissibility = 4,
  kStreamConjugacy = 5,
  kStreamGas = 6,
  kStreamFamily = 7,
  kStreamRays = 8,
  kStreamProperty = 9,
};

inline std::vector<double> sample_direction(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> u(n);
  double r2 = 0.0;
  do {
    r2 = 0.0;
    for (double& c : u) {
      c = normal(rng);
      r2 += c * c;
    }
  } while (r2 < 1e-24);
  double inv = 1.0 / std::sqrt(r2);
  for (double& c : u) c *= inv;
  return u;
}

// Uniform (volume measure) on {r_in <= |x - center| <= r_out}.
inline std::vector<double> sample_annulus(std::mt19937_64& rng, std::span<const double> center, double r_in,
                                          double r_out) {
  const std::size_t n = center.size();
  std::vector<double> u = sample_direction(rng, n);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double dn = static_cast<double>(n);
  double a = std::pow(r_in, dn);
  double b = std::pow(r_out, dn);
  double r = std::pow(a + uni(rng) * (b - a), 1.0 / dn);
  for (std::size_t i = 0; i < n; ++i) u[i] = center[i] + r * u[i];
  return u;
}

inline std::vector<double> sample_sphere(std::mt19937_64& rng, std::span<const double> center, double r) {
  std::vector<double> u = sample_direction(rng, center.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = center[i] + r * u[i];
  return u;
}

inline std::vector<double> sample_box(std::mt19937_64& rng, std::span<const double> lo, std::span<const double> hi) {
  std::vector<double> x(lo.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::uniform_real_distribution<double> uni(lo[i], hi[i]);
    x[i] = uni(rng);
  }
  return x;
}

}  // namespace stabkit
