#pragma once

// Synthetic image-set data with a large intra-class variation shared by all
// classes: sample = class mean + shared_basis · coeff + noise.

#include <cmath>
#include <cstdint>
#include <string>

#include "dra/error.hpp"
#include "dra/linalg.hpp"
#include "dra/random.hpp"
#include "dra/setcore.hpp"

namespace dra::harness {

struct SynthParams {
  std::size_t c = 10;
  std::size_t d = 30;
  std::size_t samples_per_class = 20;
  std::size_t variation_rank = 5;
  double noise_sigma = 0.1;
  double class_sep = 1.0;
  // Standard deviation of the shared-variation coefficients, in units of
  // class_sep.
  double variation_scale = 3.0;
  std::uint64_t seed = 1;
};

namespace detail {

// Gram-Schmidt on Gaussian draws; needs count <= dim.
inline Matrix random_orthonormal(std::size_t dim, std::size_t count, Rng& rng) {
  Matrix q(dim, count);
  for (std::size_t j = 0; j < count; ++j) {
    auto v = q.col(j);
    for (;;) {
      for (double& x : v) x = rng.normal();
      // Two passes keep the columns orthogonal to working precision.
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t k = 0; k < j; ++k) {
          const double proj = dot(q.col(k), v);
          auto u = q.col(k);
          for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * u[i];
        }
      const double n = norm2(v);
      if (n > 1e-8) {
        for (double& x : v) x /= n;
        break;
      }
    }
  }
  return q;
}

}  // namespace detail

/// Per-class pools, deterministic in `seed`. Class means sit on scaled
/// orthonormal directions so every pair is exactly class_sep apart (when
/// c <= d); the variation basis is a random rank-r orthonormal frame.
inline ClassPools synth_generate(const SynthParams& p) {
  if (p.c < 2) throw Error(Errc::BadDimension, "synth: need at least 2 classes");
  if (p.d == 0 || p.variation_rank >= p.d)
    throw Error(Errc::BadDimension, "synth: variation rank " + std::to_string(p.variation_rank) +
                                        " must be below dimension " + std::to_string(p.d));
  if (p.samples_per_class == 0) throw Error(Errc::BadDimension, "synth: empty classes");
  if (!(p.noise_sigma >= 0.0) || !(p.class_sep >= 0.0) || !(p.variation_scale >= 0.0))
    throw Error(Errc::ConfigError, "synth: scales must be non-negative");

  Rng rng(p.seed);
  Matrix means(p.d, p.c);
  if (p.c <= p.d) {
    means = detail::random_orthonormal(p.d, p.c, rng);
    const double s = p.class_sep / std::sqrt(2.0);
    for (double& x : means.data()) x *= s;
  } else {
    const double s = p.class_sep / std::sqrt(2.0 * static_cast<double>(p.d));
    for (double& x : means.data()) x = s * rng.normal();
  }
  const Matrix basis = detail::random_orthonormal(p.d, p.variation_rank, rng);
  const double coeff_sigma = p.variation_scale * p.class_sep;

  ClassPools pools(p.c, Matrix(p.d, p.samples_per_class));
  for (std::size_t k = 0; k < p.c; ++k) {
    for (std::size_t j = 0; j < p.samples_per_class; ++j) {
      auto x = pools[k].col(j);
      std::copy(means.col(k).begin(), means.col(k).end(), x.begin());
      for (std::size_t r = 0; r < p.variation_rank; ++r) {
        const double a = coeff_sigma * rng.normal();
        auto b = basis.col(r);
        for (std::size_t i = 0; i < p.d; ++i) x[i] += a * b[i];
      }
      if (p.noise_sigma > 0.0)
        for (double& xi : x) xi += p.noise_sigma * rng.normal();
    }
  }
  return pools;
}

}  // namespace dra::harness
