#pragma once

// Joint difference-form regression between a group and a probe set, the
// resulting residual distances, and the unprojected set classifiers.

#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include "dra/linalg.hpp"
#include "dra/parallel.hpp"
#include "dra/setcore.hpp"

namespace dra {

inline constexpr double kDefaultRho = 1e-2;

struct PairResidual {
  Vector residual;   // D γ − rhs
  double distance = 0.0;
  Vector coeffs;
};

struct ClassDistances {
  std::size_t class_id = 0;
  PairResidual related;
  PairResidual unrelated;
  double ratio = 0.0;
};

/// Unrelated groups by omission: all other classes' training samples.
struct Nfs {};

/// Unrelated groups by Euclidean selection near the probe mean.
/// count == 0 selects m_k samples (the size of the related group).
struct EuclidSelect {
  std::size_t count = 0;
};

using Strategy = std::variant<Nfs, EuclidSelect>;

/// d_r / d_u with the degenerate cases pinned: x/0 = +inf for x > 0, 0/0 = 0.
inline double decision_ratio(double related, double unrelated) {
  if (unrelated == 0.0)
    return related == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return related / unrelated;
}

/// Solves [Ĝ, −P̂] γ ≈ p_anchor − g_anchor by ridge regression and returns
/// the residual vector, its norm and the coefficients.
inline PairResidual pair_residual(const ImageSet& group, const ImageSet& probe,
                                  double rho = kDefaultRho) {
  if (group.dim() != probe.dim())
    throw Error(Errc::DimensionMismatch, "group dimension " + std::to_string(group.dim()) +
                                             " vs probe " + std::to_string(probe.dim()));
  const AnchoredDesign g = difference_transform(group);
  const AnchoredDesign p = difference_transform(probe);
  const std::size_t d = group.dim();

  RidgeProblem prob;
  prob.rho = rho;
  prob.design = Matrix(d, g.design.cols() + p.design.cols());
  for (std::size_t j = 0; j < g.design.cols(); ++j)
    std::copy(g.design.col(j).begin(), g.design.col(j).end(), prob.design.col(j).begin());
  for (std::size_t j = 0; j < p.design.cols(); ++j) {
    auto src = p.design.col(j);
    auto dst = prob.design.col(g.design.cols() + j);
    for (std::size_t i = 0; i < d; ++i) dst[i] = -src[i];
  }
  prob.rhs.resize(d);
  for (std::size_t i = 0; i < d; ++i) prob.rhs[i] = p.anchor[i] - g.anchor[i];

  PairResidual out;
  out.coeffs = ridge_solve(prob);
  out.residual = matvec(prob.design, out.coeffs);
  for (std::size_t i = 0; i < d; ++i) out.residual[i] -= prob.rhs[i];
  out.distance = norm2(out.residual);
  return out;
}

/// U_k for the given strategy.
inline ImageSet unrelated_group(const Dataset& train, std::size_t k, const ImageSet& probe,
                                const Strategy& strategy) {
  if (const auto* sel = std::get_if<EuclidSelect>(&strategy)) {
    const std::size_t count = sel->count != 0 ? sel->count : class_group(train, k).m();
    return euclid_select_unrelated(train, k, probe, count);
  }
  return nfs_unrelated(train, k);
}

/// Related and unrelated residual distances of the probe against every
/// class. The c per-class regressions run on up to `threads` workers; the
/// list is assembled in class order.
inline std::vector<ClassDistances> class_distances(const Dataset& train, const ImageSet& probe,
                                                   const Strategy& strategy,
                                                   double rho = kDefaultRho,
                                                   std::size_t threads = 1) {
  if (train.c < 2)
    throw Error(Errc::SingleClass, "classification needs at least 2 classes");
  if (probe.m() < 2) throw Error(Errc::TooFewSamples, "probe set needs at least 2 samples");
  std::vector<ClassDistances> out(train.c);
  parallel_for(train.c, threads, [&](std::size_t k) {
    ClassDistances& cd = out[k];
    cd.class_id = k;
    cd.related = pair_residual(class_group(train, k), probe, rho);
    cd.unrelated = pair_residual(unrelated_group(train, k, probe, strategy), probe, rho);
    cd.ratio = decision_ratio(cd.related.distance, cd.unrelated.distance);
  });
  return out;
}

namespace detail {

template <typename Key>
std::size_t argmin_first(const std::vector<ClassDistances>& dists, Key key) {
  if (dists.empty()) throw Error(Errc::ClassMismatch, "no class distances to compare");
  std::size_t best = 0;
  for (std::size_t k = 1; k < dists.size(); ++k)
    if (key(dists[k]) < key(dists[best])) best = k;
  return dists[best].class_id;
}

}  // namespace detail

/// argmin of d_r / d_u; ties go to the smaller class.
inline std::size_t classify_ratio(const std::vector<ClassDistances>& dists) {
  return detail::argmin_first(dists, [](const ClassDistances& c) { return c.ratio; });
}

/// argmin of the related distance alone.
inline std::size_t classify_related_only(const std::vector<ClassDistances>& dists) {
  return detail::argmin_first(dists, [](const ClassDistances& c) { return c.related.distance; });
}

}  // namespace dra
