#pragma once

// Discriminant residual analysis: residuals collected over every
// (training class, validation class) pair, partial-error / total-error
// scatter matrices, regularized generalized eigenproblems for the
// projection, and the projected set classifier.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dra/linalg.hpp"
#include "dra/parallel.hpp"
#include "dra/residual.hpp"
#include "dra/setcore.hpp"

namespace dra {

enum class Model { PE, TE };

inline std::string_view to_string(Model m) { return m == Model::PE ? "PE" : "TE"; }

inline constexpr double kDefaultMuPE = 1e-3;
inline constexpr double kDefaultMuTE = 1e1;

inline double default_mu(Model m) { return m == Model::PE ? kDefaultMuPE : kDefaultMuTE; }

struct Regularization {
  enum class Kind { Eig, Exp };
  Kind kind = Kind::Eig;
  double mu = kDefaultMuPE;  // used by Eig only

  static Regularization eig(double mu) { return {Kind::Eig, mu}; }
  static Regularization exp() { return {Kind::Exp, 0.0}; }
};

inline std::string_view to_string(Regularization::Kind k) {
  return k == Regularization::Kind::Eig ? "eig" : "exp";
}

/// e_r[k][l], e_u[k][l]: residuals of training class k against validation
/// class l.
class ResidualBank {
 public:
  ResidualBank() = default;
  ResidualBank(std::size_t c, std::size_t d)
      : c_(c), d_(d), related_(c * c, Vector(d, 0.0)), unrelated_(c * c, Vector(d, 0.0)) {}

  std::size_t c() const noexcept { return c_; }
  std::size_t d() const noexcept { return d_; }

  Vector& related(std::size_t k, std::size_t l) { return related_[k * c_ + l]; }
  const Vector& related(std::size_t k, std::size_t l) const { return related_[k * c_ + l]; }
  Vector& unrelated(std::size_t k, std::size_t l) { return unrelated_[k * c_ + l]; }
  const Vector& unrelated(std::size_t k, std::size_t l) const { return unrelated_[k * c_ + l]; }

 private:
  std::size_t c_ = 0;
  std::size_t d_ = 0;
  std::vector<Vector> related_;
  std::vector<Vector> unrelated_;
};

/// A1 p = λ A2 p; A1 collects what the projection should enlarge, A2 what
/// it should shrink.
struct ScatterPair {
  SymMatrix a1;
  SymMatrix a2;
  Model model = Model::PE;
};

struct DiscriminantProjection {
  Matrix p;  // d × t, unit-norm columns
  Vector eigvals;
  Model model = Model::PE;
  Regularization reg;
  std::size_t t = 0;
  double exp_scale = 1.0;  // shared pre-exponential scaling (exp mode only)
};

/// Fills the bank: for every (k, l) the related group X_k and the unrelated
/// group from `strategy` are regressed against validation set Q_l. NFS
/// groups use training samples only; EuclidSelect ranks candidates by
/// distance to Q_l.
inline ResidualBank collect_residuals(const Dataset& train, const Dataset& valid,
                                      const Strategy& strategy, double rho = kDefaultRho,
                                      std::size_t threads = 1) {
  if (train.c < 2) throw Error(Errc::SingleClass, "training needs at least 2 classes");
  if (train.c != valid.c)
    throw Error(Errc::ClassMismatch, "train has " + std::to_string(train.c) +
                                         " classes, validation " + std::to_string(valid.c));
  if (train.d != valid.d)
    throw Error(Errc::DimensionMismatch, "train dimension " + std::to_string(train.d) +
                                             " vs validation " + std::to_string(valid.d));
  const std::size_t c = train.c;
  for (std::size_t k = 0; k < c; ++k)
    if (!train.has_class(k) || !valid.has_class(k))
      throw Error(Errc::ClassMismatch, "class " + std::to_string(k) +
                                           " missing from train or validation");

  std::vector<ImageSet> related(c), probes(c);
  std::vector<std::optional<ImageSet>> nfs(c);
  for (std::size_t k = 0; k < c; ++k) {
    related[k] = class_group(train, k);
    probes[k] = class_group(valid, k);
    if (std::holds_alternative<Nfs>(strategy)) nfs[k] = nfs_unrelated(train, k);
  }

  ResidualBank bank(c, train.d);
  parallel_for(c * c, threads, [&](std::size_t idx) {
    const std::size_t k = idx / c;
    const std::size_t l = idx % c;
    bank.related(k, l) = pair_residual(related[k], probes[l], rho).residual;
    const ImageSet u = nfs[k] ? *nfs[k] : unrelated_group(train, k, probes[l], strategy);
    bank.unrelated(k, l) = pair_residual(u, probes[l], rho).residual;
  });
  return bank;
}

/// Partial-error scatters: same-class residuals only.
inline ScatterPair scatter_pe(const ResidualBank& bank) {
  ScatterPair s{SymMatrix(bank.d()), SymMatrix(bank.d()), Model::PE};
  for (std::size_t i = 0; i < bank.c(); ++i) {
    s.a1.add_outer(bank.unrelated(i, i));
    s.a2.add_outer(bank.related(i, i));
  }
  return s;
}

/// Total-error scatters: off-diagonal pairs enter with their roles swapped.
inline ScatterPair scatter_te(const ResidualBank& bank) {
  ScatterPair s = scatter_pe(bank);
  s.model = Model::TE;
  for (std::size_t i = 0; i < bank.c(); ++i)
    for (std::size_t j = 0; j < bank.c(); ++j) {
      if (i == j) continue;
      s.a1.add_outer(bank.related(i, j));
      s.a2.add_outer(bank.unrelated(i, j));
    }
  return s;
}

inline ScatterPair build_scatter(const ResidualBank& bank, Model model) {
  return model == Model::PE ? scatter_pe(bank) : scatter_te(bank);
}

/// Shared scale applied to both scatters before exponentiation:
/// 1 / max(1, ‖A1‖₂, ‖A2‖₂).
inline double exp_mode_scale(const ScatterPair& s) {
  return 1.0 / std::max({1.0, spectral_norm(s.a1), spectral_norm(s.a2)});
}

/// Top-t eigenvectors of A1 p = λ (A2 + μI) p (eig) or of
/// exp(sA1) p = λ exp(sA2) p (exp).
inline DiscriminantProjection learn_projection(const ScatterPair& s, const Regularization& reg,
                                               std::size_t t) {
  const std::size_t d = s.a1.order();
  if (s.a2.order() != d) throw Error(Errc::DimensionMismatch, "scatter orders differ");
  if (t < 1 || t > d)
    throw Error(Errc::BadDimension,
                "projection dimension t=" + std::to_string(t) + " outside [1, " +
                    std::to_string(d) + "]");

  DiscriminantProjection out;
  out.model = s.model;
  out.reg = reg;
  out.t = t;

  EigPair e;
  if (reg.kind == Regularization::Kind::Eig) {
    if (!(reg.mu > 0.0)) throw Error(Errc::ConfigError, "eig regularization needs mu > 0");
    SymMatrix b = s.a2;
    b.add_diagonal(reg.mu);
    e = sym_gevd(s.a1, b);
  } else {
    out.exp_scale = exp_mode_scale(s);
    e = sym_gevd(sym_expm(s.a1.scaled(out.exp_scale)), sym_expm(s.a2.scaled(out.exp_scale)));
  }
  out.p = e.vectors.block_cols(0, t);
  out.eigvals.assign(e.values.begin(), e.values.begin() + static_cast<std::ptrdiff_t>(t));
  return out;
}

struct ProjectedDecision {
  std::size_t predicted = 0;
  Vector projected_ratio;  // ‖Pᵀe_r‖ / ‖Pᵀe_u‖ per class
  std::vector<ClassDistances> raw;
};

inline double projected_norm(const Matrix& p, const Vector& e) { return norm2(matvec_t(p, e)); }

/// Residuals are computed in the original space and only then projected.
inline ProjectedDecision project_classify(const DiscriminantProjection& proj,
                                          const Dataset& train, const ImageSet& probe,
                                          const Strategy& strategy, double rho = kDefaultRho,
                                          std::size_t threads = 1) {
  if (proj.p.rows() != train.d)
    throw Error(Errc::DimensionMismatch, "projection has " + std::to_string(proj.p.rows()) +
                                             " rows, data dimension is " +
                                             std::to_string(train.d));
  ProjectedDecision out;
  out.raw = class_distances(train, probe, strategy, rho, threads);
  out.projected_ratio.resize(out.raw.size());
  std::size_t best = 0;
  for (std::size_t k = 0; k < out.raw.size(); ++k) {
    out.projected_ratio[k] = decision_ratio(projected_norm(proj.p, out.raw[k].related.residual),
                                            projected_norm(proj.p, out.raw[k].unrelated.residual));
    if (out.projected_ratio[k] < out.projected_ratio[best]) best = k;
  }
  out.predicted = out.raw[best].class_id;
  return out;
}

struct DraOptions {
  Model model = Model::PE;
  Regularization reg = Regularization::eig(kDefaultMuPE);
  double rho = kDefaultRho;
  std::size_t t = 0;  // 0 = number of classes
  Strategy strategy = Nfs{};
  std::size_t threads = 1;

  static DraOptions defaults(Model model, Regularization::Kind kind) {
    DraOptions o;
    o.model = model;
    o.reg = kind == Regularization::Kind::Eig ? Regularization::eig(default_mu(model))
                                              : Regularization::exp();
    return o;
  }
};

/// Residual collection, scatter assembly and projection learning.
inline DiscriminantProjection dra_train(const Dataset& train, const Dataset& valid,
                                        const DraOptions& opt) {
  const ResidualBank bank = collect_residuals(train, valid, opt.strategy, opt.rho, opt.threads);
  const std::size_t t = opt.t == 0 ? train.c : opt.t;
  return learn_projection(build_scatter(bank, opt.model), opt.reg, t);
}

/// DRA on PCA-reduced features.
struct PcaDraModel {
  PcaModel pca;
  DiscriminantProjection projection;

  ImageSet reduce(const ImageSet& s) const { return {s.class_id, pca.project(s.samples)}; }

  Dataset reduce(const Dataset& ds) const {
    std::vector<ImageSet> sets;
    sets.reserve(ds.sets.size());
    for (const ImageSet& s : ds.sets) sets.push_back(reduce(s));
    return Dataset::make(std::move(sets), ds.c);
  }

  ProjectedDecision classify(const Dataset& train, const ImageSet& probe, const Strategy& strategy,
                             double rho = kDefaultRho, std::size_t threads = 1) const {
    return project_classify(projection, reduce(train), reduce(probe), strategy, rho, threads);
  }
};

inline constexpr std::size_t kDefaultPcaDim = 500;

/// PCA is fit on the union of training and validation samples; q = 0 picks
/// min(500, d, sample count).
inline PcaDraModel pca_dra_train(const Dataset& train, const Dataset& valid, std::size_t q,
                                 const DraOptions& opt) {
  const std::size_t n = train.total_samples() + valid.total_samples();
  if (q == 0) q = std::min({kDefaultPcaDim, train.d, n});
  if (q > train.d)
    throw Error(Errc::BadDimension,
                "pca dimension " + std::to_string(q) + " exceeds feature dimension " +
                    std::to_string(train.d));

  Matrix all(train.d, n);
  std::size_t j = 0;
  for (const Dataset* ds : {&train, &valid})
    for (const ImageSet& s : ds->sets)
      for (std::size_t c = 0; c < s.m(); ++c, ++j)
        std::copy(s.samples.col(c).begin(), s.samples.col(c).end(), all.col(j).begin());

  PcaDraModel model;
  model.pca = pca_fit(all, q);
  model.projection = dra_train(model.reduce(train), model.reduce(valid), opt);
  return model;
}

}  // namespace dra
