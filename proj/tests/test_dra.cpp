#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "dra/dra.hpp"
#include "dra/harness/synth.hpp"
#include "test_support.hpp"

using namespace dra;
using namespace dra::testing;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Split synthetic_split(std::size_t c, std::size_t d, double noise, std::uint64_t seed,
                      double variation_scale = 3.0) {
  harness::SynthParams p;
  p.c = c;
  p.d = d;
  p.samples_per_class = 12;
  p.variation_rank = 3;
  p.noise_sigma = noise;
  p.variation_scale = variation_scale;
  p.seed = seed;
  return random_split(harness::synth_generate(p), {}, seed + 100);
}

ResidualBank random_bank(Rng& rng, std::size_t c, std::size_t d) {
  ResidualBank b(c, d);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t l = 0; l < c; ++l) {
      b.related(k, l) = random_vector(rng, d);
      b.unrelated(k, l) = random_vector(rng, d);
    }
  return b;
}

Matrix dense_outer_sum(const std::vector<Vector>& vs, std::size_t d) {
  Matrix m(d, d);
  for (const Vector& v : vs)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) m(i, j) += v[i] * v[j];
  return m;
}

double max_diff(const SymMatrix& s, const Matrix& m) {
  return max_abs_diff(s.to_dense().data(), m.data());
}

// Orthonormal basis of the column span (two-pass Gram-Schmidt).
Matrix orthonormalize(Matrix q) {
  for (std::size_t j = 0; j < q.cols(); ++j) {
    auto v = q.col(j);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < j; ++k) {
        const double p = dot(q.col(k), v);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * q(i, k);
      }
    const double n = vec_norm(v);
    for (double& x : v) x /= n;
  }
  return q;
}

// Largest principal angle between two column spans of equal dimension.
double subspace_angle(const Matrix& a, const Matrix& b) {
  const Matrix m = ref_matmul(orthonormalize(a).transpose(), orthonormalize(b));
  const EigPair e = sym_eig(SymMatrix::from_dense(ref_matmul(m.transpose(), m)));
  const double smin = std::sqrt(std::max(0.0, e.values.back()));
  return std::acos(std::min(1.0, smin));
}

}  // namespace

// --- collect_residuals ----------------------------------------------------

TEST(CollectResiduals, SingleClassIsRejected) {
  Rng rng(1);
  const Dataset one = Dataset::make({{0, random_matrix(rng, 3, 3)}}, 1);
  try {
    collect_residuals(one, one, Nfs{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SingleClass);
  }
}

TEST(CollectResiduals, MismatchedDatasetsAreRejected) {
  Rng rng(2);
  const Dataset a = Dataset::make({{0, random_matrix(rng, 3, 3)}, {1, random_matrix(rng, 3, 3)}}, 2);
  const Dataset b = Dataset::make({{0, random_matrix(rng, 4, 3)}, {1, random_matrix(rng, 4, 3)}}, 2);
  const Dataset c = Dataset::make({{0, random_matrix(rng, 3, 3)}, {0, random_matrix(rng, 3, 3)}}, 2);
  EXPECT_THROW(collect_residuals(a, b, Nfs{}), Error);
  try {
    collect_residuals(a, c, Nfs{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ClassMismatch);
  }
}

TEST(CollectResiduals, EntriesMatchDirectPairResiduals) {
  Rng rng(3);
  const Dataset train = Dataset::make({{0, random_matrix(rng, 4, 3)}, {1, random_matrix(rng, 4, 3)}}, 2);
  const Dataset valid = Dataset::make({{0, random_matrix(rng, 4, 3)}, {1, random_matrix(rng, 4, 3)}}, 2);
  for (const Strategy& s : {Strategy{Nfs{}}, Strategy{EuclidSelect{2}}}) {
    const ResidualBank bank = collect_residuals(train, valid, s);
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t l = 0; l < 2; ++l) {
        const ImageSet probe = valid.sets[l];
        EXPECT_EQ(bank.related(k, l), pair_residual(train.sets[k], probe).residual);
        const ImageSet u = unrelated_group(train, k, probe, s);
        EXPECT_EQ(bank.unrelated(k, l), pair_residual(u, probe).residual);
      }
  }
}

TEST(CollectResiduals, SwappingValidationLabelsPermutesColumns) {
  Rng rng(4);
  std::vector<ImageSet> tr, va, swapped;
  for (std::size_t k = 0; k < 3; ++k) {
    tr.push_back({k, random_matrix(rng, 5, 3)});
    va.push_back({k, random_matrix(rng, 5, 3)});
  }
  swapped = va;
  swapped[0].class_id = 1;
  swapped[1].class_id = 0;
  const Dataset train = Dataset::make(tr, 3);
  const ResidualBank a = collect_residuals(train, Dataset::make(va, 3), Nfs{});
  const ResidualBank b = collect_residuals(train, Dataset::make(swapped, 3), Nfs{});
  const std::size_t perm[] = {1, 0, 2};
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t l = 0; l < 3; ++l) {
      EXPECT_EQ(a.related(k, l), b.related(k, perm[l]));
      EXPECT_EQ(a.unrelated(k, l), b.unrelated(k, perm[l]));
    }
}

TEST(CollectResiduals, ThreadCountDoesNotChangeBits) {
  const Split s = synthetic_split(5, 12, 0.1, 5);
  const ResidualBank a = collect_residuals(s.train, s.valid, Nfs{}, 1e-2, 1);
  const ResidualBank b = collect_residuals(s.train, s.valid, Nfs{}, 1e-2, 8);
  for (std::size_t k = 0; k < 5; ++k)
    for (std::size_t l = 0; l < 5; ++l) {
      EXPECT_EQ(a.related(k, l), b.related(k, l));
      EXPECT_EQ(a.unrelated(k, l), b.unrelated(k, l));
    }
}

// --- scatters -------------------------------------------------------------

TEST(ScatterPe, SingleClassIsRankOne) {
  ResidualBank b(1, 3);
  b.unrelated(0, 0) = {1.0, 2.0, -1.0};
  b.related(0, 0) = {0.5, 0.0, 0.0};
  const ScatterPair s = scatter_pe(b);
  EXPECT_LE(max_diff(s.a1, dense_outer_sum({b.unrelated(0, 0)}, 3)), 0.0);
  const EigPair e = sym_eig(s.a1);
  EXPECT_LE(std::abs(e.values[1]), 1e-14);
  EXPECT_LE(std::abs(e.values[2]), 1e-14);
}

TEST(ScatterPe, ZeroDiagonalGivesZeroMatrices) {
  Rng rng(6);
  ResidualBank b = random_bank(rng, 3, 4);
  for (std::size_t i = 0; i < 3; ++i) {
    b.related(i, i).assign(4, 0.0);
    b.unrelated(i, i).assign(4, 0.0);
  }
  const ScatterPair s = scatter_pe(b);
  EXPECT_EQ(s.a1, SymMatrix(4));
  EXPECT_EQ(s.a2, SymMatrix(4));
}

TEST(ScatterPe, MatchesSummationOracle) {
  Rng rng(7);
  const ResidualBank b = random_bank(rng, 3, 5);
  std::vector<Vector> u, r;
  for (std::size_t i = 0; i < 3; ++i) {
    u.push_back(b.unrelated(i, i));
    r.push_back(b.related(i, i));
  }
  const ScatterPair s = scatter_pe(b);
  EXPECT_LE(max_diff(s.a1, dense_outer_sum(u, 5)), 1e-12);
  EXPECT_LE(max_diff(s.a2, dense_outer_sum(r, 5)), 1e-12);
  EXPECT_EQ(s.model, Model::PE);
}

TEST(ScatterTe, SingleClassEqualsPe) {
  Rng rng(8);
  const ResidualBank b = random_bank(rng, 1, 4);
  EXPECT_EQ(scatter_te(b).a1, scatter_pe(b).a1);
  EXPECT_EQ(scatter_te(b).a2, scatter_pe(b).a2);
}

TEST(ScatterTe, OffDiagonalRolesAreSwapped) {
  ResidualBank b(2, 2);
  b.related(0, 1) = {1.0, 0.0};
  b.unrelated(1, 0) = {0.0, 2.0};
  const ScatterPair s = scatter_te(b);
  EXPECT_LE(max_diff(s.a1, dense_outer_sum({b.related(0, 1)}, 2)), 0.0);
  EXPECT_LE(max_diff(s.a2, dense_outer_sum({b.unrelated(1, 0)}, 2)), 0.0);
}

TEST(ScatterTe, MatchesSummationOracle) {
  Rng rng(9);
  const ResidualBank b = random_bank(rng, 3, 5);
  std::vector<Vector> v1, v2;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      v1.push_back(i == j ? b.unrelated(i, j) : b.related(i, j));
      v2.push_back(i == j ? b.related(i, j) : b.unrelated(i, j));
    }
  const ScatterPair s = scatter_te(b);
  EXPECT_LE(max_diff(s.a1, dense_outer_sum(v1, 5)), 1e-12);
  EXPECT_LE(max_diff(s.a2, dense_outer_sum(v2, 5)), 1e-12);
  EXPECT_EQ(s.model, Model::TE);
}

TEST(Scatter, TeMinusOffDiagonalEqualsPe) {
  Rng rng(10);
  const ResidualBank b = random_bank(rng, 4, 6);
  std::vector<Vector> off1, off2;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (i != j) {
        off1.push_back(b.related(i, j));
        off2.push_back(b.unrelated(i, j));
      }
  const ScatterPair te = scatter_te(b), pe = scatter_pe(b);
  const Matrix o1 = dense_outer_sum(off1, 6), o2 = dense_outer_sum(off2, 6);
  const Matrix t1 = te.a1.to_dense(), t2 = te.a2.to_dense();
  const Matrix p1 = pe.a1.to_dense(), p2 = pe.a2.to_dense();
  for (std::size_t i = 0; i < 36; ++i) {
    EXPECT_NEAR(t1.data()[i] - o1.data()[i], p1.data()[i], 1e-12);
    EXPECT_NEAR(t2.data()[i] - o2.data()[i], p2.data()[i], 1e-12);
  }
}

TEST(Scatter, QuadraticFormsAreNonNegative) {
  Rng rng(11);
  const ResidualBank b = random_bank(rng, 4, 7);
  for (Model m : {Model::PE, Model::TE}) {
    const ScatterPair s = build_scatter(b, m);
    for (int i = 0; i < 1000; ++i) {
      const Vector x = random_vector(rng, 7);
      EXPECT_GE(s.a1.quadratic_form(x), -1e-10);
      EXPECT_GE(s.a2.quadratic_form(x), -1e-10);
    }
  }
}

// --- learn_projection -----------------------------------------------------

TEST(LearnProjection, DiagonalExample) {
  const Vector d{4.0, 1.0};
  const ScatterPair s{SymMatrix::diagonal(d), SymMatrix(2), Model::PE};
  const DiscriminantProjection p = learn_projection(s, Regularization::eig(1.0), 1);
  ASSERT_EQ(p.p.cols(), 1u);
  EXPECT_NEAR(p.eigvals[0], 4.0, 1e-14);
  EXPECT_NEAR(p.p(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(p.p(1, 0), 0.0, 1e-14);
  const DiscriminantProjection full = learn_projection(s, Regularization::eig(1.0), 2);
  EXPECT_NEAR(full.eigvals[1], 1.0, 1e-14);
}

TEST(LearnProjection, IsotropicPairGivesOneHalf) {
  const ScatterPair s{SymMatrix::identity(4), SymMatrix::identity(4), Model::PE};
  const DiscriminantProjection p = learn_projection(s, Regularization::eig(1.0), 4);
  for (double v : p.eigvals) EXPECT_NEAR(v, 0.5, 1e-14);
  const Matrix ptp = ref_matmul(p.p.transpose(), p.p);
  EXPECT_LE(max_abs_diff(ptp.data(), Matrix::identity(4).data()), 1e-14);
}

TEST(LearnProjection, MatchesRayleighGridOracle) {
  Rng rng(12);
  const double mu = 1e-3;
  for (int trial = 0; trial < 10; ++trial) {
    const ScatterPair s{random_spd(rng, 2, 0.1), random_spd(rng, 2, 0.1), Model::PE};
    SymMatrix b = s.a2;
    b.add_diagonal(mu);
    double best = -kInf, best_theta = 0.0;
    constexpr int kSteps = 100000;
    for (int i = 0; i < kSteps; ++i) {
      const double th = std::numbers::pi * i / kSteps;
      const Vector p{std::cos(th), std::sin(th)};
      const double q = s.a1.quadratic_form(p) / b.quadratic_form(p);
      if (q > best) {
        best = q;
        best_theta = th;
      }
    }
    const DiscriminantProjection proj = learn_projection(s, Regularization::eig(mu), 1);
    const double c = std::abs(proj.p(0, 0) * std::cos(best_theta) + proj.p(1, 0) * std::sin(best_theta));
    EXPECT_LE(std::acos(std::min(1.0, c)), 1e-2);
    EXPECT_NEAR(proj.eigvals[0], best, 1e-6 * best);
  }
}

TEST(LearnProjection, LargeMuRecoversTopEigenvectorsOfA1) {
  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    const ScatterPair s{random_spd(rng, 8), random_spd(rng, 8), Model::PE};
    const DiscriminantProjection p = learn_projection(s, Regularization::eig(1e8), 3);
    const EigPair top = sym_eig(s.a1);
    EXPECT_LE(subspace_angle(p.p, top.vectors.block_cols(0, 3)), 1e-3);
  }
}

TEST(LearnProjection, ExpModeHandlesSingularA2) {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 6;
    const ScatterPair s{random_psd(rng, d, 2), random_psd(rng, d, trial % 3), Model::PE};
    DiscriminantProjection p;
    ASSERT_NO_THROW(p = learn_projection(s, Regularization::exp(), 3));
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(vec_norm(p.p.col(k)), 1.0, 1e-12);
    for (std::size_t k = 1; k < 3; ++k) EXPECT_GE(p.eigvals[k - 1], p.eigvals[k]);
  }
}

TEST(LearnProjection, ExpScaleUsesLargestSpectralNorm) {
  const Vector a{10.0, 1.0}, b{3.0, 0.0};
  const ScatterPair s{SymMatrix::diagonal(a), SymMatrix::diagonal(b), Model::PE};
  EXPECT_NEAR(exp_mode_scale(s), 0.1, 1e-15);
  const ScatterPair small{SymMatrix::identity(2).scaled(0.5), SymMatrix(2), Model::PE};
  EXPECT_EQ(exp_mode_scale(small), 1.0);
  // exp(0.1·diag(10,1)) vs exp(0.1·diag(3,0)): ratios e^{0.7}, e^{0.1}.
  const DiscriminantProjection p = learn_projection(s, Regularization::exp(), 2);
  EXPECT_NEAR(p.eigvals[0], std::exp(0.7), 1e-12);
  EXPECT_NEAR(p.eigvals[1], std::exp(0.1), 1e-12);
}

TEST(LearnProjection, ErrorPaths) {
  const ScatterPair s{SymMatrix::identity(3), SymMatrix::identity(3), Model::PE};
  try {
    learn_projection(s, Regularization::eig(1.0), 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BadDimension);
  }
  EXPECT_THROW(learn_projection(s, Regularization::eig(1.0), 0), Error);
  try {
    learn_projection(s, Regularization::eig(0.0), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigError);
  }
}

// --- project_classify -----------------------------------------------------

TEST(ProjectClassify, IdentityProjectionReproducesRatios) {
  const Split s = synthetic_split(4, 10, 0.2, 15);
  DiscriminantProjection id;
  id.p = Matrix::identity(10);
  id.t = 10;
  for (const ImageSet& probe : s.test.sets) {
    const ProjectedDecision dec = project_classify(id, s.train, probe, Nfs{});
    const auto raw = class_distances(s.train, probe, Nfs{});
    EXPECT_EQ(dec.predicted, classify_ratio(raw));
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(dec.projected_ratio[k], raw[k].ratio, 1e-10 * raw[k].ratio);
  }
}

TEST(ProjectClassify, ProjectionOrthogonalToUnrelatedResidualsBlowsUp) {
  // With c = 3 the unrelated groups differ from every related group, so a
  // direction orthogonal to all c unrelated residuals in d = 4 still sees
  // the related ones.
  Rng rng(16);
  std::vector<ImageSet> sets;
  for (std::size_t k = 0; k < 3; ++k) sets.push_back({k, random_matrix(rng, 4, 3)});
  const Dataset train = Dataset::make(sets, 3);
  const ImageSet probe{0, random_matrix(rng, 4, 3)};
  const auto raw = class_distances(train, probe, Nfs{});

  Matrix basis(4, 4);
  for (std::size_t k = 0; k < 3; ++k)
    std::copy(raw[k].unrelated.residual.begin(), raw[k].unrelated.residual.end(), basis.col(k).begin());
  const Vector extra = random_vector(rng, 4);
  std::copy(extra.begin(), extra.end(), basis.col(3).begin());
  const Matrix q = orthonormalize(basis);

  DiscriminantProjection p;
  p.p = q.block_cols(3, 1);
  p.t = 1;
  const ProjectedDecision dec = project_classify(p, train, probe, Nfs{});
  for (std::size_t k = 0; k < 3; ++k) {
    const double num = projected_norm(p.p, raw[k].related.residual);
    ASSERT_LE(projected_norm(p.p, raw[k].unrelated.residual), 1e-13 * raw[k].unrelated.distance);
    ASSERT_GT(num, 1e-6);
    // Rounding leaves a denominator of order 1e-16 rather than exactly zero.
    EXPECT_GT(dec.projected_ratio[k], 1e8);
  }
}

TEST(ProjectClassify, ExactZeroDenominatorIsInfinite) {
  // Unrelated residuals are exactly zero in coordinate 2, related ones are not.
  // Class 0 carries a constant offset in coordinate 2; classes 1, 2 and the
  // probe sit at zero there.
  const Dataset train = Dataset::make(
      {make_set(0, {{1, 0, 5}, {0, 1, 5}, {2, 1, 5}}), make_set(1, {{3, 1, 0}, {1, 4, 0}, {2, 2, 0}}),
       make_set(2, {{0, 3, 0}, {5, 1, 0}, {1, 1, 0}})},
      3);
  const ImageSet probe = make_set(0, {{1, 2, 0}, {2, 0, 0}, {0, 0, 0}});
  DiscriminantProjection p;
  p.p = Matrix(3, 1);
  p.p(2, 0) = 1.0;
  p.t = 1;
  const ProjectedDecision dec = project_classify(p, train, probe, Nfs{});
  EXPECT_EQ(projected_norm(p.p, dec.raw[0].unrelated.residual), 0.0);
  EXPECT_GT(projected_norm(p.p, dec.raw[0].related.residual), 0.0);
  EXPECT_EQ(dec.projected_ratio[0], kInf);
}

TEST(ProjectClassify, ZeroOverZeroIsZero) {
  DiscriminantProjection p;
  p.p = Matrix(2, 1);
  p.p(0, 0) = 1.0;
  // All the data lives in coordinate 1, which P discards entirely.
  const Dataset train = Dataset::make(
      {make_set(0, {{0, 0}, {0, 1}}), make_set(1, {{0, 5}, {0, 7}})}, 2);
  const ImageSet probe = make_set(0, {{0, 2}, {0, 3}});
  const ProjectedDecision dec = project_classify(p, train, probe, Nfs{});
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(projected_norm(p.p, dec.raw[k].unrelated.residual), 0.0);
    EXPECT_EQ(dec.projected_ratio[k], 0.0);  // 0/0 pinned to 0
  }
  EXPECT_EQ(dec.predicted, 0u);
}

TEST(ProjectClassify, DimensionMismatchIsRejected) {
  const Split s = synthetic_split(3, 6, 0.1, 17);
  DiscriminantProjection p;
  p.p = Matrix::identity(5);
  EXPECT_THROW(project_classify(p, s.train, s.test.sets[0], Nfs{}), Error);
}

TEST(ProjectClassify, TrainedProjectionKeepsEasyProbesCorrect) {
  for (std::uint64_t seed : {18, 19, 20}) {
    const Split s = synthetic_split(3, 8, 0.02, seed, 0.5);
    const DiscriminantProjection p = dra_train(s.train, s.valid, DraOptions::defaults(Model::PE, Regularization::Kind::Eig));
    for (const ImageSet& probe : s.test.sets) {
      if (classify_ratio(class_distances(s.train, probe, Nfs{})) != probe.class_id) continue;
      EXPECT_EQ(project_classify(p, s.train, probe, Nfs{}).predicted, probe.class_id) << seed;
    }
  }
}

// --- dra_train ------------------------------------------------------------

TEST(DraTrain, ShapeAndUnitColumns) {
  const Split s = synthetic_split(2, 6, 0.1, 21);
  for (Model m : {Model::PE, Model::TE})
    for (auto kind : {Regularization::Kind::Eig, Regularization::Kind::Exp}) {
      const DiscriminantProjection p = dra_train(s.train, s.valid, DraOptions::defaults(m, kind));
      EXPECT_EQ(p.p.rows(), 6u);
      EXPECT_EQ(p.p.cols(), 2u);
      EXPECT_EQ(p.t, 2u);
      for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(vec_norm(p.p.col(k)), 1.0, 1e-12);
    }
}

TEST(DraTrain, DefaultsFollowModel) {
  const DraOptions pe = DraOptions::defaults(Model::PE, Regularization::Kind::Eig);
  const DraOptions te = DraOptions::defaults(Model::TE, Regularization::Kind::Eig);
  EXPECT_EQ(pe.reg.mu, 1e-3);
  EXPECT_EQ(te.reg.mu, 1e1);
  EXPECT_EQ(pe.rho, 1e-2);
  EXPECT_EQ(pe.t, 0u);
}

TEST(DraTrain, SingleClassTeIsRejected) {
  Rng rng(22);
  const Dataset one = Dataset::make({{0, random_matrix(rng, 4, 3)}}, 1);
  EXPECT_THROW(dra_train(one, one, DraOptions::defaults(Model::TE, Regularization::Kind::Eig)), Error);
}

TEST(DraTrain, IsBitReproducible) {
  const Split s = synthetic_split(5, 15, 0.1, 23);
  DraOptions opt = DraOptions::defaults(Model::TE, Regularization::Kind::Exp);
  const DiscriminantProjection a = dra_train(s.train, s.valid, opt);
  opt.threads = 4;
  const DiscriminantProjection b = dra_train(s.train, s.valid, opt);
  EXPECT_EQ(a.p, b.p);
  EXPECT_EQ(a.eigvals, b.eigvals);
}

TEST(DraTrain, RotationLeavesEigenvaluesAndLabels) {
  const Split s = synthetic_split(4, 10, 0.1, 24);
  Rng rng(24);
  const Matrix q = random_orthogonal(rng, 10);
  const DraOptions opt = DraOptions::defaults(Model::PE, Regularization::Kind::Eig);
  const DiscriminantProjection a = dra_train(s.train, s.valid, opt);
  const Dataset rtrain = transform_dataset(s.train, q, 1.0);
  const DiscriminantProjection b = dra_train(rtrain, transform_dataset(s.valid, q, 1.0), opt);
  for (std::size_t k = 0; k < a.eigvals.size(); ++k)
    EXPECT_NEAR(a.eigvals[k], b.eigvals[k], 1e-8 * std::max(1.0, a.eigvals[k]));
  for (const ImageSet& probe : s.test.sets)
    EXPECT_EQ(project_classify(a, s.train, probe, Nfs{}).predicted,
              project_classify(b, rtrain, transform_set(probe, q, 1.0), Nfs{}).predicted);

  // Residuals rotate with the data.
  const auto r0 = class_distances(s.train, s.test.sets[0], Nfs{});
  const auto r1 = class_distances(rtrain, transform_set(s.test.sets[0], q, 1.0), Nfs{});
  const Vector qe = matvec(q, r0[0].related.residual);
  EXPECT_LE(max_abs_diff(qe, r1[0].related.residual), 1e-10);
}

// --- PCA + DRA ------------------------------------------------------------

TEST(PcaDra, FullDimensionMatchesPlainDra) {
  for (std::uint64_t seed : {25, 26}) {
    const Split s = synthetic_split(4, 10, 0.1, seed);
    const DraOptions opt = DraOptions::defaults(Model::PE, Regularization::Kind::Eig);
    const DiscriminantProjection plain = dra_train(s.train, s.valid, opt);
    const PcaDraModel pca = pca_dra_train(s.train, s.valid, 10, opt);
    EXPECT_EQ(pca.pca.basis.cols(), 10u);
    for (const ImageSet& probe : s.test.sets)
      EXPECT_EQ(pca.classify(s.train, probe, Nfs{}).predicted,
                project_classify(plain, s.train, probe, Nfs{}).predicted);
  }
}

TEST(PcaDra, OneComponentOnLineData) {
  // Classes differ only along e1; other coordinates carry tiny noise.
  Rng rng(27);
  auto make = [&](std::size_t m) {
    std::vector<ImageSet> sets;
    for (std::size_t k = 0; k < 3; ++k) {
      Matrix x = random_matrix(rng, 6, m, 1e-3);
      for (std::size_t j = 0; j < m; ++j) x(0, j) += 5.0 * double(k) + 0.3 * rng.normal();
      sets.push_back({k, x});
    }
    return Dataset::make(sets, 3);
  };
  std::size_t ok_reduced = 0, ok_full = 0, total = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset train = make(4), valid = make(4), test = make(4);
    DraOptions reduced_opt = DraOptions::defaults(Model::PE, Regularization::Kind::Eig);
    reduced_opt.t = 1;
    const PcaDraModel reduced = pca_dra_train(train, valid, 1, reduced_opt);
    const DiscriminantProjection full =
        dra_train(train, valid, DraOptions::defaults(Model::PE, Regularization::Kind::Eig));
    for (const ImageSet& probe : test.sets) {
      ok_reduced += reduced.classify(train, probe, Nfs{}).predicted == probe.class_id;
      ok_full += project_classify(full, train, probe, Nfs{}).predicted == probe.class_id;
      ++total;
    }
  }
  RecordProperty("reduced_correct", std::to_string(ok_reduced));
  RecordProperty("full_correct", std::to_string(ok_full));
  EXPECT_EQ(ok_reduced, ok_full) << "of " << total;
}

TEST(PcaDra, TooManyComponentsIsRejected) {
  const Split s = synthetic_split(3, 6, 0.1, 28);
  try {
    pca_dra_train(s.train, s.valid, 7, DraOptions{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BadDimension);
  }
}

TEST(PcaDra, AutoDimensionIsCapped) {
  const Split s = synthetic_split(3, 6, 0.1, 29);
  EXPECT_EQ(pca_dra_train(s.train, s.valid, 0, DraOptions{}).pca.basis.cols(), 6u);
}
