#pragma once

// Labeled image sets, the anchored difference transform, unrelated-group
// construction and seeded train/validation/test splits.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "dra/error.hpp"
#include "dra/linalg.hpp"
#include "dra/random.hpp"

namespace dra {

/// One labeled set; each column of `samples` is a feature vector.
struct ImageSet {
  std::size_t class_id = 0;
  Matrix samples;

  std::size_t m() const noexcept { return samples.cols(); }
  std::size_t dim() const noexcept { return samples.rows(); }
};

/// Sets spanning classes [0, c) with a common feature dimension d.
struct Dataset {
  std::vector<ImageSet> sets;
  std::size_t c = 0;
  std::size_t d = 0;

  /// Validates the invariants and fills in c and d.
  static Dataset make(std::vector<ImageSet> sets, std::size_t c) {
    Dataset ds;
    ds.c = c;
    ds.d = sets.empty() ? 0 : sets.front().dim();
    for (const ImageSet& s : sets) {
      if (s.class_id >= c)
        throw Error(Errc::ClassMismatch, "class id " + std::to_string(s.class_id) +
                                             " outside [0, " + std::to_string(c) + ")");
      if (s.dim() != ds.d)
        throw Error(Errc::InconsistentDimension, "set of class " + std::to_string(s.class_id) +
                                                     " has dimension " + std::to_string(s.dim()) +
                                                     ", expected " + std::to_string(ds.d));
      if (!s.samples.all_finite())
        throw Error(Errc::NonFinite, "set of class " + std::to_string(s.class_id));
    }
    ds.sets = std::move(sets);
    return ds;
  }

  bool has_class(std::size_t k) const {
    return std::any_of(sets.begin(), sets.end(), [k](const ImageSet& s) { return s.class_id == k; });
  }

  std::size_t total_samples() const {
    std::size_t n = 0;
    for (const ImageSet& s : sets) n += s.m();
    return n;
  }
};

/// Per-class sample pools; pools[k] is d × (available samples of class k).
using ClassPools = std::vector<Matrix>;

/// X̂ = [x₁ − x_m, …, x_{m−1} − x_m] together with the anchor x_m.
struct AnchoredDesign {
  Matrix design;
  Vector anchor;
};

/// Subtracts the last stored column from all the others.
inline AnchoredDesign difference_transform(const ImageSet& s) {
  const std::size_t m = s.m();
  if (m < 2)
    throw Error(Errc::TooFewSamples, "set of class " + std::to_string(s.class_id) + " has " +
                                         std::to_string(m) + " sample(s), need at least 2");
  AnchoredDesign out;
  out.anchor = s.samples.col_vector(m - 1);
  out.design = Matrix(s.dim(), m - 1);
  for (std::size_t j = 0; j + 1 < m; ++j) {
    auto src = s.samples.col(j);
    auto dst = out.design.col(j);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] - out.anchor[i];
  }
  return out;
}

namespace detail {

inline Matrix concat_columns(std::span<const Matrix* const> parts, std::size_t d) {
  std::size_t total = 0;
  for (const Matrix* p : parts) total += p->cols();
  Matrix out(d, total);
  std::size_t j = 0;
  for (const Matrix* p : parts)
    for (std::size_t c = 0; c < p->cols(); ++c, ++j)
      std::copy(p->col(c).begin(), p->col(c).end(), out.col(j).begin());
  return out;
}

// Sets of the dataset in (class_id, stored position) order, optionally
// filtered by a predicate on the class id.
template <typename Pred>
std::vector<const ImageSet*> sets_in_class_order(const Dataset& ds, Pred keep) {
  std::vector<const ImageSet*> out;
  for (const ImageSet& s : ds.sets)
    if (keep(s.class_id)) out.push_back(&s);
  std::stable_sort(out.begin(), out.end(),
                   [](const ImageSet* a, const ImageSet* b) { return a->class_id < b->class_id; });
  return out;
}

inline void require_multi_class(const Dataset& ds) {
  if (ds.c < 2)
    throw Error(Errc::SingleClass, "unrelated groups need at least 2 classes, got " +
                                       std::to_string(ds.c));
}

}  // namespace detail

/// All samples of class k (its sets concatenated in stored order).
inline ImageSet class_group(const Dataset& ds, std::size_t k) {
  auto sets = detail::sets_in_class_order(ds, [k](std::size_t id) { return id == k; });
  if (sets.empty())
    throw Error(Errc::ClassMismatch, "no set for class " + std::to_string(k));
  std::vector<const Matrix*> parts;
  for (const ImageSet* s : sets) parts.push_back(&s->samples);
  return {k, detail::concat_columns(parts, ds.d)};
}

/// Nonfeasance strategy: every training sample not labeled k, in
/// class-then-sample order. Independent of any probe.
inline ImageSet nfs_unrelated(const Dataset& train, std::size_t k) {
  detail::require_multi_class(train);
  auto sets = detail::sets_in_class_order(train, [k](std::size_t id) { return id != k; });
  std::vector<const Matrix*> parts;
  for (const ImageSet* s : sets) parts.push_back(&s->samples);
  return {k, detail::concat_columns(parts, train.d)};
}

namespace detail {

inline Vector mean_column(const ImageSet& s) {
  Vector center(s.dim(), 0.0);
  for (std::size_t j = 0; j < s.m(); ++j)
    for (std::size_t i = 0; i < s.dim(); ++i) center[i] += s.samples(i, j);
  for (double& v : center) v /= static_cast<double>(s.m());
  return center;
}

}  // namespace detail

/// Candidate columns outside class k, in (class_id, sample index) order,
/// with their Euclidean distance to the probe's mean vector.
struct SelectionCandidates {
  std::vector<std::span<const double>> columns;
  Vector distances;
};

inline SelectionCandidates unrelated_candidates(const Dataset& train, std::size_t k,
                                                const ImageSet& probe) {
  detail::require_multi_class(train);
  if (probe.m() == 0) throw Error(Errc::TooFewSamples, "empty probe");
  if (probe.dim() != train.d) throw Error(Errc::DimensionMismatch, "probe dimension");
  const Vector center = detail::mean_column(probe);

  SelectionCandidates out;
  for (const ImageSet* s :
       detail::sets_in_class_order(train, [k](std::size_t id) { return id != k; })) {
    for (std::size_t j = 0; j < s->m(); ++j) {
      auto col = s->samples.col(j);
      double acc = 0.0;
      for (std::size_t i = 0; i < col.size(); ++i)
        acc += (col[i] - center[i]) * (col[i] - center[i]);
      out.columns.push_back(col);
      out.distances.push_back(std::sqrt(acc));
    }
  }
  return out;
}

/// The `count` samples outside class k nearest (Euclidean) to the probe's
/// mean vector. Ties go to the smaller (class_id, sample index). The chosen
/// columns are returned in (class_id, sample index) order, so selecting
/// everything reproduces nfs_unrelated column for column.
inline ImageSet euclid_select_unrelated(const Dataset& train, std::size_t k,
                                        const ImageSet& probe, std::size_t count) {
  const SelectionCandidates cand = unrelated_candidates(train, k, probe);
  const std::size_t available = cand.columns.size();
  if (count == 0 || count > available)
    throw Error(Errc::NotEnoughSamples, "requested " + std::to_string(count) +
                                            " unrelated samples, " + std::to_string(available) +
                                            " available");

  std::vector<std::size_t> rank(available);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return cand.distances[a] < cand.distances[b];
  });
  rank.resize(count);
  std::sort(rank.begin(), rank.end());

  ImageSet out{k, Matrix(train.d, count)};
  for (std::size_t j = 0; j < count; ++j)
    std::copy(cand.columns[rank[j]].begin(), cand.columns[rank[j]].end(),
              out.samples.col(j).begin());
  return out;
}

struct SplitCounts {
  std::size_t n_train = 3;
  std::size_t n_valid = 3;
  std::size_t n_test = 3;

  std::size_t total() const { return n_train + n_valid + n_test; }
};

struct Split {
  Dataset train;
  Dataset valid;
  Dataset test;
  // Pool column indices drawn per class, in train/valid/test order.
  std::vector<std::vector<std::size_t>> drawn;
};

/// Draws n_train + n_valid + n_test distinct samples per class (one
/// Fisher-Yates shuffle per class, classes in index order) and cuts them in
/// draw order. Deterministic in the seed.
inline Split random_split(const ClassPools& pools, const SplitCounts& counts, std::uint64_t seed) {
  if (counts.n_train < 2 || counts.n_valid < 2 || counts.n_test < 2)
    throw Error(Errc::ConfigError, "split counts must each be at least 2");
  Rng rng(seed);
  std::vector<ImageSet> tr, va, te;
  Split out;
  for (std::size_t k = 0; k < pools.size(); ++k) {
    const Matrix& pool = pools[k];
    if (pool.cols() < counts.total())
      throw Error(Errc::NotEnoughSamples, "class " + std::to_string(k) + " has " +
                                              std::to_string(pool.cols()) + " samples, need " +
                                              std::to_string(counts.total()));
    std::vector<std::size_t> idx(pool.cols());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx);
    idx.resize(counts.total());

    auto take = [&](std::size_t first, std::size_t n) {
      ImageSet s{k, Matrix(pool.rows(), n)};
      for (std::size_t j = 0; j < n; ++j)
        std::copy(pool.col(idx[first + j]).begin(), pool.col(idx[first + j]).end(),
                  s.samples.col(j).begin());
      return s;
    };
    tr.push_back(take(0, counts.n_train));
    va.push_back(take(counts.n_train, counts.n_valid));
    te.push_back(take(counts.n_train + counts.n_valid, counts.n_test));
    out.drawn.push_back(std::move(idx));
  }
  out.train = Dataset::make(std::move(tr), pools.size());
  out.valid = Dataset::make(std::move(va), pools.size());
  out.test = Dataset::make(std::move(te), pools.size());
  return out;
}

}  // namespace dra
