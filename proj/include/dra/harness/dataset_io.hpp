#pragma once

// Feature CSV files: header `set_hint,class_id,f0,...,f{d-1}`, one sample
// per row. Class ids may be any non-negative integers; they are mapped to
// dense indices in ascending order.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dra/error.hpp"
#include "dra/linalg.hpp"
#include "dra/setcore.hpp"

namespace dra::harness {

struct LabeledPools {
  std::vector<long long> labels;                // file label of dense class k
  ClassPools pools;                             // pools[k]: d × samples
  std::vector<std::vector<std::string>> hints;  // per class, per sample
  std::size_t d = 0;

  std::size_t classes() const { return pools.size(); }
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline Error parse_error(std::size_t line, const std::string& what) {
  return Error(Errc::ParseError, "line " + std::to_string(line) + ": " + what);
}

inline double parse_double(std::string_view s, std::size_t line) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw parse_error(line, "invalid number '" + std::string(s) + "'");
  if (!std::isfinite(v)) throw parse_error(line, "non-finite value");
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Parses a feature CSV from a stream. `allow_missing_class` accepts empty
/// class_id cells (probe files), mapping them to label -1.
inline LabeledPools parse_dataset(std::istream& in, bool allow_missing_class = false) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw detail::parse_error(1, "no samples");
  ++lineno;
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const auto header = detail::split_commas(detail::trim(line));
  if (header.size() < 3 || detail::trim(header[0]) != "set_hint" ||
      detail::trim(header[1]) != "class_id")
    throw detail::parse_error(lineno, "header must be set_hint,class_id,f0,...");
  const std::size_t d = header.size() - 2;
  for (std::size_t i = 0; i < d; ++i)
    if (detail::trim(header[i + 2]) != "f" + std::to_string(i))
      throw detail::parse_error(lineno, "expected column f" + std::to_string(i));

  std::map<long long, std::vector<Vector>> columns;
  std::map<long long, std::vector<std::string>> hints;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view row = detail::trim(line);
    if (row.empty()) continue;
    const auto cells = detail::split_commas(row);
    if (cells.size() != d + 2)
      throw Error(Errc::InconsistentDimension,
                  "line " + std::to_string(lineno) + ": " + std::to_string(cells.size() - 2) +
                      " features, header declares " + std::to_string(d));
    long long label = -1;
    const std::string_view cls = detail::trim(cells[1]);
    if (cls.empty()) {
      if (!allow_missing_class) throw detail::parse_error(lineno, "missing class_id");
    } else {
      const auto [ptr, ec] = std::from_chars(cls.data(), cls.data() + cls.size(), label);
      if (ec != std::errc() || ptr != cls.data() + cls.size() || label < 0)
        throw detail::parse_error(lineno, "invalid class_id '" + std::string(cls) + "'");
    }
    Vector x(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = detail::parse_double(cells[i + 2], lineno);
    columns[label].push_back(std::move(x));
    hints[label].emplace_back(detail::trim(cells[0]));
  }
  if (columns.empty()) throw detail::parse_error(lineno, "no samples");

  LabeledPools out;
  out.d = d;
  for (auto& [label, cols] : columns) {
    out.labels.push_back(label);
    out.pools.push_back(Matrix::from_columns(cols));
    out.hints.push_back(std::move(hints[label]));
  }
  return out;
}

inline LabeledPools load_dataset(const std::string& path, bool allow_missing_class = false) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return parse_dataset(in, allow_missing_class);
}

inline void write_dataset(std::ostream& out, const LabeledPools& data) {
  out << "set_hint,class_id";
  for (std::size_t i = 0; i < data.d; ++i) out << ",f" << i;
  out << '\n';
  for (std::size_t k = 0; k < data.pools.size(); ++k) {
    const Matrix& pool = data.pools[k];
    for (std::size_t j = 0; j < pool.cols(); ++j) {
      if (k < data.hints.size() && j < data.hints[k].size()) out << data.hints[k][j];
      out << ',' << data.labels[k];
      for (std::size_t i = 0; i < pool.rows(); ++i) out << ',' << detail::format_double(pool(i, j));
      out << '\n';
    }
  }
}

inline void save_dataset(const std::string& path, const LabeledPools& data) {
  if (path.empty()) throw Error(Errc::IoError, "empty output path");
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write '" + path + "'");
  write_dataset(out, data);
  if (!out) throw Error(Errc::IoError, "write failed for '" + path + "'");
}

/// Wraps generated pools with labels 0..c-1 and empty hints.
inline LabeledPools label_pools(ClassPools pools) {
  LabeledPools out;
  out.d = pools.empty() ? 0 : pools.front().rows();
  for (std::size_t k = 0; k < pools.size(); ++k) {
    out.labels.push_back(static_cast<long long>(k));
    out.hints.emplace_back(pools[k].cols());
  }
  out.pools = std::move(pools);
  return out;
}

/// Builds train/valid/test datasets from the `train`, `valid` and `test`
/// set hints. Samples with other hints are ignored.
inline Split fixed_split(const LabeledPools& data) {
  std::vector<ImageSet> parts[3];
  const char* names[3] = {"train", "valid", "test"};
  for (std::size_t k = 0; k < data.pools.size(); ++k) {
    for (int part = 0; part < 3; ++part) {
      std::vector<Vector> cols;
      for (std::size_t j = 0; j < data.pools[k].cols(); ++j)
        if (data.hints[k][j] == names[part]) cols.push_back(data.pools[k].col_vector(j));
      if (cols.size() < 2)
        throw Error(Errc::NotEnoughSamples, "class label " + std::to_string(data.labels[k]) +
                                                " has " + std::to_string(cols.size()) + " '" +
                                                names[part] + "' samples, need at least 2");
      parts[part].push_back({k, Matrix::from_columns(cols)});
    }
  }
  Split s;
  s.train = Dataset::make(std::move(parts[0]), data.pools.size());
  s.valid = Dataset::make(std::move(parts[1]), data.pools.size());
  s.test = Dataset::make(std::move(parts[2]), data.pools.size());
  return s;
}

}  // namespace dra::harness
