#pragma once

// Experiment protocol: repeated seeded random splits, one prediction per
// test set, recognition rate (RR) and standard error (STE) over the
// repetitions.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "dra/dra.hpp"
#include "dra/error.hpp"
#include "dra/harness/dataset_io.hpp"
#include "dra/harness/synth.hpp"
#include "dra/parallel.hpp"
#include "dra/random.hpp"
#include "dra/residual.hpp"
#include "dra/setcore.hpp"

namespace dra::harness {

enum class Method {
  DraPeEig,
  DraPeExp,
  DraTeEig,
  DraTeExp,
  Nfs,
  DlrcBaseline,
  EuclidSelectBaseline,
  PcaDraPeEig,
  PcaDraPeExp,
  PcaDraTeEig,
  PcaDraTeExp,
};

struct MethodInfo {
  Method method;
  const char* name;
  bool trains;
  bool pca;
  Model model;
  Regularization::Kind reg;
};

inline constexpr MethodInfo kMethods[] = {
    {Method::DraPeEig, "DRA-PE-eig", true, false, Model::PE, Regularization::Kind::Eig},
    {Method::DraPeExp, "DRA-PE-exp", true, false, Model::PE, Regularization::Kind::Exp},
    {Method::DraTeEig, "DRA-TE-eig", true, false, Model::TE, Regularization::Kind::Eig},
    {Method::DraTeExp, "DRA-TE-exp", true, false, Model::TE, Regularization::Kind::Exp},
    {Method::Nfs, "NFS", false, false, Model::PE, Regularization::Kind::Eig},
    {Method::DlrcBaseline, "DLRC-baseline", false, false, Model::PE, Regularization::Kind::Eig},
    {Method::EuclidSelectBaseline, "EuclidSelect-baseline", false, false, Model::PE,
     Regularization::Kind::Eig},
    {Method::PcaDraPeEig, "PCA+DRA-PE-eig", true, true, Model::PE, Regularization::Kind::Eig},
    {Method::PcaDraPeExp, "PCA+DRA-PE-exp", true, true, Model::PE, Regularization::Kind::Exp},
    {Method::PcaDraTeEig, "PCA+DRA-TE-eig", true, true, Model::TE, Regularization::Kind::Eig},
    {Method::PcaDraTeExp, "PCA+DRA-TE-exp", true, true, Model::TE, Regularization::Kind::Exp},
};

inline const MethodInfo& info(Method m) {
  for (const MethodInfo& i : kMethods)
    if (i.method == m) return i;
  throw Error(Errc::ConfigError, "unknown method");
}

inline Method parse_method(const std::string& name) {
  for (const MethodInfo& i : kMethods)
    if (name == i.name) return i.method;
  throw Error(Errc::ConfigError, "unknown method '" + name + "'");
}

struct DatasetSource {
  enum class Kind { Synth, Csv };
  Kind kind = Kind::Synth;
  SynthParams synth;
  std::string path;
};

struct ExperimentConfig {
  Method method = Method::DraPeEig;
  SplitCounts counts;
  std::size_t repetitions = 30;
  std::uint64_t seed = 0;
  double rho = kDefaultRho;
  std::optional<double> mu;  // overrides mu_pe / mu_te when set
  double mu_pe = kDefaultMuPE;
  double mu_te = kDefaultMuTE;
  std::size_t t = 0;          // 0 = "auto" (number of classes)
  std::size_t pca_q = 0;      // 0 = min(500, d, samples); PCA+DRA methods only
  std::size_t select_count = 0;  // EuclidSelect count, 0 = m_k
  bool fixed_split = false;   // use set_hint train/valid/test instead of random splits
  DatasetSource dataset;

  double effective_mu() const {
    if (mu) return *mu;
    return info(method).model == Model::PE ? mu_pe : mu_te;
  }

  void validate() const {
    if (repetitions < 1) throw Error(Errc::ConfigError, "repetitions must be >= 1");
    if (counts.n_train < 2 || counts.n_valid < 2 || counts.n_test < 2)
      throw Error(Errc::ConfigError, "counts must each be >= 2");
    if (!(rho > 0.0)) throw Error(Errc::ConfigError, "rho must be > 0");
    if (!(effective_mu() > 0.0)) throw Error(Errc::ConfigError, "mu must be > 0");
  }
};

// ---------------------------------------------------------------------------
// JSON config

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                           const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw Error(Errc::ConfigError, "unknown field '" + it.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, std::string("field '") + key + "': " + e.what());
  }
}

inline std::size_t get_count(const nlohmann::json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw Error(Errc::ConfigError, std::string("field '") + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace detail

inline DatasetSource dataset_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::ConfigError, "dataset must be an object");
  DatasetSource src;
  const std::string kind = detail::get_or<std::string>(j, "source", "synth");
  if (kind == "csv") {
    detail::reject_unknown(j, {"source", "path"}, "dataset");
    src.kind = DatasetSource::Kind::Csv;
    src.path = detail::get_or<std::string>(j, "path", "");
    if (src.path.empty()) throw Error(Errc::ConfigError, "dataset.path is required for csv");
  } else if (kind == "synth") {
    detail::reject_unknown(j,
                           {"source", "c", "d", "samples_per_class", "variation_rank",
                            "noise_sigma", "class_sep", "variation_scale", "seed"},
                           "dataset");
    SynthParams& p = src.synth;
    p.c = detail::get_count(j, "c", p.c);
    p.d = detail::get_count(j, "d", p.d);
    p.samples_per_class = detail::get_count(j, "samples_per_class", p.samples_per_class);
    p.variation_rank = detail::get_count(j, "variation_rank", p.variation_rank);
    p.noise_sigma = detail::get_or<double>(j, "noise_sigma", p.noise_sigma);
    p.class_sep = detail::get_or<double>(j, "class_sep", p.class_sep);
    p.variation_scale = detail::get_or<double>(j, "variation_scale", p.variation_scale);
    p.seed = detail::get_or<std::uint64_t>(j, "seed", p.seed);
  } else {
    throw Error(Errc::ConfigError, "dataset.source must be 'synth' or 'csv'");
  }
  return src;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::ConfigError, "config must be a JSON object");
  detail::reject_unknown(j,
                         {"method", "counts", "repetitions", "seed", "rho", "mu", "mu_pe", "mu_te",
                          "t", "pca_q", "select_count", "split", "dataset"},
                         "config");
  ExperimentConfig cfg;
  cfg.method = parse_method(detail::get_or<std::string>(j, "method", "DRA-PE-eig"));
  if (j.contains("counts")) {
    const auto& c = j.at("counts");
    if (c.is_array()) {
      if (c.size() != 3) throw Error(Errc::ConfigError, "counts must have three entries");
      cfg.counts = {c[0].get<std::size_t>(), c[1].get<std::size_t>(), c[2].get<std::size_t>()};
    } else if (c.is_object()) {
      detail::reject_unknown(c, {"n_train", "n_valid", "n_test"}, "counts");
      cfg.counts.n_train = detail::get_count(c, "n_train", cfg.counts.n_train);
      cfg.counts.n_valid = detail::get_count(c, "n_valid", cfg.counts.n_valid);
      cfg.counts.n_test = detail::get_count(c, "n_test", cfg.counts.n_test);
    } else {
      throw Error(Errc::ConfigError, "counts must be an array or object");
    }
  }
  cfg.repetitions = detail::get_count(j, "repetitions", cfg.repetitions);
  cfg.seed = detail::get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.rho = detail::get_or<double>(j, "rho", cfg.rho);
  if (j.contains("mu") && !j.at("mu").is_null()) {
    if (j.at("mu").is_string()) {
      if (j.at("mu").get<std::string>() != "auto")
        throw Error(Errc::ConfigError, "mu must be a number or \"auto\"");
    } else {
      cfg.mu = detail::get_or<double>(j, "mu", 0.0);
    }
  }
  cfg.mu_pe = detail::get_or<double>(j, "mu_pe", cfg.mu_pe);
  cfg.mu_te = detail::get_or<double>(j, "mu_te", cfg.mu_te);
  if (j.contains("t") && !j.at("t").is_null()) {
    const auto& t = j.at("t");
    if (t.is_string()) {
      if (t.get<std::string>() != "auto") throw Error(Errc::ConfigError, "t must be an integer or \"auto\"");
      cfg.t = 0;
    } else {
      cfg.t = detail::get_count(j, "t", 0);
      if (cfg.t == 0) throw Error(Errc::ConfigError, "t must be >= 1");
    }
  }
  if (j.contains("pca_q") && j.at("pca_q").is_string()) {
    if (j.at("pca_q").get<std::string>() != "auto")
      throw Error(Errc::ConfigError, "pca_q must be an integer or \"auto\"");
  } else {
    cfg.pca_q = detail::get_count(j, "pca_q", 0);
  }
  cfg.select_count = detail::get_count(j, "select_count", 0);
  const std::string split = detail::get_or<std::string>(j, "split", "random");
  if (split != "random" && split != "fixed")
    throw Error(Errc::ConfigError, "split must be 'random' or 'fixed'");
  cfg.fixed_split = split == "fixed";
  if (j.contains("dataset")) cfg.dataset = dataset_from_json(j.at("dataset"));
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Running

struct RepetitionResult {
  std::size_t index = 0;
  std::uint64_t split_seed = 0;
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t classes = 0;
  std::vector<long long> predictions;  // predicted file label per test set, in class order
  double train_seconds = 0.0;
  double test_seconds = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::size_t classes = 0;
  std::size_t dimension = 0;
  std::size_t t_resolved = 0;
  std::vector<RepetitionResult> repetitions;
  double mean_rr = 0.0;
  double ste = 0.0;

  std::vector<double> accuracies() const {
    std::vector<double> a;
    for (const auto& r : repetitions) a.push_back(r.accuracy);
    return a;
  }
};

/// Mean and standard error (sample standard deviation / √R; 0 when R = 1).
inline std::pair<double, double> mean_and_ste(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

inline void aggregate(ExperimentReport& report) {
  std::tie(report.mean_rr, report.ste) = mean_and_ste(report.accuracies());
}

inline LabeledPools materialize(const DatasetSource& src) {
  if (src.kind == DatasetSource::Kind::Csv) return load_dataset(src.path);
  return label_pools(synth_generate(src.synth));
}

/// Trains (when the method learns a projection) and classifies each test
/// set of one split. Returns the predicted dense class per test set.
struct SplitOutcome {
  std::vector<std::size_t> predicted;
  double train_seconds = 0.0;
  double test_seconds = 0.0;
};

inline DraOptions dra_options(const ExperimentConfig& cfg) {
  const MethodInfo& mi = info(cfg.method);
  DraOptions opt;
  opt.model = mi.model;
  opt.reg = mi.reg == Regularization::Kind::Eig ? Regularization::eig(cfg.effective_mu())
                                                : Regularization::exp();
  opt.rho = cfg.rho;
  opt.t = cfg.t;
  opt.strategy = Nfs{};
  return opt;
}

inline SplitOutcome evaluate_split(const ExperimentConfig& cfg, const Split& split) {
  using clock = std::chrono::steady_clock;
  const MethodInfo& mi = info(cfg.method);
  SplitOutcome out;

  const auto t0 = clock::now();
  std::optional<DiscriminantProjection> proj;
  std::optional<PcaDraModel> pca_model;
  if (mi.trains) {
    if (mi.pca)
      pca_model = pca_dra_train(split.train, split.valid, cfg.pca_q, dra_options(cfg));
    else
      proj = dra_train(split.train, split.valid, dra_options(cfg));
  }
  const auto t1 = clock::now();

  const Strategy baseline_strategy =
      cfg.method == Method::EuclidSelectBaseline ? Strategy{EuclidSelect{cfg.select_count}}
                                                 : Strategy{Nfs{}};
  for (const ImageSet& probe : split.test.sets) {
    std::size_t label = 0;
    if (pca_model) {
      label = pca_model->classify(split.train, probe, Nfs{}, cfg.rho).predicted;
    } else if (proj) {
      label = project_classify(*proj, split.train, probe, Nfs{}, cfg.rho).predicted;
    } else {
      const auto dists = class_distances(split.train, probe, baseline_strategy, cfg.rho);
      label = cfg.method == Method::DlrcBaseline ? classify_related_only(dists)
                                                 : classify_ratio(dists);
    }
    out.predicted.push_back(label);
  }
  const auto t2 = clock::now();
  out.train_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.test_seconds = std::chrono::duration<double>(t2 - t1).count();
  return out;
}

/// Seed used for the split of repetition r.
inline std::uint64_t split_seed(std::uint64_t seed, std::size_t repetition) {
  return derive_seed(seed, repetition);
}

/// Runs every repetition on already-loaded data. Repetitions are spread
/// over `threads` workers and gathered in repetition order.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const LabeledPools& data,
                                       std::size_t threads = 1) {
  cfg.validate();
  if (data.classes() < 2) throw Error(Errc::SingleClass, "dataset has fewer than 2 classes");

  ExperimentReport report;
  report.config = cfg;
  report.classes = data.classes();
  report.dimension = data.d;
  report.t_resolved = info(cfg.method).trains ? (cfg.t == 0 ? data.classes() : cfg.t) : 0;
  report.repetitions.resize(cfg.repetitions);

  parallel_for(cfg.repetitions, threads, [&](std::size_t r) {
    RepetitionResult& rep = report.repetitions[r];
    rep.index = r;
    rep.split_seed = split_seed(cfg.seed, r);
    try {
      const Split split = cfg.fixed_split ? fixed_split(data)
                                          : random_split(data.pools, cfg.counts, rep.split_seed);
      const SplitOutcome outcome = evaluate_split(cfg, split);
      rep.classes = split.test.sets.size();
      for (std::size_t i = 0; i < outcome.predicted.size(); ++i) {
        rep.predictions.push_back(data.labels[outcome.predicted[i]]);
        if (outcome.predicted[i] == split.test.sets[i].class_id) ++rep.correct;
      }
      rep.accuracy = static_cast<double>(rep.correct) / static_cast<double>(rep.classes);
      rep.train_seconds = outcome.train_seconds;
      rep.test_seconds = outcome.test_seconds;
    } catch (const Error& e) {
      throw Error(e.code(), "repetition " + std::to_string(r) + ": " + e.detail());
    }
  });
  aggregate(report);
  return report;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg, std::size_t threads = 1) {
  return run_experiment(cfg, materialize(cfg.dataset), threads);
}

}  // namespace dra::harness
