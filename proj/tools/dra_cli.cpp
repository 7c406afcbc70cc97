// Command-line front end: synth | run | classify | report.
//
// Exit codes: 0 success, 2 config/parse error, 3 numerical failure,
// 4 I/O error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dra/dra.hpp"
#include "dra/harness.hpp"

namespace fs = std::filesystem;
using namespace dra;
using namespace dra::harness;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

int exit_code(Errc e) {
  switch (e) {
    case Errc::NotPositiveDefinite:
    case Errc::NonFinite:
    case Errc::DegenerateData:
      return kExitNumeric;
    case Errc::IoError:
      return kExitIo;
    default:
      return kExitConfig;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  write_text_file(path, text);
}

struct SynthArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> classes, dim, samples, rank;
  std::optional<double> noise, sep, variation_scale;
};

int cmd_synth(const SynthArgs& a) {
  SynthParams p;
  if (!a.config.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(a.config));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::ConfigError, e.what());
    }
    // Either a bare dataset object or a full experiment config.
    const nlohmann::json& ds = j.contains("dataset") ? j.at("dataset") : j;
    const DatasetSource src = dataset_from_json(ds);
    if (src.kind != DatasetSource::Kind::Synth)
      throw Error(Errc::ConfigError, "synth needs a synthetic dataset description");
    p = src.synth;
  }
  if (a.classes) p.c = *a.classes;
  if (a.dim) p.d = *a.dim;
  if (a.samples) p.samples_per_class = *a.samples;
  if (a.rank) p.variation_rank = *a.rank;
  if (a.noise) p.noise_sigma = *a.noise;
  if (a.sep) p.class_sep = *a.sep;
  if (a.variation_scale) p.variation_scale = *a.variation_scale;
  if (a.seed) p.seed = *a.seed;

  const LabeledPools data = label_pools(synth_generate(p));
  if (a.out.empty() || a.out == "-") {
    write_dataset(std::cout, data);
  } else {
    save_dataset(a.out, data);
  }
  return kExitOk;
}

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "json";
  std::size_t threads = 1;
  std::string raw_dir;
};

int cmd_run(const RunArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  const ReportFormat fmt = parse_format(a.format);
  const ExperimentReport rep = run_experiment(cfg, a.threads);
  if (!a.raw_dir.empty()) {
    std::error_code ec;
    fs::create_directories(a.raw_dir, ec);
    if (ec) throw Error(Errc::IoError, "cannot create '" + a.raw_dir + "': " + ec.message());
    for (std::size_t r = 0; r < rep.repetitions.size(); ++r)
      write_text_file((fs::path(a.raw_dir) / repetition_file_name(r)).string(),
                      repetition_file_json(rep, r));
  }
  write_output(a.out, render_report(rep, fmt));
  return kExitOk;
}

struct ClassifyArgs {
  std::string config;
  std::string train_dir;
  std::string probe;
  std::string out;
  std::size_t threads = 1;
};

int cmd_classify(const ClassifyArgs& a) {
  const ExperimentConfig cfg = load_config(a.config);
  const MethodInfo& mi = info(cfg.method);

  const LabeledPools train_pools = load_dataset((fs::path(a.train_dir) / "train.csv").string());
  std::vector<ImageSet> train_sets;
  for (std::size_t k = 0; k < train_pools.classes(); ++k)
    train_sets.push_back({k, train_pools.pools[k]});
  const Dataset train = Dataset::make(std::move(train_sets), train_pools.classes());

  const LabeledPools probe_pools = load_dataset(a.probe, /*allow_missing_class=*/true);
  if (probe_pools.d != train.d)
    throw Error(Errc::InconsistentDimension, "probe dimension " + std::to_string(probe_pools.d) +
                                                 " vs training " + std::to_string(train.d));
  std::vector<Vector> probe_cols;
  for (const Matrix& m : probe_pools.pools)
    for (std::size_t j = 0; j < m.cols(); ++j) probe_cols.push_back(m.col_vector(j));
  const ImageSet probe{0, Matrix::from_columns(probe_cols)};

  std::size_t predicted = 0;
  Vector decision;
  if (mi.trains) {
    const fs::path valid_path = fs::path(a.train_dir) / "valid.csv";
    const LabeledPools valid_pools = load_dataset(valid_path.string());
    if (valid_pools.labels != train_pools.labels)
      throw Error(Errc::ClassMismatch, "train.csv and valid.csv have different class labels");
    std::vector<ImageSet> valid_sets;
    for (std::size_t k = 0; k < valid_pools.classes(); ++k)
      valid_sets.push_back({k, valid_pools.pools[k]});
    const Dataset valid = Dataset::make(std::move(valid_sets), valid_pools.classes());
    DraOptions opt = dra_options(cfg);
    opt.threads = a.threads;
    ProjectedDecision dec;
    if (mi.pca) {
      const PcaDraModel model = pca_dra_train(train, valid, cfg.pca_q, opt);
      dec = model.classify(train, probe, Nfs{}, cfg.rho, a.threads);
    } else {
      const DiscriminantProjection proj = dra_train(train, valid, opt);
      dec = project_classify(proj, train, probe, Nfs{}, cfg.rho, a.threads);
    }
    predicted = dec.predicted;
    decision = dec.projected_ratio;
  } else {
    const Strategy strategy = cfg.method == Method::EuclidSelectBaseline
                                  ? Strategy{EuclidSelect{cfg.select_count}}
                                  : Strategy{Nfs{}};
    const auto dists = class_distances(train, probe, strategy, cfg.rho, a.threads);
    const bool related_only = cfg.method == Method::DlrcBaseline;
    predicted = related_only ? classify_related_only(dists) : classify_ratio(dists);
    for (const auto& d : dists) decision.push_back(related_only ? d.related.distance : d.ratio);
  }

  std::cout << train_pools.labels[predicted] << '\n';
  if (!a.out.empty()) {
    nlohmann::ordered_json j;
    j["method"] = mi.name;
    j["predicted"] = train_pools.labels[predicted];
    j["labels"] = train_pools.labels;
    nlohmann::ordered_json scores = nlohmann::ordered_json::array();
    for (double v : decision) scores.push_back(std::isfinite(v) ? nlohmann::ordered_json(v) : nullptr);
    j["decision"] = scores;
    write_text_file(a.out, j.dump(2) + "\n");
  }
  return kExitOk;
}

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string format = "json";
};

int cmd_report(const ReportArgs& a) {
  std::vector<std::string> files;
  for (const std::string& in : a.inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && e.path().extension() == ".json") found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(in);
    }
  }
  std::vector<std::string> texts;
  for (const std::string& f : files) texts.push_back(read_file(f));
  const ExperimentReport rep = aggregate_repetition_files(texts);
  write_output(a.out, render_report(rep, parse_format(a.format)));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discriminant residual analysis for image-set classification"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic dataset CSV");
  s->add_option("--config", synth.config, "JSON dataset description (or experiment config)");
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--out", synth.out, "Output CSV path (default: stdout)");
  s->add_option("--classes", synth.classes, "Number of classes");
  s->add_option("--dim", synth.dim, "Feature dimension");
  s->add_option("--samples", synth.samples, "Samples per class");
  s->add_option("--rank", synth.rank, "Rank of the shared variation subspace");
  s->add_option("--noise", synth.noise, "Isotropic noise standard deviation");
  s->add_option("--sep", synth.sep, "Pairwise distance between class means");
  s->add_option("--variation-scale", synth.variation_scale,
                "Variation coefficient std, in units of --sep");

  RunArgs run;
  auto* r = app.add_subcommand("run", "Run an experiment config and emit a report");
  r->add_option("--config", run.config, "Experiment config JSON")->required();
  r->add_option("--seed", run.seed, "Override the config seed");
  r->add_option("--out", run.out, "Report path (default: stdout)");
  r->add_option("--format", run.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  r->add_option("--threads", run.threads, "Worker threads (0 = auto)");
  r->add_option("--raw-dir", run.raw_dir, "Also write one JSON file per repetition here");

  ClassifyArgs cls;
  auto* c = app.add_subcommand("classify", "Classify one probe set");
  c->add_option("--config", cls.config, "Experiment config JSON (method and hyper-parameters)")
      ->required();
  c->add_option("--train", cls.train_dir, "Directory holding train.csv (and valid.csv)")->required();
  c->add_option("--probe", cls.probe, "Probe set CSV (class_id may be empty)")->required();
  c->add_option("--out", cls.out, "Optional JSON file with per-class decision values");
  c->add_option("--threads", cls.threads, "Worker threads (0 = auto)");

  ReportArgs rpt;
  auto* p = app.add_subcommand("report", "Re-aggregate raw repetition files");
  p->add_option("inputs", rpt.inputs, "Repetition JSON files or directories")->required();
  p->add_option("--out", rpt.out, "Report path (default: stdout)");
  p->add_option("--format", rpt.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*s) return cmd_synth(synth);
    if (*r) return cmd_run(run);
    if (*c) return cmd_classify(cls);
    if (*p) return cmd_report(rpt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitConfig;
}
