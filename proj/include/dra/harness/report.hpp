#pragma once

// Machine-readable experiment reports. Field order is fixed and floats are
// written with 17 significant digits so a report round-trips exactly.
// Everything that depends on wall-clock time lives under "timing".

#include <algorithm>
#include <concepts>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dra/error.hpp"
#include "dra/harness/experiment.hpp"

namespace dra::harness {

enum class ReportFormat { Json, Csv };

inline ReportFormat parse_format(const std::string& s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw Error(Errc::ConfigError, "format must be json or csv, got '" + s + "'");
}

namespace detail {

inline std::string fmt17(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", ch);
          out += buf;
        } else {
          out += ch;
        }
    }
  }
  return out + "\"";
}

// Minimal pretty-printing writer; callers emit keys in the order they want.
class JsonWriter {
 public:
  std::string str() const { return out_.str() + "\n"; }

  void begin_object() { open('{'); }
  void end_object() { close('}'); }
  void begin_array() { open('['); }
  void end_array() { close(']'); }

  void key(const std::string& k) {
    separator();
    out_ << quote(k) << ": ";
    after_key_ = true;
  }

  void raw(const std::string& token) {
    separator();
    out_ << token;
  }
  void value(double v) { raw(fmt17(v)); }
  void value(const std::string& s) { raw(quote(s)); }
  void value(const char* s) { raw(quote(s)); }
  template <std::unsigned_integral T>
  void value(T v) { raw(std::to_string(v)); }
  void value(long long v) { raw(std::to_string(v)); }

  // Arrays of scalars on one line.
  template <typename T>
  void inline_array(const std::vector<T>& xs) {
    separator();
    out_ << '[';
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) out_ << ", ";
      if constexpr (std::is_floating_point_v<T>)
        out_ << fmt17(xs[i]);
      else
        out_ << xs[i];
    }
    out_ << ']';
  }

 private:
  void separator() {
    if (after_key_) {
      after_key_ = false;
      return;
    }
    if (!first_.empty()) {
      if (!first_.back()) out_ << ',';
      first_.back() = false;
      newline();
    }
  }
  void open(char ch) {
    separator();
    out_ << ch;
    first_.push_back(true);
  }
  void close(char ch) {
    const bool empty = first_.back();
    first_.pop_back();
    if (!empty) newline();
    out_ << ch;
  }
  void newline() {
    out_ << '\n';
    for (std::size_t i = 0; i < first_.size(); ++i) out_ << "  ";
  }

  std::ostringstream out_;
  std::vector<bool> first_;
  bool after_key_ = false;
};

inline void write_config(JsonWriter& w, const ExperimentConfig& cfg) {
  const MethodInfo& mi = info(cfg.method);
  w.begin_object();
  w.key("method"); w.value(mi.name);
  w.key("counts");
  w.begin_object();
  w.key("n_train"); w.value(cfg.counts.n_train);
  w.key("n_valid"); w.value(cfg.counts.n_valid);
  w.key("n_test"); w.value(cfg.counts.n_test);
  w.end_object();
  w.key("repetitions"); w.value(cfg.repetitions);
  w.key("seed"); w.value(cfg.seed);
  w.key("rho"); w.value(cfg.rho);
  w.key("mu"); w.value(cfg.effective_mu());
  w.key("mu_pe"); w.value(cfg.mu_pe);
  w.key("mu_te"); w.value(cfg.mu_te);
  w.key("t");
  if (cfg.t == 0) w.value("auto"); else w.value(cfg.t);
  w.key("pca_q");
  if (cfg.pca_q == 0) w.value("auto"); else w.value(cfg.pca_q);
  w.key("select_count"); w.value(cfg.select_count);
  w.key("split"); w.value(cfg.fixed_split ? "fixed" : "random");
  w.key("dataset");
  w.begin_object();
  if (cfg.dataset.kind == DatasetSource::Kind::Csv) {
    w.key("source"); w.value("csv");
    w.key("path"); w.value(cfg.dataset.path);
  } else {
    const SynthParams& p = cfg.dataset.synth;
    w.key("source"); w.value("synth");
    w.key("c"); w.value(p.c);
    w.key("d"); w.value(p.d);
    w.key("samples_per_class"); w.value(p.samples_per_class);
    w.key("variation_rank"); w.value(p.variation_rank);
    w.key("noise_sigma"); w.value(p.noise_sigma);
    w.key("class_sep"); w.value(p.class_sep);
    w.key("variation_scale"); w.value(p.variation_scale);
    w.key("seed"); w.value(p.seed);
  }
  w.end_object();
  w.end_object();
}

inline void write_repetition(JsonWriter& w, const RepetitionResult& r) {
  w.begin_object();
  w.key("index"); w.value(r.index);
  w.key("split_seed"); w.value(r.split_seed);
  w.key("accuracy"); w.value(r.accuracy);
  w.key("correct"); w.value(r.correct);
  w.key("classes"); w.value(r.classes);
  w.key("predictions"); w.inline_array(r.predictions);
  w.end_object();
}

}  // namespace detail

/// Resolved configuration as JSON text (same field names the config parser
/// accepts).
inline std::string config_to_json(const ExperimentConfig& cfg) {
  detail::JsonWriter w;
  detail::write_config(w, cfg);
  return w.str();
}

inline std::string report_to_json(const ExperimentReport& rep) {
  detail::JsonWriter w;
  w.begin_object();
  w.key("config");
  detail::write_config(w, rep.config);
  w.key("classes"); w.value(rep.classes);
  w.key("dimension"); w.value(rep.dimension);
  w.key("t_resolved"); w.value(rep.t_resolved);
  w.key("accuracies"); w.inline_array(rep.accuracies());
  w.key("mean_rr"); w.value(rep.mean_rr);
  w.key("ste"); w.value(rep.ste);
  w.key("repetitions");
  w.begin_array();
  for (const auto& r : rep.repetitions) detail::write_repetition(w, r);
  w.end_array();
  std::vector<double> train, test;
  double train_total = 0.0, test_total = 0.0;
  for (const auto& r : rep.repetitions) {
    train.push_back(r.train_seconds);
    test.push_back(r.test_seconds);
    train_total += r.train_seconds;
    test_total += r.test_seconds;
  }
  w.key("timing");
  w.begin_object();
  w.key("train_seconds"); w.inline_array(train);
  w.key("test_seconds"); w.inline_array(test);
  w.key("total_train_seconds"); w.value(train_total);
  w.key("total_test_seconds"); w.value(test_total);
  w.end_object();
  w.end_object();
  return w.str();
}

/// R data rows, then `mean` and `ste` summary rows.
inline std::string report_to_csv(const ExperimentReport& rep) {
  std::ostringstream out;
  out << "row,split_seed,accuracy,correct,classes,train_seconds,test_seconds\n";
  for (const auto& r : rep.repetitions)
    out << r.index << ',' << r.split_seed << ',' << detail::fmt17(r.accuracy) << ',' << r.correct
        << ',' << r.classes << ',' << detail::fmt17(r.train_seconds) << ','
        << detail::fmt17(r.test_seconds) << '\n';
  out << "mean,," << detail::fmt17(rep.mean_rr) << ",,,,\n";
  out << "ste,," << detail::fmt17(rep.ste) << ",,,,\n";
  return out.str();
}

inline std::string render_report(const ExperimentReport& rep, ReportFormat fmt) {
  return fmt == ReportFormat::Json ? report_to_json(rep) : report_to_csv(rep);
}

inline void write_text_file(const std::string& path, const std::string& text) {
  if (path.empty()) throw Error(Errc::IoError, "empty output path");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(Errc::IoError, "write failed for '" + path + "'");
}

inline void emit_report(const ExperimentReport& rep, ReportFormat fmt, const std::string& path) {
  write_text_file(path, render_report(rep, fmt));
}

// ---------------------------------------------------------------------------
// Parsing reports back

inline RepetitionResult repetition_from_json(const nlohmann::json& j) {
  RepetitionResult r;
  r.index = j.at("index").get<std::size_t>();
  r.split_seed = j.at("split_seed").get<std::uint64_t>();
  r.accuracy = j.at("accuracy").get<double>();
  r.correct = j.at("correct").get<std::size_t>();
  r.classes = j.at("classes").get<std::size_t>();
  r.predictions = j.at("predictions").get<std::vector<long long>>();
  if (j.contains("train_seconds")) r.train_seconds = j.at("train_seconds").get<double>();
  if (j.contains("test_seconds")) r.test_seconds = j.at("test_seconds").get<double>();
  return r;
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  try {
    ExperimentReport rep;
    rep.config = config_from_json(j.at("config"));
    rep.classes = j.at("classes").get<std::size_t>();
    rep.dimension = j.at("dimension").get<std::size_t>();
    rep.t_resolved = j.at("t_resolved").get<std::size_t>();
    rep.mean_rr = j.at("mean_rr").get<double>();
    rep.ste = j.at("ste").get<double>();
    for (const auto& r : j.at("repetitions")) rep.repetitions.push_back(repetition_from_json(r));
    if (j.contains("timing")) {
      const auto& t = j.at("timing");
      const auto train = t.at("train_seconds").get<std::vector<double>>();
      const auto test = t.at("test_seconds").get<std::vector<double>>();
      for (std::size_t i = 0; i < rep.repetitions.size(); ++i) {
        if (i < train.size()) rep.repetitions[i].train_seconds = train[i];
        if (i < test.size()) rep.repetitions[i].test_seconds = test[i];
      }
    }
    return rep;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("malformed report: ") + e.what());
  }
}

inline ExperimentReport parse_report(const std::string& text) {
  try {
    return report_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ParseError, std::string("report is not valid JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Raw per-repetition files, re-aggregated by `report`

inline std::string repetition_file_json(const ExperimentReport& rep, std::size_t r) {
  const RepetitionResult& x = rep.repetitions.at(r);
  detail::JsonWriter w;
  w.begin_object();
  w.key("config");
  detail::write_config(w, rep.config);
  w.key("classes"); w.value(rep.classes);
  w.key("dimension"); w.value(rep.dimension);
  w.key("t_resolved"); w.value(rep.t_resolved);
  w.key("repetition");
  detail::write_repetition(w, x);
  w.key("timing");
  w.begin_object();
  w.key("train_seconds"); w.value(x.train_seconds);
  w.key("test_seconds"); w.value(x.test_seconds);
  w.end_object();
  w.end_object();
  return w.str();
}

inline std::string repetition_file_name(std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep_%05zu.json", r);
  return buf;
}

/// Combines raw repetition files into one report. All files must carry the
/// same configuration; repetitions are ordered by index.
inline ExperimentReport aggregate_repetition_files(const std::vector<std::string>& texts) {
  if (texts.empty()) throw Error(Errc::ConfigError, "no repetition files given");
  ExperimentReport rep;
  nlohmann::json first_config;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(texts[i]);
      if (i == 0) {
        first_config = j.at("config");
        rep.config = config_from_json(first_config);
        rep.classes = j.at("classes").get<std::size_t>();
        rep.dimension = j.at("dimension").get<std::size_t>();
        rep.t_resolved = j.at("t_resolved").get<std::size_t>();
      } else if (j.at("config") != first_config) {
        throw Error(Errc::ConfigError, "repetition file " + std::to_string(i) +
                                           " was produced by a different config");
      }
      RepetitionResult r = repetition_from_json(j.at("repetition"));
      if (j.contains("timing")) {
        r.train_seconds = j.at("timing").at("train_seconds").get<double>();
        r.test_seconds = j.at("timing").at("test_seconds").get<double>();
      }
      rep.repetitions.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError,
                  "repetition file " + std::to_string(i) + ": " + std::string(e.what()));
    }
  }
  std::sort(rep.repetitions.begin(), rep.repetitions.end(),
            [](const auto& a, const auto& b) { return a.index < b.index; });
  for (std::size_t i = 1; i < rep.repetitions.size(); ++i)
    if (rep.repetitions[i].index == rep.repetitions[i - 1].index)
      throw Error(Errc::ConfigError,
                  "duplicate repetition index " + std::to_string(rep.repetitions[i].index));
  rep.config.repetitions = rep.repetitions.size();
  aggregate(rep);
  return rep;
}

}  // namespace dra::harness
