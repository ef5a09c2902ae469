#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "dadl/domain_path.hpp"
#include "dadl/domain_synth.hpp"
#include "dadl/errors.hpp"
#include "dadl/matrix_io.hpp"
#include "dadl/numerics.hpp"

// Experiment head: classifier evaluation on augmented features, seeded
// multi-trial runs against a no-adaptation baseline, and report emission.

namespace dadl {

enum class ClassifierKind { nearest_neighbor, linear_ovr };

inline std::string to_string(ClassifierKind k) {
  return k == ClassifierKind::nearest_neighbor ? "nearest_neighbor" : "linear_ovr";
}

inline ClassifierKind classifier_from_string(const std::string& s) {
  if (s == "nearest_neighbor") return ClassifierKind::nearest_neighbor;
  if (s == "linear_ovr") return ClassifierKind::linear_ovr;
  throw ConfigError("unknown classifier '" + s + "'");
}

/// 1-NN under Euclidean distance (distance ties to the smallest label), or
/// one-vs-rest ridge regression to +-1 targets with a trace-scaled regularizer
/// (1e-3 * trace(X X^T)/d), score ties to the smallest label.
inline std::vector<int> classify(const Matrix& train_x, const std::vector<int>& train_y,
                                 const Matrix& test_x, ClassifierKind kind) {
  if (train_x.cols() < 1 || test_x.cols() < 1) throw ContractError("classify: empty data");
  if (static_cast<Index>(train_y.size()) != train_x.cols()) {
    throw ContractError("classify: label count mismatch");
  }
  if (train_x.rows() != test_x.rows()) throw ContractError("classify: feature dim mismatch");

  std::vector<int> out(static_cast<std::size_t>(test_x.cols()));
  if (kind == ClassifierKind::nearest_neighbor) {
    for (Index j = 0; j < test_x.cols(); ++j) {
      double best_d = std::numeric_limits<double>::infinity();
      int best_label = std::numeric_limits<int>::max();
      for (Index i = 0; i < train_x.cols(); ++i) {
        const double d2 = (train_x.col(i) - test_x.col(j)).squaredNorm();
        const int label = train_y[static_cast<std::size_t>(i)];
        if (d2 < best_d || (d2 == best_d && label < best_label)) {
          best_d = d2;
          best_label = label;
        }
      }
      out[static_cast<std::size_t>(j)] = best_label;
    }
    return out;
  }

  const std::set<int> class_set(train_y.begin(), train_y.end());
  const std::vector<int> classes(class_set.begin(), class_set.end());
  Matrix targets(static_cast<Index>(classes.size()), train_x.cols());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (Index i = 0; i < train_x.cols(); ++i) {
      targets(static_cast<Index>(c), i) = train_y[static_cast<std::size_t>(i)] == classes[c] ? 1.0 : -1.0;
    }
  }
  const Matrix gram = train_x * train_x.transpose();
  const double reg = 1e-3 * gram.trace() / static_cast<double>(train_x.rows());
  const Matrix w = solve_spd(
      gram + reg * Matrix::Identity(gram.rows(), gram.cols()), train_x * targets.transpose());
  const Matrix scores = w.transpose() * test_x;  // classes x tests
  for (Index j = 0; j < test_x.cols(); ++j) {
    Index best = 0;
    for (Index c = 1; c < scores.rows(); ++c) {
      if (scores(c, j) > scores(best, j)) best = c;
    }
    out[static_cast<std::size_t>(j)] = classes[static_cast<std::size_t>(best)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment configuration (json-mirrored, unknown keys rejected)
// ---------------------------------------------------------------------------

struct DatasetSpec {
  enum class Kind { toy, files };
  Kind kind = Kind::toy;
  // toy generator
  int classes = 10;
  int per_class = 30;
  int height = 16;
  int width = 16;
  // file-backed
  std::string source, source_labels, target, target_labels;
};

struct ShiftSpec {
  enum class Kind { none, gaussian, motion, affine };
  Kind kind = Kind::none;
  double sigma = 3.0;        // gaussian
  int length = 9;            // motion
  double theta_deg = 135.0;  // motion
  std::string a_file, b_file;  // affine
};

struct PcaSpec {
  bool use_fraction = true;
  double variance_fraction = 0.99;
  int dim = 0;

  PcaTarget target() const {
    return use_fraction ? PcaTarget::variance(variance_fraction) : PcaTarget::fixed(dim);
  }
};

struct ExperimentConfig {
  DatasetSpec dataset;
  ShiftSpec shift;
  AdaptConfig adapt;
  PcaSpec pca;
  ClassifierKind classifier = ClassifierKind::nearest_neighbor;
  int trials = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (trials < 1) throw ConfigError("experiment config: trials must be >= 1");
    adapt.validate();
    if (dataset.kind == DatasetSpec::Kind::toy) {
      if (dataset.classes < 2 || dataset.per_class < 2 || dataset.height < 1 || dataset.width < 1) {
        throw ConfigError("experiment config: bad toy dataset parameters");
      }
    }
  }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                           const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
inline T get_field(const nlohmann::json& j, const std::string& key, T fallback,
                   const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + ": missing file path");
  if (!std::filesystem::exists(path)) throw ConfigError(what + ": file not found: " + path);
}

}  // namespace detail

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  detail::reject_unknown(
      j, {"dataset", "shift", "adapt", "pca", "classifier", "trials", "seed"}, "experiment config");

  if (!j.contains("dataset")) throw ConfigError("experiment config: missing 'dataset'");
  {
    const auto& d = j.at("dataset");
    const std::string kind = detail::get_field<std::string>(d, "kind", "toy", "dataset");
    if (kind == "toy") {
      detail::reject_unknown(d, {"kind", "classes", "per_class", "height", "width"}, "dataset");
      cfg.dataset.kind = DatasetSpec::Kind::toy;
      cfg.dataset.classes = detail::get_field(d, "classes", 10, "dataset");
      cfg.dataset.per_class = detail::get_field(d, "per_class", 30, "dataset");
      cfg.dataset.height = detail::get_field(d, "height", 16, "dataset");
      cfg.dataset.width = detail::get_field(d, "width", 16, "dataset");
    } else if (kind == "files") {
      detail::reject_unknown(d,
                             {"kind", "source", "source_labels", "target", "target_labels",
                              "height", "width"},
                             "dataset");
      cfg.dataset.kind = DatasetSpec::Kind::files;
      cfg.dataset.source = detail::get_field<std::string>(d, "source", "", "dataset");
      cfg.dataset.source_labels = detail::get_field<std::string>(d, "source_labels", "", "dataset");
      cfg.dataset.target = detail::get_field<std::string>(d, "target", "", "dataset");
      cfg.dataset.target_labels = detail::get_field<std::string>(d, "target_labels", "", "dataset");
      cfg.dataset.height = detail::get_field(d, "height", 0, "dataset");
      cfg.dataset.width = detail::get_field(d, "width", 0, "dataset");
      detail::require_file(cfg.dataset.source, "dataset.source");
      detail::require_file(cfg.dataset.source_labels, "dataset.source_labels");
      detail::require_file(cfg.dataset.target, "dataset.target");
      detail::require_file(cfg.dataset.target_labels, "dataset.target_labels");
    } else {
      throw ConfigError("dataset: unknown kind '" + kind + "'");
    }
  }

  if (j.contains("shift")) {
    const auto& s = j.at("shift");
    const std::string kind = detail::get_field<std::string>(s, "kind", "none", "shift");
    if (kind == "none") {
      detail::reject_unknown(s, {"kind"}, "shift");
      cfg.shift.kind = ShiftSpec::Kind::none;
    } else if (kind == "gaussian") {
      detail::reject_unknown(s, {"kind", "sigma"}, "shift");
      cfg.shift.kind = ShiftSpec::Kind::gaussian;
      cfg.shift.sigma = detail::get_field(s, "sigma", 3.0, "shift");
    } else if (kind == "motion") {
      detail::reject_unknown(s, {"kind", "length", "theta_deg"}, "shift");
      cfg.shift.kind = ShiftSpec::Kind::motion;
      cfg.shift.length = detail::get_field(s, "length", 9, "shift");
      cfg.shift.theta_deg = detail::get_field(s, "theta_deg", 135.0, "shift");
    } else if (kind == "affine") {
      detail::reject_unknown(s, {"kind", "a", "b"}, "shift");
      cfg.shift.kind = ShiftSpec::Kind::affine;
      cfg.shift.a_file = detail::get_field<std::string>(s, "a", "", "shift");
      cfg.shift.b_file = detail::get_field<std::string>(s, "b", "", "shift");
      detail::require_file(cfg.shift.a_file, "shift.a");
      detail::require_file(cfg.shift.b_file, "shift.b");
    } else {
      throw ConfigError("shift: unknown kind '" + kind + "'");
    }
  }

  if (j.contains("adapt")) {
    try {
      cfg.adapt = adapt_config_from_json(j.at("adapt"));
    } catch (const ContractError& e) {
      throw ConfigError(e.what());
    }
  }

  if (j.contains("pca")) {
    const auto& p = j.at("pca");
    detail::reject_unknown(p, {"variance_fraction", "dim"}, "pca");
    if (p.contains("dim")) {
      cfg.pca.use_fraction = false;
      cfg.pca.dim = detail::get_field(p, "dim", 0, "pca");
      if (cfg.pca.dim < 1) throw ConfigError("pca: dim must be >= 1");
      if (p.contains("variance_fraction")) {
        throw ConfigError("pca: give either 'dim' or 'variance_fraction', not both");
      }
    } else {
      cfg.pca.use_fraction = true;
      cfg.pca.variance_fraction = detail::get_field(p, "variance_fraction", 0.99, "pca");
    }
  }

  cfg.classifier = classifier_from_string(
      detail::get_field<std::string>(j, "classifier", "nearest_neighbor", "experiment config"));
  cfg.trials = detail::get_field(j, "trials", 1, "experiment config");
  cfg.seed = detail::get_field<std::uint64_t>(j, "seed", 0, "experiment config");
  cfg.validate();
  return cfg;
}

inline nlohmann::ordered_json experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  if (cfg.dataset.kind == DatasetSpec::Kind::toy) {
    j["dataset"] = {{"kind", "toy"},
                    {"classes", cfg.dataset.classes},
                    {"per_class", cfg.dataset.per_class},
                    {"height", cfg.dataset.height},
                    {"width", cfg.dataset.width}};
  } else {
    j["dataset"] = {{"kind", "files"},
                    {"source", cfg.dataset.source},
                    {"source_labels", cfg.dataset.source_labels},
                    {"target", cfg.dataset.target},
                    {"target_labels", cfg.dataset.target_labels},
                    {"height", cfg.dataset.height},
                    {"width", cfg.dataset.width}};
  }
  switch (cfg.shift.kind) {
    case ShiftSpec::Kind::none:
      j["shift"] = {{"kind", "none"}};
      break;
    case ShiftSpec::Kind::gaussian:
      j["shift"] = {{"kind", "gaussian"}, {"sigma", cfg.shift.sigma}};
      break;
    case ShiftSpec::Kind::motion:
      j["shift"] = {{"kind", "motion"}, {"length", cfg.shift.length}, {"theta_deg", cfg.shift.theta_deg}};
      break;
    case ShiftSpec::Kind::affine:
      j["shift"] = {{"kind", "affine"}, {"a", cfg.shift.a_file}, {"b", cfg.shift.b_file}};
      break;
  }
  j["adapt"] = adapt_config_to_json(cfg.adapt);
  if (cfg.pca.use_fraction) {
    j["pca"] = {{"variance_fraction", cfg.pca.variance_fraction}};
  } else {
    j["pca"] = {{"dim", cfg.pca.dim}};
  }
  j["classifier"] = to_string(cfg.classifier);
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  return j;
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

struct TrialResult {
  int trial = 0;
  bool failed = false;
  std::string error;
  double accuracy = 0.0;
  double baseline_accuracy = 0.0;
  int num_domains = 0;
  bool truncated = false;
  std::vector<double> residue_curve;                    // ||J^k||_F per domain
  std::vector<std::pair<std::string, double>> phases;   // (phase, seconds) in execution order
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<TrialResult> trials;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_baseline_accuracy = 0.0;
  double std_baseline_accuracy = 0.0;
  bool partial = false;  // at least one trial aborted
  double total_seconds = 0.0;
};

namespace detail {

struct PhaseTimer {
  std::vector<std::pair<std::string, double>>& log;
  std::string name;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  PhaseTimer(std::vector<std::pair<std::string, double>>& l, std::string n)
      : log(l), name(std::move(n)) {}
  ~PhaseTimer() {
    log.emplace_back(name, std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start).count());
  }
};

inline double accuracy_of(const std::vector<int>& predicted, const std::vector<int>& truth) {
  int hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

// Source/target halves sharing class templates: one generator call per trial,
// alternate samples within each class go to either side.
inline void split_toy(const ToyImageDataset& full, int classes, int per_class,
                      ToyImageDataset& src, ToyImageDataset& tgt) {
  const Index d = full.images.rows();
  src = tgt = ToyImageDataset{Matrix(d, static_cast<Index>(classes) * per_class), {},
                              full.height, full.width, full.seed};
  Index si = 0, ti = 0;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < 2 * per_class; ++i) {
      const Index col = static_cast<Index>(c) * 2 * per_class + i;
      if (i % 2 == 0) {
        src.images.col(si++) = full.images.col(col);
        src.labels.push_back(c);
      } else {
        tgt.images.col(ti++) = full.images.col(col);
        tgt.labels.push_back(c);
      }
    }
  }
}

inline ToyImageDataset apply_shift(const ToyImageDataset& ds, const ShiftSpec& shift) {
  switch (shift.kind) {
    case ShiftSpec::Kind::none:
      return ds;
    case ShiftSpec::Kind::gaussian:
      return gaussian_blur_shift(ds, shift.sigma);
    case ShiftSpec::Kind::motion:
      return motion_blur_shift(ds, shift.length, shift.theta_deg);
    case ShiftSpec::Kind::affine: {
      ToyImageDataset out = ds;
      const Matrix a = load_matrix(shift.a_file);
      const Matrix b = load_matrix(shift.b_file);
      if (b.cols() != 1) throw ConfigError("shift.b must be a column vector");
      out.images = linear_shift(ds.images, a, b.col(0));
      return out;
    }
  }
  throw ContractError("apply_shift: unreachable");
}

}  // namespace detail

/// Run one seeded trial of the full pipeline; the baseline classifies raw
/// features and runs before any adaptation output exists.
inline TrialResult run_trial(const ExperimentConfig& cfg, int trial) {
  TrialResult res;
  res.trial = trial;
  try {
    ToyImageDataset src, tgt;
    {
      detail::PhaseTimer tm(res.phases, "synth");
      if (cfg.dataset.kind == DatasetSpec::Kind::toy) {
        const ToyImageDataset full =
            make_toy_dataset(cfg.dataset.classes, 2 * cfg.dataset.per_class, cfg.dataset.height,
                             cfg.dataset.width, cfg.seed + static_cast<std::uint64_t>(trial));
        detail::split_toy(full, cfg.dataset.classes, cfg.dataset.per_class, src, tgt);
      } else {
        src = load_dataset(cfg.dataset.source, cfg.dataset.source_labels, cfg.dataset.height,
                           cfg.dataset.width);
        tgt = load_dataset(cfg.dataset.target, cfg.dataset.target_labels, cfg.dataset.height,
                           cfg.dataset.width);
      }
      tgt = detail::apply_shift(tgt, cfg.shift);
    }

    {
      detail::PhaseTimer tm(res.phases, "baseline");
      res.baseline_accuracy = detail::accuracy_of(
          classify(src.images, src.labels, tgt.images, cfg.classifier), tgt.labels);
    }

    AdaptConfig acfg = cfg.adapt;
    acfg.seed = cfg.adapt.seed + static_cast<std::uint64_t>(trial);
    DomainPath path = [&] {
      detail::PhaseTimer tm(res.phases, "adapt");
      return adapt(src.images, tgt.images, acfg);
    }();
    res.num_domains = path.last_domain();
    res.truncated = path.truncated;
    for (const StepLogEntry& e : path.step_log) res.residue_curve.push_back(e.residue_norm);

    SourceRecovery rec = [&] {
      detail::PhaseTimer tm(res.phases, "recover");
      return recover_source(path, src.images, acfg.t);
    }();

    AugmentedFeatures aug = [&] {
      detail::PhaseTimer tm(res.phases, "augment");
      return augment_features(path, rec, path.z_final, path.gamma_final);
    }();

    Matrix proj_s, proj_t;
    {
      detail::PhaseTimer tm(res.phases, "pca");
      Matrix stacked(aug.x_s_aug.rows(), aug.x_s_aug.cols() + aug.x_t_aug.cols());
      stacked << aug.x_s_aug, aug.x_t_aug;
      const PcaModel pca = pca_fit(stacked, cfg.pca.target());
      proj_s = pca.transform(aug.x_s_aug);
      proj_t = pca.transform(aug.x_t_aug);
    }

    {
      detail::PhaseTimer tm(res.phases, "classify");
      res.accuracy = detail::accuracy_of(
          classify(proj_s, src.labels, proj_t, cfg.classifier), tgt.labels);
    }
  } catch (const std::exception& e) {
    res.failed = true;
    res.error = e.what();
  }
  return res;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.config = cfg;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    report.trials.push_back(run_trial(cfg, trial));
  }
  int ok = 0;
  double sum_a = 0.0, sum_b = 0.0;
  for (const TrialResult& t : report.trials) {
    if (t.failed) {
      report.partial = true;
      continue;
    }
    ++ok;
    sum_a += t.accuracy;
    sum_b += t.baseline_accuracy;
  }
  if (ok > 0) {
    report.mean_accuracy = sum_a / ok;
    report.mean_baseline_accuracy = sum_b / ok;
    double va = 0.0, vb = 0.0;
    for (const TrialResult& t : report.trials) {
      if (t.failed) continue;
      va += (t.accuracy - report.mean_accuracy) * (t.accuracy - report.mean_accuracy);
      vb += (t.baseline_accuracy - report.mean_baseline_accuracy) *
            (t.baseline_accuracy - report.mean_baseline_accuracy);
    }
    report.std_accuracy = std::sqrt(va / ok);
    report.std_baseline_accuracy = std::sqrt(vb / ok);
  }
  report.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json report_to_json(const ExperimentReport& report) {
  nlohmann::ordered_json j;
  j["config"] = experiment_config_to_json(report.config);
  nlohmann::ordered_json trials = nlohmann::ordered_json::array();
  for (const TrialResult& t : report.trials) {
    nlohmann::ordered_json tj;
    tj["trial"] = t.trial;
    tj["failed"] = t.failed;
    if (t.failed) tj["error"] = t.error;
    tj["accuracy"] = t.accuracy;
    tj["baseline_accuracy"] = t.baseline_accuracy;
    tj["num_domains"] = t.num_domains;
    tj["truncated"] = t.truncated;
    tj["residue_curve"] = t.residue_curve;
    nlohmann::ordered_json phases = nlohmann::ordered_json::array();
    nlohmann::ordered_json seconds;
    for (const auto& [name, secs] : t.phases) {
      phases.push_back(name);
      seconds[name] = secs;
    }
    tj["phase_order"] = std::move(phases);
    tj["timing"] = std::move(seconds);
    trials.push_back(std::move(tj));
  }
  j["trials"] = std::move(trials);
  j["summary"] = {{"mean_accuracy", report.mean_accuracy},
                  {"std_accuracy", report.std_accuracy},
                  {"mean_baseline_accuracy", report.mean_baseline_accuracy},
                  {"std_baseline_accuracy", report.std_baseline_accuracy},
                  {"partial", report.partial}};
  j["timing"] = {{"total_seconds", report.total_seconds}};
  return j;
}

/// Report json with every wall-clock field removed; two runs of the same
/// seeded config must agree byte-for-byte on this view.
inline nlohmann::ordered_json strip_timing(nlohmann::ordered_json j) {
  if (j.is_object()) {
    j.erase("timing");
    for (auto& [key, value] : j.items()) {
      (void)key;
      value = strip_timing(value);
    }
  } else if (j.is_array()) {
    for (auto& value : j) value = strip_timing(value);
  }
  return j;
}

inline void write_report_files(const std::filesystem::path& dir, const ExperimentReport& report) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "report.json");
    if (!os) throw ConfigError("cannot open for writing: " + (dir / "report.json").string());
    os << report_to_json(report).dump(2) << "\n";
  }
  {
    std::ofstream os(dir / "accuracy.csv");
    if (!os) throw ConfigError("cannot open for writing: " + (dir / "accuracy.csv").string());
    os << "trial,accuracy,baseline_accuracy\n";
    char buf[96];
    for (const TrialResult& t : report.trials) {
      if (t.failed) continue;
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", t.trial, t.accuracy, t.baseline_accuracy);
      os << buf;
    }
  }
  {
    std::ofstream os(dir / "residue.csv");
    if (!os) throw ConfigError("cannot open for writing: " + (dir / "residue.csv").string());
    os << "trial,k,residue_norm\n";
    char buf[96];
    for (const TrialResult& t : report.trials) {
      for (std::size_t k = 0; k < t.residue_curve.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%d,%zu,%.17g\n", t.trial, k, t.residue_curve[k]);
        os << buf;
      }
    }
  }
}

}  // namespace dadl
