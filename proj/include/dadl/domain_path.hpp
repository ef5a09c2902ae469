#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dadl/dict_learning.hpp"
#include "dadl/errors.hpp"
#include "dadl/matrix_io.hpp"
#include "dadl/numerics.hpp"
#include "dadl/sparse_coding.hpp"

// The adaptation path: starting from a source-specific dictionary, iterate
// joint sparse coding of the target against all generated domains and a
// ridge-regularized dictionary adjustment, producing a sequence of
// domain-specific dictionaries that walks toward the target domain.

namespace dadl {

struct AdaptConfig {
  int n = 32;                 // atoms per dictionary
  int t = 8;                  // joint sparsity budget
  double lambda = 0.1;        // incoherence weight
  double eta = 2000.0;        // dictionary-adjustment ridge weight
  double delta_stop = 0.0565685424949238;  // stop once ||delta D||_F falls below
  int max_domains = 50;       // hard cap on the path length
  int dict_iters = 20;        // inner dictionary-learning iterations
  std::uint64_t seed = 0;

  // Unit atoms make ||D||_F = sqrt(n); the default threshold is 1% of that.
  static double default_delta_stop(int n) { return 0.01 * std::sqrt(static_cast<double>(n)); }

  static AdaptConfig for_atoms(int n) {
    AdaptConfig c;
    c.n = n;
    c.delta_stop = default_delta_stop(n);
    return c;
  }

  void validate() const {
    if (n < 1) throw ContractError("AdaptConfig: n must be >= 1");
    if (t < 1) throw ContractError("AdaptConfig: t must be >= 1");
    if (lambda < 0.0) throw ContractError("AdaptConfig: lambda must be >= 0");
    if (eta <= 0.0) throw ContractError("AdaptConfig: eta must be > 0");
    if (delta_stop <= 0.0) throw ContractError("AdaptConfig: delta_stop must be > 0");
    if (max_domains < 1) throw ContractError("AdaptConfig: max_domains must be >= 1");
    if (dict_iters < 1) throw ContractError("AdaptConfig: dict_iters must be >= 1");
  }
};

inline nlohmann::ordered_json adapt_config_to_json(const AdaptConfig& c) {
  return nlohmann::ordered_json{{"n", c.n},
                                {"t", c.t},
                                {"lambda", c.lambda},
                                {"eta", c.eta},
                                {"delta_stop", c.delta_stop},
                                {"max_domains", c.max_domains},
                                {"dict_iters", c.dict_iters},
                                {"seed", c.seed}};
}

inline AdaptConfig adapt_config_from_json(const nlohmann::json& j) {
  AdaptConfig c;
  bool have_delta = false;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "n") {
        c.n = value.get<int>();
      } else if (key == "t") {
        c.t = value.get<int>();
      } else if (key == "lambda") {
        c.lambda = value.get<double>();
      } else if (key == "eta") {
        c.eta = value.get<double>();
      } else if (key == "delta_stop") {
        c.delta_stop = value.get<double>();
        have_delta = true;
      } else if (key == "max_domains") {
        c.max_domains = value.get<int>();
      } else if (key == "dict_iters") {
        c.dict_iters = value.get<int>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else {
        throw ConfigError("adapt config: unknown key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("adapt config: bad value for '" + key + "': " + e.what());
    }
  }
  if (!have_delta) c.delta_stop = AdaptConfig::default_delta_stop(c.n);
  return c;
}

/// Per-step diagnostics. The final entry (the closing coding pass) performs no
/// dictionary adjustment, so its delta_norm is 0 and its pre-normalization
/// residue equals the residue itself.
struct StepLogEntry {
  int k = 0;
  double delta_norm = 0.0;
  double residue_norm = 0.0;
  double prenorm_residue = 0.0;
};

struct DomainPath {
  Dictionary d_common;
  std::vector<Dictionary> specifics;     // source-specific first, one per domain
  Dictionary d_target;
  std::vector<Matrix> x_t_intermediate;  // recovered target data per domain
  SparseCode z_final;                    // target codes from the final coding pass
  SparseCode gamma_final;
  std::vector<StepLogEntry> step_log;    // one entry per domain index
  bool truncated = false;                // hit max_domains before delta_stop
  AdaptConfig config;

  int last_domain() const { return static_cast<int>(specifics.size()) - 1; }
};

/// Target reconstruction residue under one domain's dictionaries.
inline Matrix residue(const Matrix& x_t, const Dictionary& d_common, const SparseCode& z,
                      const Dictionary& d_k, const SparseCode& gamma) {
  if (x_t.rows() != d_common.dim() || x_t.rows() != d_k.dim()) {
    throw ContractError("residue: dimension mismatch");
  }
  if (z.coeffs().rows() != d_common.size() || gamma.coeffs().rows() != d_k.size()) {
    throw ContractError("residue: coefficient row mismatch");
  }
  if (z.coeffs().cols() != x_t.cols() || gamma.coeffs().cols() != x_t.cols()) {
    throw ContractError("residue: sample count mismatch");
  }
  return x_t - d_common.atoms() * z.coeffs() - d_k.atoms() * gamma.coeffs();
}

/// Ridge-regression dictionary adjustment: the closed-form minimizer of
/// ||J - D G||_F^2 + eta ||D||_F^2 over D, i.e. J G^T (eta I + G G^T)^-1.
inline Matrix dictionary_delta(const Matrix& j_k, const SparseCode& gamma_k, double eta) {
  if (eta <= 0.0) throw ParameterError("dictionary_delta: eta must be > 0");
  const Matrix& g = gamma_k.coeffs();
  if (g.cols() != j_k.cols()) throw ContractError("dictionary_delta: sample count mismatch");
  const Index n = g.rows();
  const Matrix m = eta * Matrix::Identity(n, n) + g * g.transpose();
  return solve_spd(m, g * j_k.transpose()).transpose();
}

struct ResidueIdentity {
  double lhs;  // ||J - dD G||_F^2 - ||J||_F^2 computed directly
  double rhs;  // -||J V1 Q||_F^2 via the SVD of the coefficients
};

/// Numerically evaluates both sides of the closed-form residue-drop identity:
/// with G = U S V1^T and q_i = sqrt(s_i^4 + 2 eta s_i^2) / (s_i^2 + eta),
/// the drop equals -||J V1 diag(q)||_F^2. Both values are returned so callers
/// can compare the two computation paths.
inline ResidueIdentity verify_residue_identity(const Matrix& j_k, const SparseCode& gamma_k,
                                               double eta) {
  if (eta <= 0.0) throw ParameterError("verify_residue_identity: eta must be > 0");
  const Matrix delta = dictionary_delta(j_k, gamma_k, eta);
  const double lhs =
      (j_k - delta * gamma_k.coeffs()).squaredNorm() - j_k.squaredNorm();
  const SvdResult dec = svd(gamma_k.coeffs());
  Vector q(dec.s.size());
  for (Index i = 0; i < q.size(); ++i) {
    const double s2 = dec.s(i) * dec.s(i);
    q(i) = std::sqrt(s2 * s2 + 2.0 * eta * s2) / (s2 + eta);
  }
  const Matrix v1 = dec.vt.transpose();
  const double rhs = -(j_k * v1 * q.asDiagonal()).squaredNorm();
  return ResidueIdentity{lhs, rhs};
}

namespace detail {

// Column-wise renormalization of an adjusted dictionary; a column that
// collapsed to zero keeps its previous atom.
inline Matrix renormalize_or_keep(Matrix candidate, const Matrix& previous) {
  for (Index j = 0; j < candidate.cols(); ++j) {
    const double nn = candidate.col(j).norm();
    if (nn > 1e-12) {
      candidate.col(j) /= nn;
    } else {
      candidate.col(j) = previous.col(j);
    }
  }
  return candidate;
}

}  // namespace detail

/// Learn the full adaptation path from source data to target data.
inline DomainPath adapt(const Matrix& x_s, const Matrix& x_t, const AdaptConfig& cfg) {
  cfg.validate();
  ensure_nonempty(x_s, "adapt source");
  ensure_nonempty(x_t, "adapt target");
  if (x_s.rows() != x_t.rows()) throw ContractError("adapt: domain dimensions differ");

  CommonDictResult common =
      learn_common(x_s, x_t, cfg.n, cfg.t, cfg.dict_iters, cfg.seed);
  SpecificDictResult source_spec =
      learn_specific(x_s, common.d_common, cfg.n, cfg.t, cfg.lambda, cfg.dict_iters, cfg.seed + 1);
  SpecificDictResult target_spec =
      learn_specific(x_t, common.d_common, cfg.n, cfg.t, cfg.lambda, cfg.dict_iters, cfg.seed + 2);

  const Matrix& dc = common.d_common.atoms();
  std::vector<Dictionary> specifics{source_spec.d_specific};
  std::vector<Matrix> intermediates;
  std::vector<StepLogEntry> step_log;
  bool truncated = false;
  bool stop = false;
  std::optional<JointCodePair> final_codes;

  for (int k = 0;; ++k) {
    // Stacked coding blocks: target against the target-specific dictionary,
    // target against the current domain, then every already-generated
    // intermediate against its own domain.
    std::vector<Dictionary> specs{target_spec.d_specific, specifics[static_cast<std::size_t>(k)]};
    std::vector<Matrix> sigs{x_t, x_t};
    for (int i = 0; i < k; ++i) {
      specs.push_back(specifics[static_cast<std::size_t>(i)]);
      sigs.push_back(intermediates[static_cast<std::size_t>(i)]);
    }
    JointCodePair codes = joint_encode(common.d_common, specs, sigs, cfg.t);
    const Matrix j_k = x_t - dc * codes.z.coeffs() -
                       specifics[static_cast<std::size_t>(k)].atoms() * codes.gamma.coeffs();
    intermediates.push_back(x_t - j_k);
    const double j_norm = j_k.norm();

    if (stop) {
      step_log.push_back(StepLogEntry{k, 0.0, j_norm, j_norm});
      final_codes.emplace(std::move(codes));
      break;
    }

    const Matrix delta = dictionary_delta(j_k, codes.gamma, cfg.eta);
    const double delta_norm = delta.norm();
    step_log.push_back(StepLogEntry{
        k, delta_norm, j_norm, (j_k - delta * codes.gamma.coeffs()).norm()});

    specifics.emplace_back(Dictionary(detail::renormalize_or_keep(
        specifics[static_cast<std::size_t>(k)].atoms() + delta,
        specifics[static_cast<std::size_t>(k)].atoms())));

    if (delta_norm <= cfg.delta_stop) {
      stop = true;
    } else if (static_cast<int>(specifics.size()) - 1 >= cfg.max_domains) {
      truncated = true;
      stop = true;
    }
  }

  return DomainPath{std::move(common.d_common),
                    std::move(specifics),
                    std::move(target_spec.d_specific),
                    std::move(intermediates),
                    std::move(final_codes->z),
                    std::move(final_codes->gamma),
                    std::move(step_log),
                    truncated,
                    cfg};
}

struct SourceRecovery {
  SparseCode z_final;
  SparseCode gamma_final;
  std::vector<Matrix> x_s_intermediate;  // recovered source data, domains 1..N
};

/// Recover source representations along a finished path: all dictionaries stay
/// fixed; step k jointly codes the source against the target-specific
/// dictionary together with every already-recovered intermediate.
inline SourceRecovery recover_source(const DomainPath& path, const Matrix& x_s, int t) {
  ensure_nonempty(x_s, "recover_source");
  if (x_s.rows() != path.d_common.dim()) throw ContractError("recover_source: dimension mismatch");
  if (t < 1) throw ParameterError("recover_source: sparsity must be >= 1");
  const int last = path.last_domain();
  const Matrix& dc = path.d_common.atoms();

  if (last == 0) {
    JointCodePair codes = joint_encode(path.d_common, {path.d_target}, {x_s}, t);
    return SourceRecovery{std::move(codes.z), std::move(codes.gamma), {}};
  }

  std::vector<Matrix> intermediates;
  std::optional<JointCodePair> final_codes;
  for (int k = 1; k <= last; ++k) {
    std::vector<Dictionary> specs{path.d_target};
    std::vector<Matrix> sigs{x_s};
    for (int i = 1; i < k; ++i) {
      specs.push_back(path.specifics[static_cast<std::size_t>(i)]);
      sigs.push_back(intermediates[static_cast<std::size_t>(i - 1)]);
    }
    JointCodePair codes = joint_encode(path.d_common, specs, sigs, t);
    intermediates.push_back(dc * codes.z.coeffs() +
                            path.specifics[static_cast<std::size_t>(k)].atoms() *
                                codes.gamma.coeffs());
    if (k == last) final_codes.emplace(std::move(codes));
  }
  return SourceRecovery{std::move(final_codes->z), std::move(final_codes->gamma),
                        std::move(intermediates)};
}

struct AugmentedFeatures {
  Matrix x_s_aug;  // (N+1)*d x Ns
  Matrix x_t_aug;  // (N+1)*d x Nt
};

/// Stack the per-domain reconstructions built from the final codes: block i is
/// Dc z + D_i gamma, source and target each with their own final codes but the
/// same dictionary sequence.
inline AugmentedFeatures augment_features(const DomainPath& path, const SourceRecovery& src,
                                          const SparseCode& z_t_final,
                                          const SparseCode& gamma_t_final) {
  const Matrix& dc = path.d_common.atoms();
  const Index d = dc.rows();
  const int blocks = path.last_domain() + 1;
  auto stack = [&](const SparseCode& z, const SparseCode& gamma) {
    if (z.coeffs().rows() != dc.cols()) throw ContractError("augment_features: z row mismatch");
    if (gamma.coeffs().rows() != path.specifics.front().size()) {
      throw ContractError("augment_features: gamma row mismatch");
    }
    if (z.coeffs().cols() != gamma.coeffs().cols()) {
      throw ContractError("augment_features: code column mismatch");
    }
    Matrix out(static_cast<Index>(blocks) * d, z.coeffs().cols());
    const Matrix base = dc * z.coeffs();
    for (int i = 0; i < blocks; ++i) {
      out.middleRows(static_cast<Index>(i) * d, d) =
          base + path.specifics[static_cast<std::size_t>(i)].atoms() * gamma.coeffs();
    }
    return out;
  };
  return AugmentedFeatures{stack(src.z_final, src.gamma_final), stack(z_t_final, gamma_t_final)};
}

struct TargetEncoding {
  SparseCode z_final;
  SparseCode gamma_final;
  std::vector<Matrix> intermediates;  // one recovery per domain
};

/// Replay the path's coding recursion for new target-side data with all
/// dictionaries fixed. Applied to the training target data this reproduces the
/// path's stored final codes.
inline TargetEncoding encode_target(const DomainPath& path, const Matrix& x, int t) {
  ensure_nonempty(x, "encode_target");
  if (x.rows() != path.d_common.dim()) throw ContractError("encode_target: dimension mismatch");
  if (t < 1) throw ParameterError("encode_target: sparsity must be >= 1");
  const Matrix& dc = path.d_common.atoms();
  std::vector<Matrix> intermediates;
  std::optional<JointCodePair> final_codes;
  const int last = path.last_domain();
  for (int k = 0; k <= last; ++k) {
    std::vector<Dictionary> specs{path.d_target, path.specifics[static_cast<std::size_t>(k)]};
    std::vector<Matrix> sigs{x, x};
    for (int i = 0; i < k; ++i) {
      specs.push_back(path.specifics[static_cast<std::size_t>(i)]);
      sigs.push_back(intermediates[static_cast<std::size_t>(i)]);
    }
    JointCodePair codes = joint_encode(path.d_common, specs, sigs, t);
    intermediates.push_back(dc * codes.z.coeffs() +
                            path.specifics[static_cast<std::size_t>(k)].atoms() *
                                codes.gamma.coeffs());
    if (k == last) final_codes.emplace(std::move(codes));
  }
  return TargetEncoding{std::move(final_codes->z), std::move(final_codes->gamma),
                        std::move(intermediates)};
}

// ---------------------------------------------------------------------------
// Path serialization: one directory with the dictionaries, the recovered
// intermediates, the final codes, a json description and a step-log csv.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string domain_file_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "specific_%03d.mat", k);
  return buf;
}

inline std::string intermediate_file_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "xt_%03d.mat", k);
  return buf;
}

inline void write_dictionary_sidecar(const std::filesystem::path& file, const std::string& role,
                                     const Dictionary& dict, const AdaptConfig& cfg) {
  nlohmann::ordered_json j{{"role", role},         {"d", dict.dim()},
                           {"n", dict.size()},     {"t", cfg.t},
                           {"lambda", cfg.lambda}, {"seed", cfg.seed}};
  std::ofstream os(file);
  if (!os) throw ConfigError("cannot open for writing: " + file.string());
  os << j.dump(2) << "\n";
}

}  // namespace detail

inline void save_step_log_csv(const std::filesystem::path& file,
                              const std::vector<StepLogEntry>& log) {
  std::ofstream os(file);
  if (!os) throw ConfigError("cannot open for writing: " + file.string());
  os << "k,delta_norm,residue_norm\n";
  char buf[96];
  for (const StepLogEntry& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", e.k, e.delta_norm, e.residue_norm);
    os << buf;
  }
}

inline void save_domain_path(const std::filesystem::path& dir, const DomainPath& path) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "xt_k");
  save_matrix_binary(dir / "common.mat", path.d_common.atoms());
  detail::write_dictionary_sidecar(dir / "common.json", "common", path.d_common, path.config);
  for (int k = 0; k <= path.last_domain(); ++k) {
    const Dictionary& dict = path.specifics[static_cast<std::size_t>(k)];
    save_matrix_binary(dir / detail::domain_file_name(k), dict.atoms());
    detail::write_dictionary_sidecar(dir / (detail::domain_file_name(k) + ".json"),
                                     k == 0 ? "source" : "intermediate", dict, path.config);
    save_matrix_binary(dir / "xt_k" / detail::intermediate_file_name(k),
                       path.x_t_intermediate[static_cast<std::size_t>(k)]);
  }
  save_matrix_binary(dir / "target.mat", path.d_target.atoms());
  detail::write_dictionary_sidecar(dir / "target.json", "target", path.d_target, path.config);
  save_matrix_binary(dir / "z_final.mat", path.z_final.coeffs());
  save_matrix_binary(dir / "gamma_final.mat", path.gamma_final.coeffs());
  save_step_log_csv(dir / "step_log.csv", path.step_log);

  nlohmann::ordered_json j;
  j["config"] = adapt_config_to_json(path.config);
  j["d"] = path.d_common.dim();
  j["num_domains"] = path.last_domain();
  j["truncated"] = path.truncated;
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (const StepLogEntry& e : path.step_log) {
    steps.push_back(nlohmann::ordered_json{{"k", e.k},
                                           {"delta_norm", e.delta_norm},
                                           {"residue_norm", e.residue_norm},
                                           {"prenorm_residue", e.prenorm_residue}});
  }
  j["step_log"] = std::move(steps);
  std::ofstream os(dir / "path.json");
  if (!os) throw ConfigError("cannot open for writing: " + (dir / "path.json").string());
  os << j.dump(2) << "\n";
}

inline DomainPath load_domain_path(const std::filesystem::path& dir) {
  const std::filesystem::path meta_file = dir / "path.json";
  std::ifstream is(meta_file);
  if (!is) throw ConfigError("cannot open: " + meta_file.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad path.json: " + std::string(e.what()));
  }
  if (!j.contains("config") || !j.contains("num_domains")) {
    throw ConfigError("path.json missing required keys");
  }
  const AdaptConfig cfg = adapt_config_from_json(j["config"]);
  const int last = j["num_domains"].get<int>();
  if (last < 0) throw ConfigError("path.json: bad num_domains");

  std::vector<Dictionary> specifics;
  std::vector<Matrix> intermediates;
  for (int k = 0; k <= last; ++k) {
    specifics.emplace_back(load_matrix_binary(dir / detail::domain_file_name(k)));
    intermediates.push_back(load_matrix_binary(dir / "xt_k" / detail::intermediate_file_name(k)));
  }
  std::vector<StepLogEntry> log;
  for (const auto& e : j.value("step_log", nlohmann::json::array())) {
    log.push_back(StepLogEntry{e.at("k").get<int>(), e.at("delta_norm").get<double>(),
                               e.at("residue_norm").get<double>(),
                               e.at("prenorm_residue").get<double>()});
  }
  return DomainPath{Dictionary(load_matrix_binary(dir / "common.mat")),
                    std::move(specifics),
                    Dictionary(load_matrix_binary(dir / "target.mat")),
                    std::move(intermediates),
                    SparseCode(load_matrix_binary(dir / "z_final.mat"), cfg.t),
                    SparseCode(load_matrix_binary(dir / "gamma_final.mat"), cfg.t),
                    std::move(log),
                    j.value("truncated", false),
                    cfg};
}

}  // namespace dadl
