// dadl: domain-adaptive dictionary learning experiments.
//
// Subcommands:
//   adapt       learn an adaptation path between two feature matrices
//   encode      emit augmented features for new data against a saved path
//   experiment  run a seeded multi-trial experiment from a json config
//   synth       generate toy datasets and apply domain shifts
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "dadl/dadl.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

dadl::AdaptConfig make_adapt_config(int n, int t, double lambda, double eta, double delta,
                                    int max_domains, int dict_iters, std::uint64_t seed) {
  dadl::AdaptConfig cfg = dadl::AdaptConfig::for_atoms(n);
  cfg.t = t;
  cfg.lambda = lambda;
  cfg.eta = eta;
  if (delta > 0.0) cfg.delta_stop = delta;
  cfg.max_domains = max_domains;
  cfg.dict_iters = dict_iters;
  cfg.seed = seed;
  return cfg;
}

int run_adapt(const std::string& source, const std::string& target, const std::string& out,
              const dadl::AdaptConfig& cfg) {
  const dadl::Matrix x_s = dadl::load_matrix(source);
  const dadl::Matrix x_t = dadl::load_matrix(target);
  const dadl::DomainPath path = dadl::adapt(x_s, x_t, cfg);
  dadl::save_domain_path(out, path);
  std::cout << "path: domains 0.." << path.last_domain()
            << (path.truncated ? " (truncated)" : "") << ", final residue "
            << path.step_log.back().residue_norm << ", written to " << out << "\n";
  return 0;
}

int run_encode(const std::string& path_dir, const std::string& input, const std::string& side,
               const std::string& out) {
  if (side != "source" && side != "target") {
    throw dadl::ConfigError("--side must be 'source' or 'target'");
  }
  const dadl::DomainPath path = dadl::load_domain_path(path_dir);
  const dadl::Matrix x = dadl::load_matrix(input);
  dadl::Matrix aug;
  if (side == "source") {
    const dadl::SourceRecovery rec = dadl::recover_source(path, x, path.config.t);
    aug = dadl::augment_features(path, rec, path.z_final, path.gamma_final).x_s_aug;
  } else {
    const dadl::TargetEncoding enc = dadl::encode_target(path, x, path.config.t);
    dadl::SourceRecovery dummy{enc.z_final, enc.gamma_final, {}};
    aug = dadl::augment_features(path, dummy, enc.z_final, enc.gamma_final).x_t_aug;
  }
  dadl::save_matrix(out, aug);
  std::cout << "augmented " << side << " features: " << aug.rows() << "x" << aug.cols()
            << " written to " << out << "\n";
  return 0;
}

int run_experiment_cmd(const std::string& config_file, const std::string& out) {
  std::ifstream is(config_file);
  if (!is) throw dadl::ConfigError("cannot open config: " + config_file);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw dadl::ConfigError("bad config json: " + std::string(e.what()));
  }
  const dadl::ExperimentConfig cfg = dadl::experiment_config_from_json(j);
  const dadl::ExperimentReport report = dadl::run_experiment(cfg);
  dadl::write_report_files(out, report);
  std::printf("trials %d: mean accuracy %.4f (baseline %.4f)%s\n",
              static_cast<int>(report.trials.size()), report.mean_accuracy,
              report.mean_baseline_accuracy, report.partial ? " [partial]" : "");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"domain-adaptive dictionary learning"};
  app.require_subcommand(1);

  // adapt
  auto* adapt_cmd = app.add_subcommand("adapt", "learn an adaptation path");
  std::string source, target, out_dir;
  int n = 32, t = 8, max_domains = 50, dict_iters = 20;
  double lambda = 0.1, eta = 2000.0, delta = 0.0;
  std::uint64_t seed = 0;
  adapt_cmd->add_option("--source", source, "source feature matrix")->required();
  adapt_cmd->add_option("--target", target, "target feature matrix")->required();
  adapt_cmd->add_option("--out", out_dir, "output directory")->required();
  adapt_cmd->add_option("--n", n, "atoms per dictionary");
  adapt_cmd->add_option("--t", t, "joint sparsity budget");
  adapt_cmd->add_option("--lambda", lambda, "incoherence weight");
  adapt_cmd->add_option("--eta", eta, "dictionary-adjustment ridge weight");
  adapt_cmd->add_option("--delta", delta, "stopping threshold on ||delta D||_F (default 0.01*sqrt(n))");
  adapt_cmd->add_option("--max-domains", max_domains, "path length cap");
  adapt_cmd->add_option("--dict-iters", dict_iters, "inner dictionary-learning iterations");
  adapt_cmd->add_option("--seed", seed, "rng seed");

  // encode
  auto* encode_cmd = app.add_subcommand("encode", "augmented features from a saved path");
  std::string path_dir, input_file, side = "target", encode_out;
  encode_cmd->add_option("--path", path_dir, "path directory from 'adapt'")->required();
  encode_cmd->add_option("--input", input_file, "feature matrix to encode")->required();
  encode_cmd->add_option("--side", side, "source|target")->required();
  encode_cmd->add_option("--out", encode_out, "output matrix file")->required();

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "run a configured experiment");
  std::string config_file, exp_out;
  exp_cmd->add_option("--config", config_file, "experiment config json")->required();
  exp_cmd->add_option("--out", exp_out, "output directory")->required();

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate or shift datasets");
  std::string kind, synth_in, synth_out, a_file, b_file;
  int classes = 10, per_class = 30, height = 16, width = 16, length = 9;
  double sigma = 3.0, theta = 135.0;
  std::uint64_t synth_seed = 0;
  synth_cmd->add_option("--kind", kind, "toy|gaussian|motion|affine")->required();
  synth_cmd->add_option("--out", synth_out, "output dataset prefix")->required();
  synth_cmd->add_option("--input", synth_in, "input dataset prefix (shift kinds)");
  synth_cmd->add_option("--classes", classes, "toy: class count");
  synth_cmd->add_option("--per-class", per_class, "toy: samples per class");
  synth_cmd->add_option("--height", height, "image height");
  synth_cmd->add_option("--width", width, "image width");
  synth_cmd->add_option("--seed", synth_seed, "toy: rng seed");
  synth_cmd->add_option("--sigma", sigma, "gaussian: standard deviation");
  synth_cmd->add_option("--length", length, "motion: kernel length (odd)");
  synth_cmd->add_option("--theta", theta, "motion: angle in degrees");
  synth_cmd->add_option("--a", a_file, "affine: matrix file");
  synth_cmd->add_option("--b", b_file, "affine: offset column file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*adapt_cmd) {
      return run_adapt(source, target, out_dir,
                       make_adapt_config(n, t, lambda, eta, delta, max_domains, dict_iters, seed));
    }
    if (*encode_cmd) {
      return run_encode(path_dir, input_file, side, encode_out);
    }
    if (*exp_cmd) {
      return run_experiment_cmd(config_file, exp_out);
    }
    if (*synth_cmd) {
      if (kind == "toy") {
        dadl::save_dataset(synth_out,
                           dadl::make_toy_dataset(classes, per_class, height, width, synth_seed));
      } else if (kind == "gaussian" || kind == "motion" || kind == "affine") {
        if (synth_in.empty()) throw dadl::ConfigError("--input required for shift kinds");
        const dadl::ToyImageDataset in = dadl::load_dataset(
            synth_in + ".mat", synth_in + ".labels.csv", height, width);
        dadl::ToyImageDataset shifted;
        if (kind == "gaussian") {
          shifted = dadl::gaussian_blur_shift(in, sigma);
        } else if (kind == "motion") {
          shifted = dadl::motion_blur_shift(in, length, theta);
        } else {
          if (a_file.empty() || b_file.empty()) throw dadl::ConfigError("--a and --b required");
          const dadl::Matrix a = dadl::load_matrix(a_file);
          const dadl::Matrix b = dadl::load_matrix(b_file);
          if (b.cols() != 1) throw dadl::ConfigError("--b must be a column vector");
          shifted = in;
          shifted.images = dadl::linear_shift(in.images, a, b.col(0));
        }
        dadl::save_dataset(synth_out, shifted);
      } else {
        throw dadl::ConfigError("unknown synth kind '" + kind + "'");
      }
      std::cout << "dataset written to " << synth_out << ".mat\n";
      return 0;
    }
  } catch (const dadl::SolverError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const dadl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dadl::ContractError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
