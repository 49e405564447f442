#pragma once

// Command-line front end. Every subcommand accepts `--config FILE`, a plain
// text file of `key = value` lines (key = long flag name without dashes,
// `#` starts a comment, lists comma-separated). Values from the file become
// the option defaults; flags given on the command line win.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>
#include <zlib.h>

#include "srlstm/checkpoint.hpp"
#include "srlstm/dataset.hpp"
#include "srlstm/error.hpp"
#include "srlstm/gradcheck.hpp"
#include "srlstm/harness.hpp"
#include "srlstm/idx.hpp"
#include "srlstm/log.hpp"
#include "srlstm/report.hpp"
#include "srlstm/version.hpp"

namespace srlstm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kDataDirEnv = "SRLSTM_DATA_DIR";

struct Options {
  std::string config;
  std::string data_dir;
  std::string train_images, train_labels, val_images, val_labels;
  std::string out = "out";
  std::string models_dir;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  bool retrain = false;
  bool quiet = false;

  TrainConfig train;

  std::string noise = "uniform";
  std::vector<double> t_factors = kDefaultTFactors;
  std::vector<double> noise_levels = kDefaultNoiseLevels;
  std::vector<int> lengths = kDefaultSeqLens;
  double seqlen_t = kSeqLenStudyT;
  double seqlen_level = kSeqLenStudyLevel;
  double example_t = 0.2;
  double example_level = 0.05;
  std::size_t count = 10;
  std::size_t member = 0;
  bool no_empty = false;

  // gradcheck
  int check_hidden = 3;
  int check_input = 5;
  int check_batch = 4;
  double epsilon = 1e-5;
};

/// Parses `key = value` lines.
inline std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CLI::ConversionError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    kv[key] = value;
  }
  return kv;
}

/// Applies config-file values as defaults of `sub`'s options.
inline void apply_config(CLI::App& sub, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    CLI::Option* opt = nullptr;
    try {
      opt = sub.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw CLI::ExtrasError("unknown config key '" + key + "' for subcommand " + sub.get_name(),
                             CLI::ExitCodes::ExtrasError);
    }
    if (key == "config") continue;
    if (opt->get_expected_min() == 0) {
      // flag: only "true"/"false" make sense
      const bool on = value == "true" || value == "1" || value == "yes" || value == "on";
      if (on) opt->add_result("true");
      continue;
    }
    opt->default_val(value);
  }
}

inline std::filesystem::path resolve_data_file(const std::string& explicit_path, const std::string& dir,
                                               const std::string& stem) {
  if (!explicit_path.empty()) return explicit_path;
  const std::filesystem::path base = dir.empty() ? std::filesystem::path("data") : std::filesystem::path(dir);
  if (std::filesystem::exists(base / stem)) return base / stem;
  if (std::filesystem::exists(base / (stem + ".gz"))) return base / (stem + ".gz");
  return base / stem;
}

struct DataFiles {
  std::filesystem::path train_images, train_labels, val_images, val_labels;
};

inline DataFiles data_files(const Options& o) {
  std::string dir = o.data_dir;
  if (dir.empty())
    if (const char* env = std::getenv(kDataDirEnv)) dir = env;
  return {resolve_data_file(o.train_images, dir, "train-images-idx3-ubyte"),
          resolve_data_file(o.train_labels, dir, "train-labels-idx1-ubyte"),
          resolve_data_file(o.val_images, dir, "t10k-images-idx3-ubyte"),
          resolve_data_file(o.val_labels, dir, "t10k-labels-idx1-ubyte")};
}

struct MissingFile : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require_files(const DataFiles& f) {
  for (const auto& p : {f.train_images, f.train_labels, f.val_images, f.val_labels})
    if (!std::filesystem::exists(p)) throw MissingFile("missing data file: " + p.string());
}

inline Dataset load_split(const std::filesystem::path& images, const std::filesystem::path& labels, bool include_empty,
                          std::size_t empty_count, Split split, std::uint64_t seed) {
  return build_dataset(load_images(images), load_labels(labels), include_empty, empty_count, split, seed);
}

inline TrainConfig train_config(const Options& o) {
  TrainConfig cfg = o.train;
  cfg.master_seed = o.seed;
  cfg.include_empty = !o.no_empty;
  return cfg;
}

inline EnsembleCache cache_of(const Options& o) {
  return {o.models_dir.empty() ? std::filesystem::path(o.out) / "models" : std::filesystem::path(o.models_dir),
          o.retrain};
}

inline void write_provenance(const CLI::App& sub, const Options& o, const std::filesystem::path& outdir) {
  nlohmann::ordered_json j;
  j["tool"] = "srlstm";
  j["version"] = kVersion;
  j["subcommand"] = sub.get_name();
  j["seed"] = o.seed;
  nlohmann::ordered_json cfg;
  for (const CLI::Option* opt : sub.get_options()) {
    const auto name = opt->get_single_name();
    if (name == "help") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    cfg[name] = value;
  }
  j["config"] = cfg;
  j["versions"] = {{"srlstm", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"zlib", ZLIB_VERSION},
                   {"cli11", CLI11_VERSION},
                   {"compiler", __VERSION__}};
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  write_text_file(outdir / ("run_" + sub.get_name() + ".json"), j.dump(2) + "\n");
}

inline void add_common(CLI::App* sub, Options& o, bool needs_data) {
  sub->add_option("--config", o.config, "key = value file whose entries become option defaults");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--seed", o.seed, "master seed for data order, initialization and noise");
  sub->add_option("--jobs", o.jobs, "worker threads (results do not depend on this)")->check(CLI::PositiveNumber);
  sub->add_flag("--quiet", o.quiet, "suppress progress logging on stderr");
  if (!needs_data) return;
  sub->add_option("--data-dir", o.data_dir,
                  std::string("directory holding the four MNIST IDX files (default: $") + kDataDirEnv + " or ./data)");
  sub->add_option("--train-images", o.train_images, "training images IDX file (raw or .gz)");
  sub->add_option("--train-labels", o.train_labels, "training labels IDX file (raw or .gz)");
  sub->add_option("--val-images", o.val_images, "validation images IDX file (raw or .gz)");
  sub->add_option("--val-labels", o.val_labels, "validation labels IDX file (raw or .gz)");
  sub->add_option("--models-dir", o.models_dir, "checkpoint cache directory (default: <out>/models)");
  sub->add_flag("--retrain", o.retrain, "ignore cached checkpoints and train again");
  sub->add_option("--epochs", o.train.epochs, "training epochs")->check(CLI::PositiveNumber);
  sub->add_option("--batch-size", o.train.batch_size, "mini-batch size")->check(CLI::PositiveNumber);
  sub->add_option("--lr", o.train.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--hidden", o.train.hidden, "LSTM hidden units")->check(CLI::PositiveNumber);
  sub->add_option("--ensemble-size", o.train.ensemble_size, "independently trained models per setup")
      ->check(CLI::PositiveNumber);
  sub->add_option("--empty-train", o.train.empty_count_train, "black no-signal images added to the training set");
  sub->add_option("--empty-val", o.train.empty_count_val, "black no-signal images added to the validation set");
}

inline void add_grids(CLI::App* sub, Options& o) {
  sub->add_option("--noise", o.noise, "noise kind")->check(CLI::IsMember({"uniform", "gaussian"}));
  sub->add_option("--t-factors", o.t_factors, "thresholding factors (comma-separated)")->delimiter(',');
  sub->add_option("--noise-levels", o.noise_levels, "noise levels (comma-separated)")->delimiter(',');
  sub->add_option("--seq-len", o.train.seq_len, "sequence length")->check(CLI::PositiveNumber);
}

struct Loaded {
  Dataset train;
  Dataset val;
};

inline Loaded load_data(const Options& o, bool include_empty) {
  const auto files = data_files(o);
  require_files(files);
  Loaded d;
  d.train = load_split(files.train_images, files.train_labels, include_empty, o.train.empty_count_train, Split::train,
                       o.seed);
  d.val = load_split(files.val_images, files.val_labels, include_empty, o.train.empty_count_val, Split::validation,
                     o.seed);
  return d;
}

inline int cmd_train(const Options& o) {
  const auto cfg = train_config(o);
  const auto data = load_data(o, cfg.include_empty);
  const auto members = train_ensemble(data.train, cfg, o.jobs);
  const auto dir = cache_of(o).dir / cfg.cache_tag();
  std::filesystem::create_directories(dir);
  std::string losses = "member,seed,epoch,loss\n";
  std::vector<LstmParams<float>> models;
  for (std::size_t k = 0; k < members.size(); ++k) {
    save_checkpoint(dir / ("member_" + std::to_string(k) + ".ckpt"), members[k].params);
    for (std::size_t e = 0; e < members[k].epoch_losses.size(); ++e)
      losses += std::to_string(k) + ',' + std::to_string(members[k].seed) + ',' + std::to_string(e + 1) + ',' +
                fixed6(members[k].epoch_losses[e]) + '\n';
    models.push_back(members[k].params);
  }
  write_text_file(std::filesystem::path(o.out) / "train_losses.csv", losses);
  const auto base = evaluate(models, data.val, Condition{1.0, NoiseKind::none, 0.0, cfg.seq_len},
                             EvalOptions{o.seed, o.jobs});
  std::cout << "trained " << models.size() << " models into " << dir.string() << "\n"
            << "baseline accuracy " << fixed6(base.mean_accuracy) << " +- " << fixed6(base.std_accuracy) << "\n";
  return kExitOk;
}

inline int cmd_sweep(const Options& o, bool ablation) {
  auto cfg = train_config(o);
  if (ablation) cfg.include_empty = false;
  const auto data = load_data(o, cfg.include_empty);
  const auto models = load_or_train_ensemble(data.train, cfg, cache_of(o), o.jobs);
  const auto kind = parse_noise_kind(o.noise);
  const EvalOptions eo{o.seed, o.jobs};
  const auto table = ablation ? run_ablation(models, data.val, o.t_factors, kind, o.noise_levels, cfg.seq_len, eo)
                              : run_sweep(models, data.val, o.t_factors, kind, o.noise_levels, cfg.seq_len, eo);
  const auto path = std::filesystem::path(o.out) / ((ablation ? "ablation_" : "sweep_") + o.noise + ".csv");
  write_csv(table, path);
  std::cout << "wrote " << table.rows.size() << " rows to " << path.string() << "\n";
  return kExitOk;
}

inline int cmd_seqlen(const Options& o) {
  const auto cfg = train_config(o);
  const auto data = load_data(o, cfg.include_empty);
  const Condition cond{o.seqlen_t, parse_noise_kind(o.noise), o.seqlen_level, 1};
  const auto table = run_seqlen_study(data.val, cfg, o.lengths, cond, training_provider(data.train, cache_of(o), o.jobs),
                                      EvalOptions{o.seed, o.jobs});
  const auto path = std::filesystem::path(o.out) / "seqlen.csv";
  write_csv(table, path);
  std::cout << "wrote " << table.rows.size() << " rows to " << path.string() << "\n";
  return kExitOk;
}

inline int cmd_examples(const Options& o) {
  const auto cfg = train_config(o);
  require(cfg.include_empty, Errc::class_count_mismatch, "examples need the no-signal class");
  const auto data = load_data(o, true);
  const auto models = load_or_train_ensemble(data.train, cfg, cache_of(o), o.jobs);
  require(o.member < models.size(), Errc::invalid_argument, "--member out of range");
  const Condition cond{o.example_t, parse_noise_kind(o.noise), o.example_level, cfg.seq_len};
  const auto dir = std::filesystem::path(o.out) / "examples";
  const auto triplets = render_examples(models[o.member], data.val, cond, o.count, dir, o.seed);
  std::size_t pattern = 0;
  for (const auto& tr : triplets)
    pattern += tr.pred_original == tr.true_label && tr.pred_contrasted == kEmptyLabel && tr.pred_noised != kEmptyLabel;
  std::cout << "wrote " << triplets.size() << " example triplets to " << dir.string() << " (" << pattern
            << " show correct / no-signal / signal)\n";
  return kExitOk;
}

inline int cmd_gradcheck(const Options& o) {
  double worst = 0.0;
  for (int classes : {10, 11}) {
    for (int L : {1, 4}) {
      for (bool repeated : {true, false}) {
        const auto [params, batch] =
            random_check_problem(o.check_hidden, o.check_input, classes, L, o.check_batch, repeated,
                                 rng::derive_seed({o.seed, static_cast<std::uint64_t>(classes),
                                                   static_cast<std::uint64_t>(L), repeated}));
        const double err = gradient_check(params, batch, o.epsilon);
        worst = std::max(worst, err);
        std::cout << "K=" << classes << " L=" << L << (repeated ? " repeated" : " distinct")
                  << " input: max relative error " << err << "\n";
      }
    }
  }
  const bool ok = worst < 1e-4;
  std::cout << "max relative error " << worst << (ok ? " < 1e-4: PASS" : " >= 1e-4: FAIL") << "\n";
  return ok ? kExitOk : kExitDataError;
}

inline int run(int argc, const char* const* argv) {
  CLI::App app{"Stochastic resonance experiments with a small LSTM digit classifier", "srlstm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  app.option_defaults()->always_capture_default();

  Options o;
  auto* train = app.add_subcommand("train", "train and checkpoint an ensemble");
  add_common(train, o, true);
  train->add_option("--seq-len", o.train.seq_len, "sequence length")->check(CLI::PositiveNumber);
  train->add_flag("--no-empty", o.no_empty, "train without the no-signal class (10 classes)");

  auto* sweep = app.add_subcommand("sweep", "accuracy over thresholding factors x noise levels");
  add_common(sweep, o, true);
  add_grids(sweep, o);

  auto* ablation = app.add_subcommand("ablation", "the sweep with models trained without the no-signal class");
  add_common(ablation, o, true);
  add_grids(ablation, o);

  auto* seqlen = app.add_subcommand("seqlen", "fresh ensembles per sequence length at one condition");
  add_common(seqlen, o, true);
  seqlen->add_option("--lengths", o.lengths, "sequence lengths (comma-separated)")->delimiter(',');
  seqlen->add_option("--noise", o.noise, "noise kind")->check(CLI::IsMember({"uniform", "gaussian"}));
  seqlen->add_option("--t", o.seqlen_t, "thresholding factor");
  seqlen->add_option("--noise-level", o.seqlen_level, "noise level");

  auto* examples = app.add_subcommand("examples", "write original / contrasted / noised image triplets");
  add_common(examples, o, true);
  examples->add_option("--count", o.count, "number of digit examples");
  examples->add_option("--t", o.example_t, "thresholding factor");
  examples->add_option("--noise", o.noise, "noise kind")->check(CLI::IsMember({"uniform", "gaussian"}));
  examples->add_option("--noise-level", o.example_level, "noise level");
  examples->add_option("--seq-len", o.train.seq_len, "sequence length")->check(CLI::PositiveNumber);
  examples->add_option("--member", o.member, "ensemble member used for predictions");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the analytic gradients");
  add_common(gradcheck, o, false);
  gradcheck->add_option("--check-hidden", o.check_hidden, "hidden units of the test model")->check(CLI::PositiveNumber);
  gradcheck->add_option("--check-input", o.check_input, "input size of the test model")->check(CLI::PositiveNumber);
  gradcheck->add_option("--check-batch", o.check_batch, "batch size")->check(CLI::PositiveNumber);
  gradcheck->add_option("--epsilon", o.epsilon, "central-difference step");

  try {
    // Config-file values must be in place before the real parse so that
    // explicit flags override them.
    for (int i = 1; i + 1 < argc; ++i) {
      if (std::string(argv[i]) != "--config") continue;
      const auto kv = read_config_file(argv[i + 1]);
      for (auto* sub : app.get_subcommands({})) {
        for (int k = 1; k < argc; ++k)
          if (sub->get_name() == argv[k]) apply_config(*sub, kv);
      }
    }
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  logging_enabled() = !o.quiet;
  CLI::App* sub = app.get_subcommands().front();
  try {
    if (sub->get_name() != "gradcheck") {
      TrainConfig check = o.train;
      check.validate();
    }
    write_provenance(*sub, o, o.out);
    const std::string& name = sub->get_name();
    if (name == "train") return cmd_train(o);
    if (name == "sweep") return cmd_sweep(o, false);
    if (name == "ablation") return cmd_sweep(o, true);
    if (name == "seqlen") return cmd_seqlen(o);
    if (name == "examples") return cmd_examples(o);
    return cmd_gradcheck(o);
  } catch (const MissingFile& e) {
    std::cerr << "srlstm: " << e.what() << "\n";
    return kExitDataError;
  } catch (const Error& e) {
    std::cerr << "srlstm: " << e.what() << "\n";
    return e.code() == Errc::invalid_argument ? kExitUsage : kExitDataError;
  } catch (const std::exception& e) {
    std::cerr << "srlstm: " << e.what() << "\n";
    return kExitDataError;
  }
}

}  // namespace srlstm::cli
