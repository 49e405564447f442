#pragma once

// Experiment orchestration: ensemble training on clean inputs, evaluation
// under perturbation, and the sweeps built on top of it.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "srlstm/adam.hpp"
#include "srlstm/checkpoint.hpp"
#include "srlstm/dataset.hpp"
#include "srlstm/error.hpp"
#include "srlstm/log.hpp"
#include "srlstm/loss.hpp"
#include "srlstm/lstm.hpp"
#include "srlstm/parallel.hpp"
#include "srlstm/perturb.hpp"
#include "srlstm/rng.hpp"

namespace srlstm {

inline const std::vector<double> kDefaultTFactors{1.0, 0.3, 0.25, 0.2, 0.15, 0.1, 0.05};
inline const std::vector<double> kDefaultNoiseLevels{0.0, 0.01, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3};
inline const std::vector<int> kDefaultSeqLens{1, 2, 4, 8};
inline constexpr double kSeqLenStudyT = 0.15;
inline constexpr double kSeqLenStudyLevel = 0.075;
inline constexpr int kEnsembleSize = 5;

struct TrainConfig {
  int seq_len = 1;
  bool include_empty = true;
  int epochs = 5;
  int batch_size = 128;
  double lr = 1e-3;
  std::uint64_t master_seed = 0;
  std::size_t empty_count_train = kDefaultEmptyTrain;
  std::size_t empty_count_val = kDefaultEmptyValidation;
  int hidden = static_cast<int>(kDefaultHidden);
  int ensemble_size = kEnsembleSize;

  int num_classes() const { return include_empty ? 11 : 10; }

  void validate() const {
    require(epochs >= 1, Errc::invalid_argument, "epochs must be >= 1");
    require(batch_size >= 1, Errc::invalid_argument, "batch size must be >= 1");
    require(seq_len >= 1, Errc::invalid_argument, "sequence length must be >= 1");
    require(hidden >= 1, Errc::invalid_argument, "hidden units must be >= 1");
    require(ensemble_size >= 1, Errc::invalid_argument, "ensemble size must be >= 1");
    require(lr > 0.0 && std::isfinite(lr), Errc::invalid_argument, "learning rate must be > 0");
  }

  /// Directory name under which a trained ensemble for this config is cached.
  std::string cache_tag() const {
    std::ostringstream os;
    os << "k" << num_classes() << "_L" << seq_len << "_h" << hidden << "_e" << epochs << "_b" << batch_size << "_lr"
       << lr << "_n" << (include_empty ? empty_count_train : 0) << "_m" << ensemble_size << "_s" << master_seed;
    return os.str();
  }
};

struct TrainedModel {
  LstmParams<float> params;
  std::vector<double> epoch_losses;
  std::uint64_t seed = 0;
};

inline std::uint64_t member_seed(std::uint64_t master_seed, int member) {
  return rng::derive_seed({master_seed, static_cast<std::uint64_t>(rng::Stream::member), static_cast<std::uint64_t>(member)});
}

/// Mini-batch Adam on clean full-contrast images, each fed identically at
/// all `seq_len` steps; loss on the final step only.
inline TrainedModel train_model(const Dataset& data, const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  require(data.split == Split::train, Errc::invalid_argument, "training requires the train split");
  require(data.num_classes == cfg.num_classes(), Errc::class_count_mismatch,
          "dataset has " + std::to_string(data.num_classes) + " classes, config expects " +
              std::to_string(cfg.num_classes()));
  require(data.size() > 0, Errc::invalid_argument, "empty training set");

  const Index D = static_cast<Index>(kImagePixels);
  const Index N = static_cast<Index>(data.size());
  const Eigen::Map<const Matrix<float>> all(data.pixels.data(), D, N);

  TrainedModel out{init_params<float>(cfg.hidden, D, data.num_classes, seed), {}, seed};
  auto adam = AdamState<float>::for_params(out.params, static_cast<float>(cfg.lr));

  std::vector<std::size_t> order(data.size());
  std::vector<Matrix<float>> input(1);
  std::vector<std::uint8_t> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto gen = rng::make_engine(
        {seed, static_cast<std::uint64_t>(rng::Stream::shuffle), static_cast<std::uint64_t>(epoch)});
    rng::shuffle(order.begin(), order.end(), gen);

    double loss_sum = 0.0;
    for (Index start = 0; start < N; start += cfg.batch_size) {
      const Index B = std::min<Index>(cfg.batch_size, N - start);
      auto& X = input.front();
      X.resize(D, B);
      labels.resize(static_cast<std::size_t>(B));
      for (Index j = 0; j < B; ++j) {
        const auto src = order[static_cast<std::size_t>(start + j)];
        X.col(j) = all.col(static_cast<Index>(src));
        labels[static_cast<std::size_t>(j)] = data.labels[src];
      }
      const auto pass = forward<float>(out.params, input, cfg.seq_len);
      const auto ce = batch_cross_entropy(pass.logits, labels);
      require(std::isfinite(ce.mean_loss), Errc::non_finite_loss,
              "loss became non-finite at epoch " + std::to_string(epoch + 1) + ", batch starting at " +
                  std::to_string(start));
      adam_update(adam, out.params, backward(out.params, pass, ce.dlogits));
      loss_sum += ce.mean_loss * static_cast<double>(B);
    }
    require(out.params.all_finite(), Errc::non_finite_loss, "parameters became non-finite");
    out.epoch_losses.push_back(loss_sum / static_cast<double>(N));
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - started;
    log_line("train seed=", seed, " K=", data.num_classes, " L=", cfg.seq_len, " epoch ", epoch + 1, "/", cfg.epochs,
             " loss=", out.epoch_losses.back(), " (", took.count(), "s)");
  }
  return out;
}

inline std::vector<TrainedModel> train_ensemble(const Dataset& data, const TrainConfig& cfg, unsigned jobs = 1) {
  cfg.validate();
  std::vector<TrainedModel> members(static_cast<std::size_t>(cfg.ensemble_size));
  parallel_for(members.size(), jobs, [&](std::size_t k) {
    members[k] = train_model(data, cfg, member_seed(cfg.master_seed, static_cast<int>(k)));
  });
  return members;
}

struct EnsembleCache {
  std::filesystem::path dir;  // empty disables caching
  bool retrain = false;
};

/// Loads the ensemble for `cfg` from the cache, training and storing it when
/// absent (or when `retrain` is set).
inline std::vector<LstmParams<float>> load_or_train_ensemble(const Dataset& data, const TrainConfig& cfg,
                                                             const EnsembleCache& cache, unsigned jobs = 1) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.ensemble_size);
  std::vector<std::filesystem::path> paths;
  if (!cache.dir.empty()) {
    const auto dir = cache.dir / cfg.cache_tag();
    for (std::size_t k = 0; k < n; ++k) paths.push_back(dir / ("member_" + std::to_string(k) + ".ckpt"));
    const bool cached = std::all_of(paths.begin(), paths.end(), [](const auto& p) { return std::filesystem::exists(p); });
    if (cached && !cache.retrain) {
      std::vector<LstmParams<float>> models;
      for (const auto& p : paths) {
        models.push_back(load_checkpoint(p));
        require(models.back().classes() == cfg.num_classes() && models.back().hidden() == cfg.hidden,
                Errc::class_count_mismatch, "cached checkpoint " + p.string() + " does not match the config");
      }
      log_line("loaded cached ensemble ", dir.string());
      return models;
    }
  }

  auto trained = train_ensemble(data, cfg, jobs);
  std::vector<LstmParams<float>> models;
  for (auto& m : trained) models.push_back(std::move(m.params));
  if (!paths.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(paths.front().parent_path(), ec);
    if (ec) throw Error(Errc::io_failure, "cannot create " + paths.front().parent_path().string());
    for (std::size_t k = 0; k < n; ++k) {
      auto tmp = paths[k];
      tmp += ".tmp";
      save_checkpoint(tmp, models[k]);
      std::filesystem::rename(tmp, paths[k]);
    }
  }
  return models;
}

struct EvalOptions {
  std::uint64_t noise_seed = 0;
  unsigned jobs = 1;
  Index chunk = 256;
};

struct EvalStats {
  Condition condition;
  int num_classes = 11;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::optional<double> mean_detection_rate;  // only with the no-signal class
  std::vector<double> per_model_accuracy;
  std::vector<double> per_model_detection;
};

struct SweepTable {
  std::vector<EvalStats> rows;
};

/// Population mean and standard deviation.
inline std::pair<double, double> mean_std(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

struct MemberScore {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t digits = 0;
  std::size_t detected = 0;
};

/// Predictions of one model for every example of `val` under `cond`. Noise
/// for example e at step s comes from substream (seed, model_index, cond, e, s).
inline std::vector<int> predict_dataset(const LstmParams<float>& model, std::size_t model_index, const Dataset& val,
                                        const Condition& cond, const EvalOptions& opts) {
  cond.validate();
  const Index D = static_cast<Index>(kImagePixels);
  const Index N = static_cast<Index>(val.size());
  require(model.input_size() == D, Errc::shape_mismatch, "model input size must be 784");
  const Eigen::Map<const Matrix<float>> all(val.pixels.data(), D, N);
  const auto tf = static_cast<float>(cond.t_factor);
  const NoiseKey key0{opts.noise_seed, model_index, cond.key(), 0};

  std::vector<int> preds;
  preds.reserve(val.size());
  std::vector<Matrix<float>> inputs;
  for (Index start = 0; start < N; start += opts.chunk) {
    const Index B = std::min<Index>(opts.chunk, N - start);
    Matrix<float> base = all.middleCols(start, B) * tf;
    if (!cond.noisy()) {
      inputs.assign(1, std::move(base));
    } else {
      inputs.assign(static_cast<std::size_t>(cond.seq_len), Matrix<float>(D, B));
      for (Index j = 0; j < B; ++j) {
        NoiseKey key = key0;
        key.example = static_cast<std::uint64_t>(start + j);
        const std::span<const float> base_col(base.col(j).data(), kImagePixels);
        for (std::size_t s = 0; s < inputs.size(); ++s)
          perturb_step_into(std::span<float>(inputs[s].col(j).data(), kImagePixels), base_col, cond, key, s);
      }
    }
    const auto pass = forward<float>(model, inputs, cond.seq_len);
    const auto p = argmax_columns(pass.logits);
    preds.insert(preds.end(), p.begin(), p.end());
  }
  return preds;
}

inline MemberScore score_predictions(const Dataset& val, std::span<const int> preds) {
  MemberScore s;
  s.total = val.size();
  for (std::size_t e = 0; e < val.size(); ++e) {
    s.correct += preds[e] == val.labels[e];
    if (val.labels[e] != kEmptyLabel) {
      ++s.digits;
      s.detected += preds[e] != kEmptyLabel;
    }
  }
  return s;
}

/// Evaluates every (condition, model) pair. Work units are independent, so
/// the result does not depend on `opts.jobs`.
inline std::vector<EvalStats> evaluate_conditions(std::span<const LstmParams<float>> models, const Dataset& val,
                                                  std::span<const Condition> conds, const EvalOptions& opts) {
  require(!models.empty(), Errc::invalid_argument, "no models to evaluate");
  require(val.split == Split::validation, Errc::invalid_argument, "evaluation requires the validation split");
  require(val.size() > 0, Errc::invalid_argument, "empty validation set");
  for (const auto& m : models)
    require(m.classes() == val.num_classes, Errc::class_count_mismatch,
            "model has " + std::to_string(m.classes()) + " classes, validation set " + std::to_string(val.num_classes));
  for (const auto& c : conds) c.validate();

  const std::size_t M = models.size();
  std::vector<MemberScore> scores(conds.size() * M);
  std::vector<std::atomic<std::size_t>> remaining(conds.size());
  for (auto& r : remaining) r = M;
  std::vector<std::atomic<long long>> micros(conds.size());
  for (auto& u : micros) u = 0;

  parallel_for(scores.size(), opts.jobs, [&](std::size_t unit) {
    const std::size_t ci = unit / M;
    const std::size_t mi = unit % M;
    const auto started = std::chrono::steady_clock::now();
    const auto preds = predict_dataset(models[mi], mi, val, conds[ci], opts);
    scores[unit] = score_predictions(val, preds);
    micros[ci] += std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - started).count();
    if (--remaining[ci] == 0) {
      const auto& c = conds[ci];
      log_line("eval t=", c.t_factor, " noise=", to_string(c.noise_kind), " level=", c.effective_level(),
               " L=", c.seq_len, " models=", M, " (", static_cast<double>(micros[ci].load()) * 1e-6, "s)");
    }
  });

  std::vector<EvalStats> out;
  out.reserve(conds.size());
  for (std::size_t ci = 0; ci < conds.size(); ++ci) {
    EvalStats st;
    st.condition = conds[ci];
    st.num_classes = val.num_classes;
    for (std::size_t mi = 0; mi < M; ++mi) {
      const auto& s = scores[ci * M + mi];
      st.per_model_accuracy.push_back(static_cast<double>(s.correct) / static_cast<double>(s.total));
      if (val.num_classes == 11 && s.digits > 0)
        st.per_model_detection.push_back(static_cast<double>(s.detected) / static_cast<double>(s.digits));
    }
    std::tie(st.mean_accuracy, st.std_accuracy) = mean_std(st.per_model_accuracy);
    if (st.per_model_detection.size() == M) st.mean_detection_rate = mean_std(st.per_model_detection).first;
    out.push_back(std::move(st));
  }
  return out;
}

inline EvalStats evaluate(std::span<const LstmParams<float>> models, const Dataset& val, const Condition& cond,
                          const EvalOptions& opts = {}) {
  return evaluate_conditions(models, val, std::span<const Condition>(&cond, 1), opts).front();
}

/// Full t_factors x noise_levels grid for one noise kind, rows in grid order.
inline SweepTable run_sweep(std::span<const LstmParams<float>> models, const Dataset& val,
                            std::span<const double> t_factors, NoiseKind kind, std::span<const double> noise_levels,
                            int seq_len, const EvalOptions& opts = {}) {
  require(!t_factors.empty() && !noise_levels.empty(), Errc::invalid_argument, "sweep grids must be non-empty");
  std::vector<Condition> conds;
  for (double t : t_factors)
    for (double level : noise_levels) conds.push_back(Condition{t, kind, level, seq_len});
  return SweepTable{evaluate_conditions(models, val, conds, opts)};
}

/// The sweep on models trained without the no-signal class.
inline SweepTable run_ablation(std::span<const LstmParams<float>> models, const Dataset& val,
                               std::span<const double> t_factors, NoiseKind kind,
                               std::span<const double> noise_levels, int seq_len, const EvalOptions& opts = {}) {
  require(val.num_classes == 10, Errc::class_count_mismatch, "ablation runs on the 10-class validation set");
  return run_sweep(models, val, t_factors, kind, noise_levels, seq_len, opts);
}

using EnsembleProvider = std::function<std::vector<LstmParams<float>>(const TrainConfig&)>;

/// Trains (via `provider`) a fresh ensemble per sequence length and evaluates
/// it at `cond` with that length.
inline SweepTable run_seqlen_study(const Dataset& val, const TrainConfig& base, std::span<const int> lengths,
                                   Condition cond, const EnsembleProvider& provider, const EvalOptions& opts = {}) {
  require(!lengths.empty(), Errc::invalid_argument, "no sequence lengths given");
  SweepTable table;
  for (int L : lengths) {
    require(L >= 1, Errc::invalid_argument, "sequence length must be >= 1");
    TrainConfig cfg = base;
    cfg.seq_len = L;
    const auto models = provider(cfg);
    cond.seq_len = L;
    table.rows.push_back(evaluate(models, val, cond, opts));
  }
  return table;
}

inline EnsembleProvider training_provider(const Dataset& train, const EnsembleCache& cache = {}, unsigned jobs = 1) {
  return [&train, cache, jobs](const TrainConfig& cfg) { return load_or_train_ensemble(train, cfg, cache, jobs); };
}

/// Class predicted for one explicit input sequence (each step 784 pixels).
inline int predict_sequence(const LstmParams<float>& model, const std::vector<std::vector<float>>& steps) {
  std::vector<Matrix<float>> inputs;
  for (const auto& s : steps) {
    require(s.size() == static_cast<std::size_t>(model.input_size()), Errc::shape_mismatch, "step size != model input");
    inputs.push_back(Eigen::Map<const Matrix<float>>(s.data(), static_cast<Index>(s.size()), 1));
  }
  return argmax_columns(forward<float>(model, inputs).logits).front();
}

}  // namespace srlstm
