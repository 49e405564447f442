#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "srlstm/error.hpp"
#include "srlstm/loss.hpp"
#include "srlstm/lstm.hpp"

namespace srlstm {

/// A batch of labelled sequences: `inputs` holds one D x B matrix repeated
/// at every step, or `seq_len` of them.
template <typename T>
struct SequenceBatch {
  std::vector<Matrix<T>> inputs;
  Index seq_len = 1;
  std::vector<std::uint8_t> labels;
};

template <typename T>
double batch_loss(const LstmParams<T>& params, const SequenceBatch<T>& batch) {
  const auto pass = forward<T>(params, batch.inputs, batch.seq_len);
  return batch_cross_entropy(pass.logits, batch.labels).mean_loss;
}

template <typename T>
LstmParams<T> batch_gradient(const LstmParams<T>& params, const SequenceBatch<T>& batch, double* loss = nullptr) {
  const auto pass = forward<T>(params, batch.inputs, batch.seq_len);
  auto ce = batch_cross_entropy(pass.logits, batch.labels);
  if (loss) *loss = ce.mean_loss;
  return backward(params, pass, ce.dlogits);
}

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-12) over all
/// parameters, with numeric gradients from central differences of size
/// `epsilon`. Costs two forward passes per parameter.
inline double gradient_check(const LstmParams<double>& params, const SequenceBatch<double>& batch, double epsilon) {
  require(epsilon > 0.0 && std::isfinite(epsilon), Errc::degenerate_step, "finite-difference step must be > 0");
  const auto analytic = batch_gradient(params, batch);
  LstmParams<double> probe = params;
  auto values = probe.values();
  const auto a = analytic.values();

  double worst = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double saved = values[k];
    values[k] = saved + epsilon;
    const double up = batch_loss(probe, batch);
    values[k] = saved - epsilon;
    const double down = batch_loss(probe, batch);
    values[k] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(a[k]), std::abs(numeric), 1e-12});
    worst = std::max(worst, std::abs(a[k] - numeric) / denom);
  }
  return worst;
}

/// Random model and batch for gradient checking at small dimensions.
inline std::pair<LstmParams<double>, SequenceBatch<double>> random_check_problem(
    Index hidden, Index input, Index classes, Index seq_len, Index batch_size, bool repeated_input,
    std::uint64_t seed) {
  auto params = init_params<double>(hidden, input, classes, seed);
  auto gen = rng::make_engine({seed, 0x67636b});
  // Random biases put every gate in its active range; a positive candidate
  // bias keeps the relu units alive. Dead units or saturated logits give
  // ~1e-9 gradients that central differences cannot resolve.
  for (auto& v : params.b()) v = rng::uniform01(gen) - 0.5;
  for (auto& v : params.b(Gate::candidate)) v = 0.5 + 0.5 * rng::uniform01(gen);
  for (auto& v : params.bd()) v = rng::uniform01(gen) - 0.5;

  SequenceBatch<double> batch;
  batch.seq_len = seq_len;
  const Index n_inputs = repeated_input ? 1 : seq_len;
  for (Index t = 0; t < n_inputs; ++t) {
    Matrix<double> x(input, batch_size);
    for (Index j = 0; j < batch_size; ++j)
      for (Index r = 0; r < input; ++r) x(r, j) = rng::uniform01(gen);
    batch.inputs.push_back(std::move(x));
  }
  for (Index j = 0; j < batch_size; ++j)
    batch.labels.push_back(static_cast<std::uint8_t>(rng::uniform_below(gen, static_cast<std::uint64_t>(classes))));
  return {std::move(params), std::move(batch)};
}

}  // namespace srlstm
