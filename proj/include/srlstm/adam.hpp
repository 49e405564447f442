#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "srlstm/error.hpp"
#include "srlstm/lstm.hpp"

namespace srlstm {

template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::int64_t step_count = 0;
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);

  static AdamState for_params(const LstmParams<T>& params, T learning_rate = T(1e-3)) {
    AdamState s;
    s.m.assign(static_cast<std::size_t>(params.size()), T(0));
    s.v.assign(static_cast<std::size_t>(params.size()), T(0));
    s.lr = learning_rate;
    return s;
  }
};

/// Bias-corrected Adam step, in place.
template <typename T>
void adam_update(AdamState<T>& state, LstmParams<T>& params, const LstmParams<T>& grads) {
  require(params.same_shape(grads) && state.m.size() == static_cast<std::size_t>(params.size()) &&
              state.v.size() == state.m.size(),
          Errc::shape_mismatch, "optimizer state, parameters and gradients disagree in shape");
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const T c1 = static_cast<T>(1.0 - std::pow(static_cast<double>(state.beta1), t));
  const T c2 = static_cast<T>(1.0 - std::pow(static_cast<double>(state.beta2), t));

  auto p = params.values();
  const auto g = grads.values();
  for (std::size_t k = 0; k < p.size(); ++k) {
    state.m[k] = state.beta1 * state.m[k] + (T(1) - state.beta1) * g[k];
    state.v[k] = state.beta2 * state.v[k] + (T(1) - state.beta2) * g[k] * g[k];
    const T m_hat = state.m[k] / c1;
    const T v_hat = state.v[k] / c2;
    p[k] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

}  // namespace srlstm
