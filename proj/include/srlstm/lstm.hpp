#pragma once

// Single-layer LSTM with ReLU in place of tanh, read out by a dense layer on
// the final hidden state.
//
//   i = sigmoid(Wi x + Ui h + bi)      f = sigmoid(Wf x + Uf h + bf)
//   o = sigmoid(Wo x + Uo h + bo)      g = relu(Wg x + Ug h + bg)
//   c' = f*c + i*g                     h' = o*relu(c')
//   logits = Wd h_L + bd
//
// All parameters live in one flat buffer in the order
//   Wi Wf Wo Wg (H x D each) | Ui Uf Uo Ug (H x H each) | bi bf bo bg (H each) | Wd (K x H) | bd (K)
// with every matrix row-major. The gate blocks are therefore a row-major
// stacked [4H x D] / [4H x H] matrix with gate rows in order i, f, o, g.
//
// Batched throughout: an input is a D x B matrix, one example per column.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "srlstm/error.hpp"
#include "srlstm/rng.hpp"

namespace srlstm {

using Index = Eigen::Index;

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

inline constexpr Index kDefaultHidden = 20;

enum class Gate : Index { input = 0, forget = 1, output = 2, candidate = 3 };

template <typename T>
class LstmParams {
 public:
  using Scalar = T;

  LstmParams() = default;
  LstmParams(Index hidden, Index input, Index classes)
      : hidden_(hidden), input_(input), classes_(classes),
        data_(static_cast<std::size_t>(parameter_count(hidden, input, classes)), T(0)) {
    require(hidden > 0 && input > 0 && classes > 1, Errc::shape_mismatch, "LSTM dimensions must be positive");
  }

  static constexpr Index parameter_count(Index h, Index d, Index k) {
    return 4 * h * d + 4 * h * h + 4 * h + k * h + k;
  }

  Index hidden() const { return hidden_; }
  Index input_size() const { return input_; }
  Index classes() const { return classes_; }
  Index size() const { return static_cast<Index>(data_.size()); }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  auto W() { return Eigen::Map<RowMatrix<T>>(data_.data() + w_offset(), 4 * hidden_, input_); }
  auto W() const { return Eigen::Map<const RowMatrix<T>>(data_.data() + w_offset(), 4 * hidden_, input_); }
  auto U() { return Eigen::Map<RowMatrix<T>>(data_.data() + u_offset(), 4 * hidden_, hidden_); }
  auto U() const { return Eigen::Map<const RowMatrix<T>>(data_.data() + u_offset(), 4 * hidden_, hidden_); }
  auto b() { return Eigen::Map<Vector<T>>(data_.data() + b_offset(), 4 * hidden_); }
  auto b() const { return Eigen::Map<const Vector<T>>(data_.data() + b_offset(), 4 * hidden_); }
  auto Wd() { return Eigen::Map<RowMatrix<T>>(data_.data() + wd_offset(), classes_, hidden_); }
  auto Wd() const { return Eigen::Map<const RowMatrix<T>>(data_.data() + wd_offset(), classes_, hidden_); }
  auto bd() { return Eigen::Map<Vector<T>>(data_.data() + bd_offset(), classes_); }
  auto bd() const { return Eigen::Map<const Vector<T>>(data_.data() + bd_offset(), classes_); }

  auto W(Gate g) { return W().middleRows(static_cast<Index>(g) * hidden_, hidden_); }
  auto U(Gate g) { return U().middleRows(static_cast<Index>(g) * hidden_, hidden_); }
  auto b(Gate g) { return b().segment(static_cast<Index>(g) * hidden_, hidden_); }

  bool same_shape(const LstmParams& other) const {
    return hidden_ == other.hidden_ && input_ == other.input_ && classes_ == other.classes_;
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  template <typename U>
  LstmParams<U> cast() const {
    LstmParams<U> out(hidden_, input_, classes_);
    auto dst = out.values();
    for (std::size_t i = 0; i < data_.size(); ++i) dst[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const LstmParams&) const = default;

 private:
  Index w_offset() const { return 0; }
  Index u_offset() const { return 4 * hidden_ * input_; }
  Index b_offset() const { return u_offset() + 4 * hidden_ * hidden_; }
  Index wd_offset() const { return b_offset() + 4 * hidden_; }
  Index bd_offset() const { return wd_offset() + classes_ * hidden_; }

  Index hidden_ = 0;
  Index input_ = 0;
  Index classes_ = 0;
  // Fixed alignment keeps Eigen's vectorized loops (and so rounding) independent of the heap address.
  std::vector<T, Eigen::aligned_allocator<T>> data_;
};

/// Uniform(-s, s) weights with s = 1/sqrt(fan_in) per matrix, zero biases
/// except the forget gate (1.0).
template <typename T>
LstmParams<T> init_params(Index hidden, Index input, Index classes, std::uint64_t seed) {
  LstmParams<T> p(hidden, input, classes);
  auto gen = rng::make_engine({seed, static_cast<std::uint64_t>(rng::Stream::init)});
  auto fill = [&gen](auto&& block, double scale) {
    for (Index r = 0; r < block.rows(); ++r)
      for (Index c = 0; c < block.cols(); ++c) block(r, c) = static_cast<T>((2.0 * rng::uniform01(gen) - 1.0) * scale);
  };
  fill(p.W(), 1.0 / std::sqrt(static_cast<double>(input)));
  fill(p.U(), 1.0 / std::sqrt(static_cast<double>(hidden)));
  fill(p.Wd(), 1.0 / std::sqrt(static_cast<double>(hidden)));
  p.b(Gate::forget).setConstant(T(1));
  return p;
}

/// Per-step values kept for backpropagation through time.
template <typename T>
struct StepCache {
  Matrix<T> gates;   // 4H x B activations: i, f, o (sigmoid), g (relu)
  Matrix<T> c_prev;  // H x B
  Matrix<T> c;       // H x B
  Matrix<T> h_prev;  // H x B
  std::size_t input_index = 0;
};

template <typename T>
struct StepResult {
  Matrix<T> h;
  Matrix<T> c;
  StepCache<T> cache;
};

namespace detail {

template <typename T, typename Derived>
StepResult<T> lstm_cell(const LstmParams<T>& p, const Eigen::MatrixBase<Derived>& wx, const Matrix<T>& h_prev,
                        const Matrix<T>& c_prev) {
  const Index H = p.hidden();
  StepResult<T> out;
  auto& z = out.cache.gates;
  z = wx + p.U() * h_prev;
  z.colwise() += p.b();
  z.topRows(3 * H) = (T(1) + (-z.topRows(3 * H).array()).exp()).inverse().matrix();
  z.bottomRows(H) = z.bottomRows(H).cwiseMax(T(0));

  const auto i = z.middleRows(0, H).array();
  const auto f = z.middleRows(H, H).array();
  const auto o = z.middleRows(2 * H, H).array();
  const auto g = z.middleRows(3 * H, H).array();
  out.c = (f * c_prev.array() + i * g).matrix();
  out.h = (o * out.c.array().max(T(0))).matrix();
  out.cache.c_prev = c_prev;
  out.cache.c = out.c;
  out.cache.h_prev = h_prev;
  return out;
}

}  // namespace detail

/// One LSTM step on a batch (x: D x B, h_prev/c_prev: H x B).
template <typename T>
StepResult<T> lstm_step(const LstmParams<T>& p, const Matrix<T>& x, const Matrix<T>& h_prev, const Matrix<T>& c_prev) {
  require(x.rows() == p.input_size(), Errc::shape_mismatch,
          "input has " + std::to_string(x.rows()) + " rows, expected " + std::to_string(p.input_size()));
  require(h_prev.rows() == p.hidden() && c_prev.rows() == p.hidden() && h_prev.cols() == x.cols() &&
              c_prev.cols() == x.cols(),
          Errc::shape_mismatch, "hidden/cell state shape does not match H x B");
  return detail::lstm_cell(p, p.W() * x, h_prev, c_prev);
}

template <typename T>
struct ForwardPass {
  Matrix<T> logits;                  // K x B
  Matrix<T> h_last;                  // H x B
  std::vector<StepCache<T>> steps;   // one per timestep
  std::vector<Matrix<T>> inputs;     // distinct inputs: 1 (repeated every step) or L
};

/// Runs `seq_len` steps from zero state. `inputs` holds either one D x B
/// matrix fed at every step, or exactly `seq_len` of them.
template <typename T>
ForwardPass<T> forward(const LstmParams<T>& p, std::span<const Matrix<T>> inputs, Index seq_len) {
  require(seq_len >= 1, Errc::shape_mismatch, "sequence length must be >= 1");
  require(!inputs.empty() && (inputs.size() == 1 || static_cast<Index>(inputs.size()) == seq_len),
          Errc::shape_mismatch, "need 1 or seq_len input matrices");
  const Index B = inputs.front().cols();
  for (const auto& x : inputs)
    require(x.rows() == p.input_size() && x.cols() == B, Errc::shape_mismatch, "input matrices must all be D x B");

  ForwardPass<T> pass;
  pass.inputs.assign(inputs.begin(), inputs.end());
  pass.steps.reserve(static_cast<std::size_t>(seq_len));

  Matrix<T> h = Matrix<T>::Zero(p.hidden(), B);
  Matrix<T> c = Matrix<T>::Zero(p.hidden(), B);
  Matrix<T> wx;
  for (Index t = 0; t < seq_len; ++t) {
    const std::size_t k = inputs.size() == 1 ? 0 : static_cast<std::size_t>(t);
    if (t == 0 || inputs.size() > 1) wx.noalias() = p.W() * inputs[k];
    auto step = detail::lstm_cell(p, wx, h, c);
    step.cache.input_index = k;
    h = std::move(step.h);
    c = std::move(step.c);
    pass.steps.push_back(std::move(step.cache));
  }
  pass.logits = p.Wd() * h;
  pass.logits.colwise() += p.bd();
  pass.h_last = std::move(h);
  return pass;
}

template <typename T>
ForwardPass<T> forward(const LstmParams<T>& p, std::span<const Matrix<T>> inputs) {
  return forward(p, inputs, static_cast<Index>(inputs.size()));
}

/// Exact gradients of sum_b (dlogits . logits_b) w.r.t. every parameter,
/// backpropagated through all steps. relu'(0) = 0.
template <typename T>
LstmParams<T> backward(const LstmParams<T>& p, const ForwardPass<T>& pass, const Matrix<T>& dlogits) {
  const Index H = p.hidden();
  const Index B = pass.h_last.cols();
  require(!pass.steps.empty() && pass.h_last.rows() == H && !pass.inputs.empty() &&
              pass.inputs.front().rows() == p.input_size() && pass.logits.rows() == p.classes(),
          Errc::cache_mismatch, "forward pass was produced by a model of different shape");
  require(dlogits.rows() == p.classes() && dlogits.cols() == B, Errc::cache_mismatch,
          "dlogits must be K x B matching the forward pass");

  LstmParams<T> grad(p.hidden(), p.input_size(), p.classes());
  grad.Wd().noalias() = dlogits * pass.h_last.transpose();
  grad.bd() = dlogits.rowwise().sum();

  Matrix<T> dh = p.Wd().transpose() * dlogits;
  Matrix<T> dc = Matrix<T>::Zero(H, B);
  Matrix<T> dz(4 * H, B);
  std::vector<Matrix<T>> dz_by_input(pass.inputs.size(), Matrix<T>::Zero(4 * H, B));
  auto gU = grad.U();

  for (auto it = pass.steps.rbegin(); it != pass.steps.rend(); ++it) {
    const auto& s = *it;
    const auto i = s.gates.middleRows(0, H).array();
    const auto f = s.gates.middleRows(H, H).array();
    const auto o = s.gates.middleRows(2 * H, H).array();
    const auto g = s.gates.middleRows(3 * H, H).array();
    const auto c = s.c.array();

    const auto c_pos = (c > T(0)).template cast<T>();
    dc.array() += dh.array() * o * c_pos;
    const Matrix<T> d_o = (dh.array() * c.max(T(0))).matrix();

    dz.middleRows(0, H) = (dc.array() * g * i * (T(1) - i)).matrix();
    dz.middleRows(H, H) = (dc.array() * s.c_prev.array() * f * (T(1) - f)).matrix();
    dz.middleRows(2 * H, H) = (d_o.array() * o * (T(1) - o)).matrix();
    dz.middleRows(3 * H, H) = (dc.array() * i * (g > T(0)).template cast<T>()).matrix();

    dz_by_input[s.input_index] += dz;
    gU.noalias() += dz * s.h_prev.transpose();
    grad.b() += dz.rowwise().sum();
    dh.noalias() = p.U().transpose() * dz;
    dc.array() *= f;
  }

  auto gW = grad.W();
  for (std::size_t k = 0; k < pass.inputs.size(); ++k) gW.noalias() += dz_by_input[k] * pass.inputs[k].transpose();
  return grad;
}

/// Index of the largest entry in each column; ties go to the lowest index.
template <typename T>
std::vector<int> argmax_columns(const Matrix<T>& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.cols()));
  for (Index j = 0; j < logits.cols(); ++j) {
    Index best = 0;
    for (Index k = 1; k < logits.rows(); ++k)
      if (logits(k, j) > logits(best, j)) best = k;
    out[static_cast<std::size_t>(j)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace srlstm
