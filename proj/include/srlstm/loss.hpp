#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "srlstm/error.hpp"
#include "srlstm/lstm.hpp"

namespace srlstm {

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  const T m = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  T sum = 0;
  for (std::size_t k = 0; k < logits.size(); ++k) sum += (p[k] = std::exp(logits[k] - m));
  for (auto& v : p) v /= sum;
  return p;
}

template <typename T>
struct CrossEntropy {
  T loss;
  std::vector<T> dlogits;  // softmax(logits) - onehot(label)
};

/// -log softmax(logits)[label], stabilized by subtracting the max logit.
template <typename T>
CrossEntropy<T> softmax_cross_entropy(std::span<const T> logits, int label) {
  require(label >= 0 && static_cast<std::size_t>(label) < logits.size(), Errc::label_out_of_range,
          "label " + std::to_string(label) + " with " + std::to_string(logits.size()) + " classes");
  const T m = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (T z : logits) sum += std::exp(z - m);
  CrossEntropy<T> out{std::log(sum) + m - logits[static_cast<std::size_t>(label)], softmax(logits)};
  out.dlogits[static_cast<std::size_t>(label)] -= T(1);
  return out;
}

template <typename T>
struct BatchLoss {
  double mean_loss;
  Matrix<T> dlogits;  // K x B, already divided by B
};

/// Mean cross-entropy over the columns of a K x B logit matrix.
template <typename T>
BatchLoss<T> batch_cross_entropy(const Matrix<T>& logits, std::span<const std::uint8_t> labels) {
  require(static_cast<Index>(labels.size()) == logits.cols(), Errc::shape_mismatch, "one label per column");
  const Index K = logits.rows();
  const Index B = logits.cols();
  BatchLoss<T> out{0.0, Matrix<T>(K, B)};
  for (Index j = 0; j < B; ++j) {
    const auto col = logits.col(j);
    auto ce = softmax_cross_entropy<T>(std::span<const T>(col.data(), static_cast<std::size_t>(K)),
                                       labels[static_cast<std::size_t>(j)]);
    out.mean_loss += static_cast<double>(ce.loss);
    for (Index k = 0; k < K; ++k) out.dlogits(k, j) = ce.dlogits[static_cast<std::size_t>(k)] / static_cast<T>(B);
  }
  out.mean_loss /= static_cast<double>(B);
  return out;
}

}  // namespace srlstm
