#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "srlstm/loss.hpp"

namespace srlstm {
namespace {

TEST(SoftmaxCrossEntropy, UniformLogits) {
  const std::vector<double> logits(11, 0.7);
  const auto ce = softmax_cross_entropy<double>(logits, 4);
  EXPECT_NEAR(ce.loss, std::log(11.0), 1e-12);
  EXPECT_NEAR(ce.loss, 2.3979, 1e-4);
  for (std::size_t k = 0; k < 11; ++k) EXPECT_NEAR(ce.dlogits[k], 1.0 / 11.0 - (k == 4 ? 1.0 : 0.0), 1e-12);
}

TEST(SoftmaxCrossEntropy, LargeLogitIsStable) {
  std::vector<double> logits(11, 0.0);
  logits[0] = 1000.0;
  const auto ce = softmax_cross_entropy<double>(logits, 0);
  EXPECT_TRUE(std::isfinite(ce.loss));
  EXPECT_NEAR(ce.loss, 0.0, 1e-12);
  std::vector<float> logits_f(11, 0.0f);
  logits_f[0] = 1000.0f;
  EXPECT_NEAR(softmax_cross_entropy<float>(logits_f, 0).loss, 0.0f, 1e-6f);
  EXPECT_NEAR(softmax_cross_entropy<float>(logits_f, 3).loss, 1000.0f, 1e-3f);
}

TEST(SoftmaxCrossEntropy, GradientMatchesFiniteDifferences) {
  auto gen = rng::make_engine({12});
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> z(11);
    for (auto& v : z) v = 6.0 * rng::uniform01(gen) - 3.0;
    const int label = static_cast<int>(rng::uniform_below(gen, 11));
    const auto ce = softmax_cross_entropy<double>(z, label);
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double h = 1e-5;
      auto up = z, down = z;
      up[k] += h;
      down[k] -= h;
      const double numeric = (softmax_cross_entropy<double>(up, label).loss -
                              softmax_cross_entropy<double>(down, label).loss) / (2 * h);
      const double rel = std::abs(numeric - ce.dlogits[k]) / std::max({std::abs(numeric), std::abs(ce.dlogits[k]), 1e-12});
      EXPECT_LT(rel, 1e-6) << "trial " << trial << " k " << k;
    }
  }
}

TEST(Softmax, RowsAreProbabilityVectors) {
  auto gen = rng::make_engine({13});
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t K = 10 + trial % 2;
    std::vector<float> z(K);
    const double scale = trial % 3 == 0 ? 100.0 : 5.0;
    for (auto& v : z) v = static_cast<float>(scale * (2.0 * rng::uniform01(gen) - 1.0));
    const auto p = softmax<float>(z);
    for (float v : p) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-6);
  }
}

TEST(SoftmaxCrossEntropy, LabelOutOfRange) {
  const std::vector<double> z(10, 0.0);
  try {
    softmax_cross_entropy<double>(z, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::label_out_of_range);
  }
  EXPECT_THROW(softmax_cross_entropy<double>(z, -1), Error);
}

TEST(BatchCrossEntropy, AveragesColumns) {
  Matrix<double> logits = Matrix<double>::Zero(11, 4);
  logits(2, 1) = 5.0;
  const std::vector<std::uint8_t> labels{0, 2, 10, 3};
  const auto batch = batch_cross_entropy(logits, labels);
  double sum = 0.0;
  for (Index j = 0; j < 4; ++j) {
    const auto c = logits.col(j).eval();
    const auto ce = softmax_cross_entropy<double>(std::span<const double>(c.data(), 11), labels[static_cast<std::size_t>(j)]);
    sum += ce.loss;
    for (Index k = 0; k < 11; ++k) EXPECT_DOUBLE_EQ(batch.dlogits(k, j), ce.dlogits[static_cast<std::size_t>(k)] / 4.0);
  }
  EXPECT_NEAR(batch.mean_loss, sum / 4.0, 1e-12);
}

}  // namespace
}  // namespace srlstm
