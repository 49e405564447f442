#include <cmath>

#include <gtest/gtest.h>

#include "srlstm/gradcheck.hpp"

namespace srlstm {
namespace {

TEST(GradientCheck, SingleStepSmallModel) {
  const auto [params, batch] = random_check_problem(2, 3, 11, 1, 1, true, 1);
  EXPECT_LT(gradient_check(params, batch, 1e-5), 1e-4);
}

TEST(GradientCheck, FourStepsIdenticalInput) {
  const auto [params, batch] = random_check_problem(2, 3, 11, 4, 1, true, 2);
  EXPECT_LT(gradient_check(params, batch, 1e-5), 1e-4);
}

// Property: random small models, both class counts, L in {1, 4}, repeated
// and distinct per-step inputs.
TEST(GradientCheck, RandomModelsAllConfigurations) {
  for (std::uint64_t seed = 10; seed < 16; ++seed) {
    for (Index K : {10, 11}) {
      for (Index L : {1, 4}) {
        for (bool repeated : {true, false}) {
          const auto [params, batch] = random_check_problem(3, 5, K, L, 3, repeated, seed * 100 + K + L);
          const double err = gradient_check(params, batch, 1e-5);
          EXPECT_LT(err, 1e-4) << "seed " << seed << " K " << K << " L " << L << " repeated " << repeated;
        }
      }
    }
  }
}

// Relative error is meaningless for entries near 1e-9, so across many more
// random problems compare absolute differences instead.
TEST(GradientCheck, AbsoluteAgreementAcrossManyProblems) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    const Index K = seed % 2 ? 10 : 11;
    const Index L = seed % 3 ? 4 : 1;
    const auto [params, batch] = random_check_problem(2 + seed % 2, 3 + seed % 3, K, L, 1 + seed % 3, seed % 4 != 0, seed);
    const auto analytic = batch_gradient(params, batch);
    auto probe = params;
    auto values = probe.values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + 1e-5;
      const double up = batch_loss(probe, batch);
      values[k] = saved - 1e-5;
      const double down = batch_loss(probe, batch);
      values[k] = saved;
      worst = std::max(worst, std::abs((up - down) / 2e-5 - analytic.values()[k]));
    }
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(GradientCheck, DegenerateStep) {
  const auto [params, batch] = random_check_problem(2, 3, 10, 1, 1, true, 3);
  try {
    gradient_check(params, batch, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_step);
  }
  EXPECT_THROW(gradient_check(params, batch, -1e-5), Error);
}

TEST(GradientCheck, Deterministic) {
  const auto a = random_check_problem(3, 4, 11, 2, 2, false, 42);
  const auto b = random_check_problem(3, 4, 11, 2, 2, false, 42);
  EXPECT_EQ(gradient_check(a.first, a.second, 1e-5), gradient_check(b.first, b.second, 1e-5));
}

TEST(GradientCheck, UntrainedElevenClassLossNearLogEleven) {
  auto params = init_params<double>(20, 30, 11, 8);
  SequenceBatch<double> batch;
  batch.inputs.push_back(Matrix<double>::Random(30, 64).cwiseAbs());
  for (int j = 0; j < 64; ++j) batch.labels.push_back(static_cast<std::uint8_t>(j % 11));
  EXPECT_NEAR(batch_loss(params, batch), std::log(11.0), 0.05);
}

}  // namespace
}  // namespace srlstm
