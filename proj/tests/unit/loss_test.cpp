#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "spnet/error.hpp"
#include "spnet/ops.hpp"
#include "test_data.hpp"

using spnet::Tensor;
namespace ops = spnet::ops;

TEST(BceLoss, HalfMapIsLn2ForAnyTarget) {
  Tensor gt({8, 8});
  for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = (i * 7) % 3 == 0 ? 1.0f : 0.0f;
  EXPECT_NEAR(ops::bce_loss(Tensor({8, 8}, 0.5f), gt).value, std::log(2.0), 1e-6);
  EXPECT_NEAR(ops::bce_loss(Tensor({8, 8}, 0.5f), Tensor({8, 8})).value, std::log(2.0), 1e-6);
}

TEST(BceLoss, WorkedTwoByTwo) {
  const Tensor gt({2, 2}, std::vector<float>{1, 0, 0, 1});
  const Tensor pred({2, 2}, std::vector<float>{0.9f, 0.1f, 0.2f, 0.8f});
  const double expect = oracle::bce({0.9, 0.1, 0.2, 0.8}, {1, 0, 0, 1});
  EXPECT_NEAR(expect, 0.16425, 1e-5);
  EXPECT_NEAR(ops::bce_loss(pred, gt).value, expect, 1e-6);
}

TEST(BceLoss, PerfectPredictionIsEffectivelyZero) {
  // float(1 - 1e-7) is 1 - 2^-23, so the clamped loss is about 1.19e-7.
  const Tensor gt({2, 3}, std::vector<float>{1, 0, 1, 0, 0, 1});
  const auto l = ops::bce_loss(gt, gt);
  EXPECT_GE(l.value, 0.0f);
  EXPECT_LE(l.value, 2e-7f);
}

TEST(BceLoss, MatchesPerPixelOracleOnRandomMaps) {
  const Tensor pred = testing_support::random_tensor({16, 20}, 3, 0.01, 0.99);
  Tensor gt({16, 20});
  std::vector<double> p, g;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    gt[i] = i % 5 == 0 ? 1.0f : 0.0f;
    p.push_back(pred[i]);
    g.push_back(gt[i]);
  }
  EXPECT_NEAR(ops::bce_loss(pred, gt).value, oracle::bce(p, g), 1e-6);
}

TEST(BceLoss, LogitGradientMatchesChainRule) {
  const Tensor z = testing_support::random_tensor({4, 4}, 4, -3, 3);
  Tensor gt({4, 4});
  for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = i % 2 ? 1.0f : 0.0f;
  const Tensor p = ops::sigmoid(z);
  const Tensor chain = ops::sigmoid_backward(p, ops::bce_loss(p, gt).grad);
  const Tensor fused = ops::bce_logit_grad(p, gt);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(fused[i], chain[i], 1e-6);
}

TEST(BceLoss, ShapeMismatchThrows) {
  EXPECT_THROW(ops::bce_loss(Tensor({2, 2}), Tensor({2, 3})), spnet::InvalidShapeError);
}

TEST(MseLoss, ThreeFourFive) {
  const auto l = ops::mse_loss(Tensor({1, 2}, std::vector<float>{3, 4}), Tensor({1, 2}));
  EXPECT_EQ(l.value, 25.0f);
  EXPECT_EQ(l.grad[0], 6.0f);
  EXPECT_EQ(l.grad[1], 8.0f);
}

TEST(MseLoss, AveragesOverSamples) {
  const Tensor pred({2, 2}, std::vector<float>{3, 4, 6, 8});
  EXPECT_EQ(ops::mse_loss(pred, Tensor({2, 2})).value, 62.5f);
  EXPECT_EQ(ops::mse_loss(pred, pred).value, 0.0f);
}

TEST(MseLoss, ShapeErrors) {
  EXPECT_THROW(ops::mse_loss(Tensor({2, 2}), Tensor({3, 2})), spnet::InvalidShapeError);
  EXPECT_THROW(ops::mse_loss(Tensor({2, 3}), Tensor({2, 3})), spnet::InvalidShapeError);
}
