#include <gtest/gtest.h>

#include "spnet/error.hpp"
#include "spnet/grad_check.hpp"

using spnet::GradOp;
using spnet::Precision;

class GradCheckAllOps : public ::testing::TestWithParam<GradOp> {};

TEST_P(GradCheckAllOps, Float32BelowOnePercent) {
  const auto shapes = spnet::default_grad_shapes(GetParam());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = spnet::grad_check_report(GetParam(), shapes, seed);
    EXPECT_LT(r.max_relative_error, 1e-2) << "seed " << seed << " input " << r.worst_input
                                           << " element " << r.worst_element;
    EXPECT_GT(r.elements_checked, 0u);
  }
}

TEST_P(GradCheckAllOps, Float64BelowTenPpm) {
  const auto shapes = spnet::default_grad_shapes(GetParam());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EXPECT_LT(spnet::grad_check(GetParam(), shapes, seed, Precision::Float64), 1e-5)
        << "seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(Ops, GradCheckAllOps, ::testing::ValuesIn(spnet::kAllGradOps),
                         [](const auto& info) { return std::string(spnet::grad_op_name(info.param)); });

TEST(GradCheck, LinearOpIsExactUpToRounding) {
  const auto shapes = spnet::default_grad_shapes(GradOp::Add);
  EXPECT_LT(spnet::grad_check(GradOp::Add, shapes, 1, Precision::Float64), 1e-7);
}

TEST(GradCheck, LargerConv) {
  const std::vector<spnet::Shape> shapes{{2, 3, 5, 7}, {4, 3, 3, 3}, {4}};
  EXPECT_LT(spnet::grad_check(GradOp::Conv2d, shapes, 3), 1e-2);
}

TEST(GradCheck, WrongShapeCountThrows) {
  const std::vector<spnet::Shape> shapes{{1, 2, 4, 4}};
  EXPECT_THROW(spnet::grad_check(GradOp::Conv2d, shapes, 0), spnet::InvalidShapeError);
}
