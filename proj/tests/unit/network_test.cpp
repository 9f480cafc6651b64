#include <gtest/gtest.h>

#include "oracles.hpp"
#include "spnet/error.hpp"
#include "spnet/network.hpp"
#include "test_data.hpp"

using spnet::NetworkSpec;
using spnet::Shape;
using spnet::Tape;
using spnet::Tensor;
using testing_support::random_tensor;

namespace {

// Parameter count of a spec, from layer shapes alone.
std::size_t expected_mln_params(const NetworkSpec& s) {
  std::size_t n = 0, in = 1;
  for (std::size_t c : s.encoder_channels) {
    n += oracle::conv_params(in, c, 3) + oracle::conv_params(c, c, 3);
    in = c;
  }
  if (in != s.hourglass_channels) n += oracle::conv_params(in, s.hourglass_channels, 3);
  const std::size_t hg = s.hourglass_channels;
  n += s.hourglass_count * (s.hourglass_depth + 1) * oracle::conv_params(hg, hg, 3);
  in = hg;
  for (std::size_t i = 0; i < s.decoder_channels.size(); ++i) {
    const std::size_t c = s.decoder_channels[i];
    const std::size_t skip = s.encoder_channels[s.encoder_channels.size() - 1 - i];
    n += in * c * 9 + c;  // transposed conv [in, c, 3, 3]
    n += oracle::conv_params(c + skip, c, 3) + oracle::conv_params(c, c, 3);
    in = c;
  }
  return n + oracle::conv_params(in, 1, 1);
}

std::size_t expected_mrn_params(const NetworkSpec& s) {
  std::size_t n = 0, in = 2;
  for (std::size_t c : s.mrn_channels) {
    n += oracle::conv_params(in, c, 3);
    in = c;
  }
  const std::size_t f = std::size_t{1} << s.mrn_channels.size();
  std::size_t width = in * (s.input_height / f) * (s.input_width / f);
  for (std::size_t g : s.mrn_dense) {
    n += oracle::dense_params(width, g);
    width = g;
  }
  return n;
}

}  // namespace

TEST(NetworkSpec, DefaultFlattenSizes) {
  EXPECT_EQ(NetworkSpec{}.mrn_flatten_size(), 163840u);
  EXPECT_EQ(NetworkSpec::desk_scale().mrn_flatten_size(), 10240u);
}

TEST(NetworkSpec, ForInputPicksDeepestHourglass) {
  EXPECT_EQ(NetworkSpec::for_input(256, 320).hourglass_depth, 3u);
  EXPECT_EQ(NetworkSpec::for_input(256, 320), NetworkSpec{});
  EXPECT_EQ(NetworkSpec::for_input(64, 80).hourglass_depth, 1u);
  EXPECT_EQ(NetworkSpec::for_input(64, 64).hourglass_depth, 3u);
  EXPECT_THROW(NetworkSpec::for_input(72, 80), spnet::ConstructionError);
}

TEST(NetworkSpec, InvalidSpecsRejected) {
  NetworkSpec s;
  s.input_height = 250;
  EXPECT_THROW(spnet::build_mln(s, 0), spnet::ConstructionError);
  NetworkSpec d;
  d.mrn_dense = {256, 3};
  EXPECT_THROW(spnet::build_mrn(d, 0), spnet::ConstructionError);
  NetworkSpec e;
  e.decoder_channels = {128, 64};
  EXPECT_THROW(spnet::build_mln(e, 0), spnet::ConstructionError);
}

TEST(Hourglass, ShapePreservingForEveryDepth) {
  for (std::size_t depth = 1; depth <= 3; ++depth) {
    const auto hg = spnet::build_hourglass(8, depth, depth);
    const Tensor x = random_tensor({1, 8, 32, 40}, depth);
    EXPECT_EQ(hg.forward(x).shape(), x.shape()) << "depth " << depth;
  }
}

TEST(Hourglass, DepthSetsParameterCount) {
  // One skip conv per level plus the bottom conv.
  EXPECT_EQ(spnet::build_hourglass(8, 1, 0).parameters().parameter_count(),
            2 * oracle::conv_params(8, 8, 3));
  EXPECT_EQ(spnet::build_hourglass(8, 3, 0).parameters().parameter_count(),
            4 * oracle::conv_params(8, 8, 3));
}

TEST(Hourglass, DepthThreeNeedsEightfoldDivisibility) {
  // 32x40 halves to 16x20, 8x10, 4x5; 36x40 fails on the third halving.
  const auto hg = spnet::build_hourglass(4, 3, 1);
  EXPECT_NO_THROW(hg.forward(Tensor({1, 4, 32, 40})));
  EXPECT_THROW(hg.forward(Tensor({1, 4, 36, 40})), spnet::InvalidShapeError);
}

TEST(Mln, DefaultSpecShapesAndRange) {
  const auto mln = spnet::build_mln(NetworkSpec{}, 1);
  const Tensor img = random_tensor({1, 1, 256, 320}, 2, 0.0, 1.0);
  Tape tape(false);
  const auto v = mln.forward(tape, tape.input(img));
  EXPECT_EQ(tape.value(v.bottleneck_entry).shape(), (Shape{1, 128, 32, 40}));
  const Tensor& mask = tape.value(v.mask);
  EXPECT_EQ(mask.shape(), (Shape{1, 1, 256, 320}));
  for (float p : mask.data()) {
    ASSERT_GT(p, 0.0f);
    ASSERT_LT(p, 1.0f);
  }
}

TEST(Mln, ParameterCountRegression) {
  const auto mln = spnet::build_mln(NetworkSpec{}, 0);
  EXPECT_EQ(mln.parameters().parameter_count(), expected_mln_params(NetworkSpec{}));
  EXPECT_EQ(mln.parameters().parameter_count(), 2832049u);
}

TEST(Mln, ProjectionWhenWidthsDiffer) {
  NetworkSpec s = NetworkSpec::desk_scale();
  s.hourglass_channels = 32;
  const auto mln = spnet::build_mln(s, 0);
  EXPECT_TRUE(mln.parameters().contains("mln.bottleneck.proj.weight"));
  EXPECT_EQ(mln.parameters().parameter_count(), expected_mln_params(s));
  EXPECT_EQ(mln.predict(Tensor({1, 1, 64, 80})).shape(), (Shape{1, 1, 64, 80}));
}

TEST(Mln, ParameterNames) {
  const auto mln = spnet::build_mln(NetworkSpec::desk_scale(), 0);
  const auto& p = mln.parameters();
  for (const char* name :
       {"mln.encoder.block0.conv1.weight", "mln.encoder.block2.conv2.bias",
        "mln.hourglass0.level0.skip.weight", "mln.hourglass2.bottom.bias",
        "mln.decoder.stage0.up.weight", "mln.decoder.stage2.conv2.weight", "mln.head.weight"}) {
    EXPECT_TRUE(p.contains(name)) << name;
  }
  EXPECT_EQ(p.value("mln.decoder.stage0.up.weight").shape(), (Shape{128, 128, 3, 3}));
  EXPECT_EQ(p.value("mln.decoder.stage0.conv1.weight").shape(), (Shape{128, 256, 3, 3}));
  EXPECT_EQ(p.value("mln.head.weight").shape(), (Shape{1, 16, 1, 1}));
}

TEST(Mln, InitIsSeededUniformWithZeroBias) {
  const auto a = spnet::build_mln(NetworkSpec::desk_scale(), 5);
  const auto b = spnet::build_mln(NetworkSpec::desk_scale(), 5);
  const auto c = spnet::build_mln(NetworkSpec::desk_scale(), 6);
  const Tensor& w = a.parameters().value("mln.encoder.block1.conv1.weight");
  EXPECT_EQ(w, b.parameters().value("mln.encoder.block1.conv1.weight"));
  EXPECT_NE(w, c.parameters().value("mln.encoder.block1.conv1.weight"));
  const float limit = std::sqrt(6.0f / (16 * 9));
  for (float v : w.data()) ASSERT_LE(std::abs(v), limit);
  EXPECT_EQ(a.parameters().value("mln.encoder.block1.conv1.bias"), Tensor({64}));
}

TEST(Mrn, DefaultShapesAndCount) {
  const auto mrn = spnet::build_mrn(NetworkSpec{}, 3);
  EXPECT_EQ(mrn.parameters().parameter_count(), expected_mrn_params(NetworkSpec{}));
  EXPECT_EQ(mrn.parameters().parameter_count(), 42044258u);
  Tape tape(false);
  const auto v = mrn.forward(tape, tape.input(Tensor({1, 2, 256, 320})));
  EXPECT_EQ(tape.value(v.flattened).shape(), (Shape{1, 163840}));
  EXPECT_EQ(tape.value(v.coords).shape(), (Shape{1, 2}));
}

TEST(Mrn, DeskScaleFlatten) {
  const auto mrn = spnet::build_mrn(NetworkSpec::desk_scale(), 3);
  Tape tape(false);
  const auto v = mrn.forward(tape, tape.input(Tensor({2, 2, 64, 80})));
  EXPECT_EQ(tape.value(v.flattened).shape(), (Shape{2, 10240}));
  EXPECT_EQ(tape.value(v.coords).shape(), (Shape{2, 2}));
}

TEST(ToPixels, ScalesAndClamps) {
  const auto d = spnet::to_pixels(0.5f, 0.25f, 64, 80);
  EXPECT_EQ(d.x, 40.0f);
  EXPECT_EQ(d.y, 16.0f);
  const auto c = spnet::to_pixels(-0.2f, 1.5f, 64, 80);
  EXPECT_EQ(c.x, 0.0f);
  EXPECT_EQ(c.y, 63.0f);
}

TEST(SpNet, ForwardRangeAndDeterminism) {
  const auto spec = NetworkSpec::desk_scale();
  const auto mln = spnet::build_mln(spec, 1);
  const auto mrn = spnet::build_mrn(spec, 2);
  const Tensor img = random_tensor({1, 1, 64, 80}, 3, 0.0, 1.0);
  const auto a = spnet::forward_spnet(mln, mrn, img);
  const auto b = spnet::SpNet::stack(mln, mrn).detect(img);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_EQ(a.detection.x, b.detection.x);
  EXPECT_EQ(a.detection.y, b.detection.y);
  EXPECT_GE(a.detection.x, 0.0f);
  EXPECT_LT(a.detection.x, 80.0f);
  EXPECT_GE(a.detection.y, 0.0f);
  EXPECT_LT(a.detection.y, 64.0f);
}

TEST(SpNet, StackRejectsMismatchedSizes) {
  const auto mln = spnet::build_mln(NetworkSpec::desk_scale(), 1);
  const auto mrn = spnet::build_mrn(NetworkSpec::for_input(64, 64), 2);
  EXPECT_THROW(spnet::SpNet::stack(mln, mrn), spnet::SpecMismatchError);
}

TEST(Tape, MlnGradientMatchesFiniteDifference) {
  // One weight of the first encoder conv, through the whole network.
  NetworkSpec s = NetworkSpec::for_input(16, 16);
  s.encoder_channels = {2, 3, 4};
  s.decoder_channels = {4, 3, 2};
  s.hourglass_channels = 4;
  s.hourglass_count = 1;
  s.hourglass_depth = 1;
  auto mln = spnet::build_mln(s, 9);
  const Tensor img = random_tensor({1, 1, 16, 16}, 10, 0.0, 1.0);
  const Tensor r = random_tensor({1, 1, 16, 16}, 11);
  auto objective = [&] {
    const Tensor m = mln.predict(img);
    double acc = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) acc += static_cast<double>(r[i]) * m[i];
    return acc;
  };
  mln.parameters().zero_grad();
  Tape tape;
  const auto v = mln.forward_train(tape, tape.input(img));
  tape.backward(v.mask, r);
  auto& entry = mln.parameters().entry(mln.parameters().index_of("mln.encoder.block0.conv1.weight"));
  for (std::size_t i : {0u, 4u, 9u}) {
    const float saved = entry.value[i];
    entry.value[i] = saved + 1e-2f;
    const double up = objective();
    entry.value[i] = saved - 1e-2f;
    const double down = objective();
    entry.value[i] = saved;
    const double numeric = (up - down) / 2e-2;
    EXPECT_NEAR(entry.grad[i], numeric, 1e-2 * std::max(1.0, std::abs(numeric))) << "weight " << i;
  }
}
