#include <gtest/gtest.h>

#include <fstream>

#include "spnet/checkpoint.hpp"
#include "spnet/error.hpp"
#include "spnet/network.hpp"
#include "test_data.hpp"

using spnet::ParameterStore;
using spnet::Tensor;
using testing_support::TempDir;

namespace {

ParameterStore sample_store() {
  ParameterStore s;
  s.add("a.weight", testing_support::random_tensor({3, 2, 3, 3}, 1));
  s.add("a.bias", testing_support::random_tensor({3}, 2));
  s.add("b", testing_support::random_tensor({7, 5}, 3));
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes;
}

void expect_same(const ParameterStore& a, const ParameterStore& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.entry(i).name, b.entry(i).name);
    EXPECT_EQ(a.entry(i).value, b.entry(i).value);
  }
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  const ParameterStore s = sample_store();
  spnet::save_checkpoint(s, dir / "c.ckpt");
  expect_same(s, spnet::load_checkpoint(dir / "c.ckpt"));
}

TEST(Checkpoint, HeaderLayout) {
  TempDir dir;
  spnet::save_checkpoint(sample_store(), dir / "c.ckpt");
  const std::string bytes = slurp(dir / "c.ckpt");
  EXPECT_EQ(bytes.substr(0, 4), "SPNC");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);  // version, little-endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3u);  // entry count
  std::uint64_t trailer = 0;
  for (int i = 7; i >= 0; --i) {
    trailer = (trailer << 8) | static_cast<unsigned char>(bytes[bytes.size() - 8 + i]);
  }
  EXPECT_EQ(trailer, bytes.size() - 8);
}

TEST(Checkpoint, NetworkRoundTrip) {
  TempDir dir;
  const auto mln = spnet::build_mln(spnet::NetworkSpec::desk_scale(), 4);
  const auto mrn = spnet::build_mrn(spnet::NetworkSpec::desk_scale(), 5);
  const ParameterStore* both[] = {&mln.parameters(), &mrn.parameters()};
  spnet::save_checkpoint(both, dir / "net.ckpt");
  const ParameterStore loaded = spnet::load_checkpoint(dir / "net.ckpt");
  EXPECT_EQ(loaded.size(), mln.parameters().size() + mrn.parameters().size());
  auto copy = spnet::build_mln(spnet::NetworkSpec::desk_scale(), 99);
  copy.parameters().load_from(loaded);
  expect_same(copy.parameters(), mln.parameters());
}

TEST(Checkpoint, OptimizerStateIsOptional) {
  TempDir dir;
  ParameterStore s = sample_store();
  for (auto& e : s) e.grad = Tensor(e.value.shape(), 0.5f);
  s.adam_step(spnet::AdamHyperParams{});
  s.adam_step(spnet::AdamHyperParams{});
  spnet::save_checkpoint(s, dir / "plain.ckpt");
  spnet::save_checkpoint(s, dir / "opt.ckpt", true);
  const ParameterStore plain = spnet::load_checkpoint(dir / "plain.ckpt");
  const ParameterStore opt = spnet::load_checkpoint(dir / "opt.ckpt");
  expect_same(plain, s);
  expect_same(opt, s);
  EXPECT_TRUE(plain.entry(0).adam.first_moment.empty());
  EXPECT_EQ(opt.entry(0).adam.first_moment, s.entry(0).adam.first_moment);
  EXPECT_EQ(opt.entry(0).adam.second_moment, s.entry(0).adam.second_moment);
  EXPECT_EQ(opt.entry(0).adam.step, 2u);
}

TEST(Checkpoint, WrongMagic) {
  TempDir dir;
  spnet::save_checkpoint(sample_store(), dir / "c.ckpt");
  std::string bytes = slurp(dir / "c.ckpt");
  bytes[0] = 'X';
  spit(dir / "c.ckpt", bytes);
  EXPECT_THROW(spnet::load_checkpoint(dir / "c.ckpt"), spnet::CorruptMagicError);
}

TEST(Checkpoint, VersionMismatch) {
  TempDir dir;
  spnet::save_checkpoint(sample_store(), dir / "c.ckpt");
  std::string bytes = slurp(dir / "c.ckpt");
  bytes[4] = 2;
  spit(dir / "c.ckpt", bytes);
  EXPECT_THROW(spnet::load_checkpoint(dir / "c.ckpt"), spnet::VersionMismatchError);
}

TEST(Checkpoint, TruncatedMidTensor) {
  TempDir dir;
  spnet::save_checkpoint(sample_store(), dir / "c.ckpt");
  const std::string bytes = slurp(dir / "c.ckpt");
  for (std::size_t keep : {std::size_t{2}, std::size_t{10}, std::size_t{40}, bytes.size() / 2,
                           bytes.size() - 9, bytes.size() - 1}) {
    spit(dir / "t.ckpt", bytes.substr(0, keep));
    EXPECT_THROW(spnet::load_checkpoint(dir / "t.ckpt"), spnet::TruncatedFileError) << keep;
  }
}

TEST(Checkpoint, TrailingBytesRejected) {
  TempDir dir;
  spnet::save_checkpoint(sample_store(), dir / "c.ckpt");
  spit(dir / "c.ckpt", slurp(dir / "c.ckpt") + "junk");
  EXPECT_THROW(spnet::load_checkpoint(dir / "c.ckpt"), spnet::TruncatedFileError);
}

TEST(Checkpoint, MissingFileIsIoError) {
  TempDir dir;
  EXPECT_THROW(spnet::load_checkpoint(dir / "absent.ckpt"), spnet::IoError);
}

TEST(ParameterStore, LoadFromRejectsMismatches) {
  ParameterStore a = sample_store();
  ParameterStore b;
  b.add("a.weight", Tensor({3, 2, 3, 3}));
  EXPECT_THROW(a.load_from(b), spnet::SpecMismatchError);
  ParameterStore c;
  c.add("a.weight", Tensor({3, 2, 1, 1}));
  c.add("a.bias", Tensor({3}));
  c.add("b", Tensor({7, 5}));
  EXPECT_THROW(a.load_from(c), spnet::SpecMismatchError);
  EXPECT_THROW(a.add("b", Tensor({1})), spnet::ConstructionError);
}
