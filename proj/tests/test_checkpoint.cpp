#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "srlstm/checkpoint.hpp"
#include "test_support.hpp"

namespace srlstm {
namespace {

TEST(Checkpoint, RoundTripIsBitExact) {
  auto p = init_params<float>(20, 784, 11, 3);
  p.values()[0] = -0.0f;
  p.values()[1] = std::numeric_limits<float>::denorm_min();
  p.values()[2] = std::numeric_limits<float>::max();
  const auto bytes = encode_checkpoint(p);
  EXPECT_EQ(bytes.size(), 36u + 4u * static_cast<std::size_t>(p.size()));
  const auto q = decode_checkpoint(bytes);
  ASSERT_TRUE(p.same_shape(q));
  EXPECT_EQ(std::memcmp(p.values().data(), q.values().data(), 4 * p.values().size()), 0);
  EXPECT_TRUE(std::signbit(q.values()[0]));
}

TEST(Checkpoint, HeaderLayout) {
  const auto bytes = encode_checkpoint(LstmParams<float>(2, 3, 10));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "SRLSTMCK");
  EXPECT_EQ(bytes[8], 1);    // version
  EXPECT_EQ(bytes[12], 2);   // H
  EXPECT_EQ(bytes[16], 3);   // D
  EXPECT_EQ(bytes[20], 10);  // K
  EXPECT_EQ(bytes[24], 4);
  EXPECT_EQ(bytes[28], 4 * 2 * 3 + 4 * 2 * 2 + 4 * 2 + 10 * 2 + 10);
}

TEST(Checkpoint, RejectsCorruptInput) {
  auto bytes = encode_checkpoint(init_params<float>(2, 3, 10, 1));
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_checkpoint(truncated), Error);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), Error);
  auto bad_dims = bytes;
  bad_dims[12] = 3;
  EXPECT_THROW(decode_checkpoint(bad_dims), Error);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = testing::temp_dir("checkpoint");
  const auto p = init_params<float>(4, 784, 10, 7);
  save_checkpoint(dir / "m.ckpt", p);
  EXPECT_EQ(load_checkpoint(dir / "m.ckpt"), p);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), Error);
}

}  // namespace
}  // namespace srlstm
