#include <sstream>

#include <gtest/gtest.h>

#include "arraysel/nn.hpp"

using namespace arraysel;

namespace {

std::string checkpoint(const NetworkModel& m) {
  std::ostringstream out(std::ios::binary);
  write_model(out, m);
  return out.str();
}

}  // namespace

TEST(ModelIo, RoundTripKeepsEveryParameter) {
  auto m = build_paper_cnn(4, 5, 3, 6, 12);
  m.set_frozen(2, true);
  m.set_trained(true);
  std::istringstream in(checkpoint(m), std::ios::binary);
  const auto back = read_model(in);
  ASSERT_EQ(back.layer_count(), m.layer_count());
  EXPECT_TRUE(back.trained());
  for (std::size_t i = 1; i <= m.layer_count(); ++i) {
    EXPECT_EQ(back.layer(i).spec, m.layer(i).spec) << i;
    EXPECT_EQ(back.layer(i).weights, m.layer(i).weights) << i;
    EXPECT_EQ(back.layer(i).bias, m.layer(i).bias) << i;
    EXPECT_EQ(back.layer(i).frozen, m.layer(i).frozen) << i;
    EXPECT_EQ(layer_digest(back.layer(i)), layer_digest(m.layer(i))) << i;
  }
  EXPECT_EQ(checkpoint(back), checkpoint(m));
}

TEST(ModelIo, RejectsForeignMagic) {
  auto bytes = checkpoint(build_paper_cnn(3, 2, 1, 2));
  bytes[1] ^= 0x20;
  std::istringstream in(bytes, std::ios::binary);
  EXPECT_THROW(read_model(in), FormatError);
}

TEST(ModelIo, RejectsTruncation) {
  auto bytes = checkpoint(build_paper_cnn(3, 2, 1, 2));
  bytes.resize(bytes.size() - 9);
  std::istringstream in(bytes, std::ios::binary);
  EXPECT_THROW(read_model(in), IoError);
}

TEST(ModelIo, MissingFile) { EXPECT_THROW(load_model("/nonexistent/dir/model.sann"), IoError); }
