#include <gtest/gtest.h>

#include <filesystem>

#include "latfuse/core/image.hpp"
#include "latfuse/core/image_io.hpp"
#include "latfuse/core/random.hpp"
#include "test_util.hpp"

using namespace latfuse;

TEST(ImageBuffer, RejectsBadShape) {
  EXPECT_THROW(ImageBuffer(0, 4, 3), ShapeError);
  EXPECT_THROW(ImageBuffer(4, 4, 3, std::vector<float>(10)), ShapeError);
}

TEST(ImageBuffer, CropAndReflectPad) {
  ImageBuffer img(3, 4, 1);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) img.at(y, x) = static_cast<float>(y * 4 + x);
  const ImageBuffer c = img.crop(1, 1, 2, 2);
  EXPECT_EQ(c.at(0, 0), 5.0f);
  EXPECT_EQ(c.at(1, 1), 10.0f);
  const ImageBuffer p = img.pad_reflect(5, 6);
  // reflect without repeating the edge: row 3 mirrors row 1, column 4 mirrors column 2
  EXPECT_EQ(p.at(3, 0), img.at(1, 0));
  EXPECT_EQ(p.at(0, 4), img.at(0, 2));
  EXPECT_EQ(p.at(4, 5), img.at(0, 1));
  EXPECT_EQ(p.crop(0, 0, 3, 4), img);
}

TEST(FocusStack, Validation) {
  const ImageBuffer a(4, 4, 3, 0.1f), b(4, 4, 3, 0.2f), c(5, 4, 3, 0.0f);
  EXPECT_THROW(FocusStack({}, {}), ValueError);
  EXPECT_THROW(FocusStack({a, c}, {1.0, 2.0}), ShapeError);
  EXPECT_THROW(FocusStack({a, b}, {1.0}), ValueError);
  EXPECT_THROW(FocusStack({a, b}, {1.0, 0.0}), ValueError);
  EXPECT_THROW(FocusStack(std::vector<ImageBuffer>(8, a), std::vector<double>(8, 1.0)), ValueError);
  const FocusStack s({b, a}, {3.0, 1.0});
  EXPECT_EQ(s[0], b);  // caller order is kept
  EXPECT_EQ(s.focus_distances()[0], 3.0);
}

TEST(BlendWithMask, SaturatedAndHalfMask) {
  const ImageBuffer a(4, 4, 3, 0.2f), b(4, 4, 3, 0.6f);
  EXPECT_EQ(blend_with_mask(a, b, DecisionMask(ImageBuffer(4, 4, 1, 1.0f))), a);
  const ImageBuffer half = blend_with_mask(a, b, DecisionMask(ImageBuffer(4, 4, 1, 0.5f)));
  for (float v : half.values()) EXPECT_NEAR(v, 0.4f, 1e-7);
}

TEST(BlendWithMask, MatchesPerPixelLoop) {
  Rng rng(3);
  const ImageBuffer a = testutil::random_image(8, 8, 3, rng), b = testutil::random_image(8, 8, 3, rng);
  const ImageBuffer m = testutil::random_image(8, 8, 1, rng);
  const ImageBuffer out = blend_with_mask(a, b, DecisionMask(m));
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) {
        const double w = m.at(y, x);
        EXPECT_NEAR(out.at(y, x, c), a.at(y, x, c) * w + b.at(y, x, c) * (1.0 - w), 1e-6);
      }
}

TEST(BlendWithMask, IdempotentAndBounded) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const ImageBuffer a = testutil::random_image(6, 5, 3, rng), b = testutil::random_image(6, 5, 3, rng);
    const DecisionMask m(testutil::random_image(6, 5, 1, rng));
    const ImageBuffer same = blend_with_mask(a, a, m);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(same.values()[i], a.values()[i], 1e-7);
    const ImageBuffer out = blend_with_mask(a, b, m);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_GE(out.values()[i], std::min(a.values()[i], b.values()[i]) - 1e-7f);
      EXPECT_LE(out.values()[i], std::max(a.values()[i], b.values()[i]) + 1e-7f);
    }
  }
}

TEST(BlendWithMask, RejectsMismatch) {
  const ImageBuffer a(4, 4, 3), b(4, 5, 3);
  EXPECT_THROW(blend_with_mask(a, b, DecisionMask(ImageBuffer(4, 4, 1))), ShapeError);
  EXPECT_THROW(blend_with_mask(a, a, DecisionMask(ImageBuffer(3, 4, 1))), ShapeError);
  EXPECT_THROW(DecisionMask(ImageBuffer(2, 2, 1, 1.5f)), ValueError);
}

TEST(ImageIo, PngQuantizesByRounding) {
  testutil::TempDir dir;
  ImageBuffer img(2, 2, 3, 0.0f);
  img.at(0, 0, 0) = 0.5f;    // 127.5 → 128
  img.at(0, 1, 1) = 0.499f;  // 127.245 → 127
  img.at(1, 0, 2) = 1.0f;
  io::write_png(dir.path() / "a.png", img);
  const ImageBuffer back = io::read_png(dir.path() / "a.png");
  EXPECT_FLOAT_EQ(back.at(0, 0, 0), 128.0f / 255.0f);
  EXPECT_FLOAT_EQ(back.at(0, 1, 1), 127.0f / 255.0f);
  EXPECT_FLOAT_EQ(back.at(1, 0, 2), 1.0f);
  EXPECT_EQ(io::to_byte(1.7f), 255);
  EXPECT_EQ(io::to_byte(-0.2f), 0);
}

TEST(ImageIo, FloatContainerIsExact) {
  testutil::TempDir dir;
  Rng rng(5);
  const ImageBuffer img = testutil::random_image(7, 9, 3, rng);
  io::write_float_image(dir.path() / "x.lfimg", img);
  EXPECT_EQ(io::read_float_image(dir.path() / "x.lfimg"), img);
  EXPECT_THROW(io::read_float_image(dir.path() / "missing.lfimg"), IoError);
}

TEST(Random, DeterministicAndDerived) {
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.uniform(), b.uniform());
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  Rng c(11);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform(2.0, 3.0);
    EXPECT_GE(u, 2.0);
    EXPECT_LE(u, 3.0);
    EXPECT_LT(c.below(7), 7u);
  }
  Rng d(12);
  const std::string s = d.state();
  const double first = d.uniform();
  d.set_state(s);
  EXPECT_EQ(d.uniform(), first);
}
