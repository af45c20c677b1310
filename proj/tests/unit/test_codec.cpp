#include <gtest/gtest.h>

#include <cmath>

#include "latfuse/codec/codec.hpp"
#include "latfuse/codec/tiny_autoencoder.hpp"
#include "test_util.hpp"

using namespace latfuse;

namespace {

// Lossy but idempotent test codec: snaps values to 16 levels.
class QuantizingCodec final : public Codec {
 public:
  const CodecDescriptor& descriptor() const noexcept override { return desc_; }
  nn::Tensor<float> encode_batch(const nn::Tensor<float>& x) const override {
    nn::Tensor<float> z = x;
    for (float& v : z.data) v = std::round(v * 15.0f) / 15.0f;
    return z;
  }
  nn::Tensor<float> decode_batch(const nn::Tensor<float>& z) const override {
    nn::Tensor<float> x = z;
    for (float& v : x.data) v = std::clamp(v, 0.0f, 1.0f);
    return x;
  }
  nn::Tensor<float> decode_backward(const nn::Tensor<float>&, const nn::Tensor<float>& g) const override { return g; }

 private:
  CodecDescriptor desc_{3, 1, "quantize16"};
};

}  // namespace

TEST(IdentityCodec, EncodeIsReinterpretation) {
  Rng rng(1);
  const ImageBuffer img = testutil::random_image(6, 5, 3, rng);
  const IdentityCodec codec;
  const LatentGrid z = codec.encode(img);
  ASSERT_EQ(z.channels(), 3);
  ASSERT_EQ(z.height(), 6);
  ASSERT_EQ(z.width(), 5);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 5; ++x)
      for (int c = 0; c < 3; ++c) EXPECT_EQ(z.at(c, y, x), img.at(y, x, c));
}

TEST(IdentityCodec, RoundTripIsBitExact) {
  Rng rng(2);
  const IdentityCodec codec;
  const ImageBuffer img = testutil::random_image(64, 64, 3, rng);
  EXPECT_EQ(codec.decode(codec.encode(img)), img);
  const ReconstructionDiagnostic d = roundtrip_diagnostic(codec, img);
  EXPECT_EQ(d.mean_abs_error, 0.0);
  EXPECT_EQ(d.max_abs_error, 0.0);
  EXPECT_TRUE(d.error_map.same_shape(img));
}

TEST(IdentityCodec, ZeroLatentDecodesToBlack) {
  const IdentityCodec codec;
  const ImageBuffer out = codec.decode(LatentGrid(3, 4, 4));
  for (float v : out.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Codec, DecodeClampsAndRejectsWrongChannels) {
  const IdentityCodec codec;
  LatentGrid z(3, 2, 2, 1.7f);
  z.at(0, 0, 0) = -3.0f;
  const ImageBuffer out = codec.decode(z);
  EXPECT_TRUE(out.in_unit_range());
  EXPECT_THROW(codec.decode(LatentGrid(4, 2, 2)), ShapeError);
  EXPECT_THROW(codec.encode(ImageBuffer(4, 4, 1)), ShapeError);
}

TEST(SpaceToDepthCodec, DivisibilityAndExactInverse) {
  const SpaceToDepthCodec codec(2);
  EXPECT_THROW(codec.encode(ImageBuffer(5, 4, 3)), DivisibilityError);
  Rng rng(3);
  const ImageBuffer img = testutil::random_image(8, 6, 3, rng);
  const LatentGrid z = codec.encode(img);
  EXPECT_EQ(z.channels(), 12);
  EXPECT_EQ(z.height(), 4);
  EXPECT_EQ(z.width(), 3);
  EXPECT_EQ(codec.decode(z), img);
}

TEST(Codec, ReencodeStabilityProperty) {
  Rng rng(4);
  const IdentityCodec id;
  const SpaceToDepthCodec s2d(2);
  const QuantizingCodec quant;
  for (const Codec* codec : std::initializer_list<const Codec*>{&id, &s2d, &quant})
    for (int trial = 0; trial < 10; ++trial) {
      const ImageBuffer x = testutil::random_image(8, 8, 3, rng);
      const ImageBuffer once = codec->decode(codec->encode(x));
      EXPECT_LE(roundtrip_diagnostic(*codec, once).mean_abs_error,
                roundtrip_diagnostic(*codec, x).mean_abs_error + 1e-6)
          << codec->descriptor().name;
    }
}

TEST(Codec, EncodeDecodeArePure) {
  Rng rng(5);
  const TinyAutoencoderCodec codec(16, 7);
  const ImageBuffer img = testutil::random_image(16, 16, 3, rng);
  const LatentGrid a = codec.encode(img), b = codec.encode(img);
  EXPECT_EQ(a, b);
  EXPECT_EQ(codec.decode(a), codec.decode(b));
}

TEST(TinyAutoencoderCodec, ExternalProfileShapes) {
  const TinyAutoencoderCodec codec;
  EXPECT_EQ(codec.descriptor().latent_channels, 16);
  EXPECT_EQ(codec.descriptor().spatial_factor, 8);
  const LatentGrid z = codec.encode(ImageBuffer(512, 512, 3, 0.5f));
  EXPECT_EQ(z.channels(), 16);
  EXPECT_EQ(z.height(), 64);
  EXPECT_EQ(z.width(), 64);
  EXPECT_TRUE(z.finite());
  const ImageBuffer out = codec.decode(z);
  EXPECT_EQ(out.height(), 512);
  EXPECT_EQ(out.width(), 512);
  EXPECT_EQ(out.channels(), 3);
  EXPECT_TRUE(out.in_unit_range());
  EXPECT_THROW(codec.encode(ImageBuffer(60, 64, 3)), DivisibilityError);
}

TEST(TinyAutoencoderCodec, WeightsFileRoundTrip) {
  testutil::TempDir dir;
  const TinyAutoencoderCodec a(16, 11);
  nn::save_tensors(dir.path() / "w.lfwt",
                   nn::export_store(a.params(), std::span<const float>(a.params().values())));
  const TinyAutoencoderCodec b = TinyAutoencoderCodec::from_file(dir.path() / "w.lfwt");
  Rng rng(6);
  const ImageBuffer img = testutil::random_image(16, 16, 3, rng);
  EXPECT_EQ(a.encode(img), b.encode(img));
  EXPECT_THROW(TinyAutoencoderCodec::from_file(dir.path() / "missing.lfwt"), IoError);
}

TEST(TinyAutoencoderCodec, DecodeBackwardMatchesFiniteDifference) {
  const TinyAutoencoderCodec codec(4, 3);
  Rng rng(8);
  nn::Tensor<float> z(1, 4, 2, 2);
  for (float& v : z.data) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  const nn::Tensor<float> base = codec.decode_batch(z);
  nn::Tensor<float> w(base.n, base.c, base.h, base.w);
  for (float& v : w.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  const nn::Tensor<float> g = codec.decode_backward(z, w);
  auto objective = [&](const nn::Tensor<float>& zz) {
    const auto out = codec.decode_batch(zz);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += static_cast<double>(out.data[i]) * w.data[i];
    return s;
  };
  // Float forward passes and ReLU kinks make single coordinates noisy, so the
  // check is on scale: each entry within 10% of the largest gradient, plus
  // overall direction.
  std::vector<double> fd(z.size());
  double gmax = 0.0, dot = 0.0, nf = 0.0, ng = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const float h = 1e-3f;
    nn::Tensor<float> zp = z, zm = z;
    zp.data[i] += h;
    zm.data[i] -= h;
    fd[i] = (objective(zp) - objective(zm)) / (2.0 * h);
    gmax = std::max(gmax, std::fabs(static_cast<double>(g.data[i])));
    dot += fd[i] * g.data[i];
    nf += fd[i] * fd[i];
    ng += static_cast<double>(g.data[i]) * g.data[i];
  }
  int good = 0;
  for (std::size_t i = 0; i < z.size(); ++i) good += std::fabs(fd[i] - g.data[i]) <= 0.1 * gmax;
  EXPECT_GE(good, static_cast<int>(z.size()) * 9 / 10);
  EXPECT_GT(dot / std::sqrt(nf * ng), 0.99);
}
