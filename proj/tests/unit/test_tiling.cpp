#include <gtest/gtest.h>

#include "latfuse/tiling/patch_plan.hpp"
#include "latfuse/tiling/stitch.hpp"
#include "test_util.hpp"

using namespace latfuse;

TEST(PlanPatches, SinglePatch) {
  const PatchPlan plan = plan_patches(64, 64, 64);
  ASSERT_EQ(plan.rects.size(), 1u);
  EXPECT_EQ(plan.rects[0], (PatchRect{0, 0, 64}));
  const ImageBuffer mask = patch_weight_mask(plan.rects[0], plan);
  for (float v : mask.values()) EXPECT_EQ(v, 1.0f);
}

TEST(PlanPatches, ClampedLastStart) {
  EXPECT_EQ(axis_starts(1024, 512), (std::vector<int>{0, 384, 512}));
  const PatchPlan plan = plan_patches(1024, 600, 512);
  EXPECT_EQ(plan.row_starts, (std::vector<int>{0, 384, 512}));
  EXPECT_EQ(plan.col_starts, (std::vector<int>{0, 88}));
}

TEST(PlanPatches, StartsFollowStrideRule) {
  for (int P : {4, 8, 32, 64}) {
    for (int dim = P; dim < 5 * P; dim += 3) {
      const auto s = axis_starts(dim, P);
      ASSERT_EQ(s.front(), 0);
      ASSERT_EQ(s.back(), dim - P);
      for (std::size_t i = 1; i + 1 < s.size(); ++i) ASSERT_EQ(s[i] - s[i - 1], 3 * P / 4);
      for (int v : s) ASSERT_LE(v, dim - P);
    }
  }
}

TEST(PlanPatches, CoverageExhaustive700) {
  const PatchPlan plan = plan_patches(700, 700, 512);
  std::vector<int> hits(700 * 700, 0);
  for (const auto& r : plan.rects)
    for (int y = r.top; y < r.top + r.size; ++y)
      for (int x = r.left; x < r.left + r.size; ++x) ++hits[y * 700 + x];
  for (int h : hits) ASSERT_GE(h, 1);
}

TEST(PlanPatches, Errors) {
  EXPECT_THROW(plan_patches(63, 64, 64), ShapeError);
  EXPECT_THROW(plan_patches(64, 64, 30), ValueError);
  const PatchPlan plan = plan_patches(100, 100, 64);
  EXPECT_THROW(patch_weight_mask(PatchRect{1, 0, 64}, plan), ValueError);
}

TEST(PlanPatches, MonotoneCoverage) {
  // Growing the image never leaves a pixel of the smaller image uncovered.
  for (int H = 64; H < 300; H += 7) {
    const PatchPlan plan = plan_patches(H + 7, 64, 64);
    std::vector<bool> covered(H + 7, false);
    for (int top : plan.row_starts)
      for (int y = top; y < top + 64; ++y) covered[y] = true;
    for (int y = 0; y < H + 7; ++y) ASSERT_TRUE(covered[y]);
  }
}

TEST(PatchWeightMask, TwoPatchRampsSumToOne) {
  // W = 112, P = 64: starts 0 and 48, overlap 16 = P/4.
  const PatchPlan plan = plan_patches(64, 112, 64);
  ASSERT_EQ(plan.col_starts, (std::vector<int>{0, 48}));
  const ImageBuffer left = patch_weight_mask(plan.rects[0], plan);
  const ImageBuffer right = patch_weight_mask(plan.rects[1], plan);
  const int ov = 16;
  for (int t = 0; t < ov; ++t) {
    const double rel = (t + 0.5) / ov;
    EXPECT_NEAR(left.at(10, 48 + t), 1.0 - rel, 1e-7);
    EXPECT_NEAR(right.at(10, t), rel, 1e-7);
    EXPECT_NEAR(left.at(10, 48 + t) + right.at(10, t), 1.0, 1e-7);
  }
  for (int x = 0; x < 48; ++x) EXPECT_EQ(left.at(10, x), 1.0f);
  for (int x = ov; x < 64; ++x) EXPECT_EQ(right.at(10, x), 1.0f);
}

TEST(PatchWeightMask, InteriorCornerIsProductOfRamps) {
  const PatchPlan plan = plan_patches(160, 160, 64);  // starts 0, 48, 96
  ASSERT_EQ(plan.row_starts.size(), 3u);
  const PatchRect mid{48, 48, 64};
  const ImageBuffer m = patch_weight_mask(mid, plan);
  const auto ry = detail::axis_ramp(plan.row_starts, 1, 64);
  const auto rx = detail::axis_ramp(plan.col_starts, 1, 64);
  for (int y : {0, 3, 20, 63})
    for (int x : {0, 5, 40, 63}) EXPECT_FLOAT_EQ(m.at(y, x), ry[y] * rx[x]);
  EXPECT_LT(m.at(0, 0), ry[0]);
  EXPECT_GT(m.at(0, 0), 0.0f);
}

TEST(Stitch, ReproducesSource) {
  Rng rng(1);
  const ImageBuffer src = testutil::random_image(150, 97, 3, rng);
  const PatchPlan plan = plan_patches(150, 97, 32);
  const ImageBuffer out = stitch(crop_patches(src, plan), plan);
  for (std::size_t i = 0; i < src.size(); ++i) ASSERT_NEAR(out.values()[i], src.values()[i], 1e-6);
}

TEST(Stitch, ConstantPatchesGiveConstant) {
  const PatchPlan plan = plan_patches(130, 75, 32);
  const std::vector<ImageBuffer> patches(plan.rects.size(), ImageBuffer(32, 32, 3, 0.37f));
  const ImageBuffer out = stitch(patches, plan);
  for (float v : out.values()) ASSERT_NEAR(v, 0.37f, 1e-6);
}

TEST(Stitch, ZeroOneCrossesLinearly) {
  const PatchPlan plan = plan_patches(64, 112, 64);
  const ImageBuffer out = stitch({ImageBuffer(64, 64, 1, 0.0f), ImageBuffer(64, 64, 1, 1.0f)}, plan);
  for (int x = 0; x < 48; ++x) EXPECT_EQ(out.at(5, x), 0.0f);
  for (int t = 0; t < 16; ++t) EXPECT_NEAR(out.at(5, 48 + t), (t + 0.5) / 16.0, 1e-6);
  for (int x = 64; x < 112; ++x) EXPECT_EQ(out.at(5, x), 1.0f);
}

TEST(Stitch, IsLinear) {
  Rng rng(2);
  const PatchPlan plan = plan_patches(90, 70, 32);
  std::vector<ImageBuffer> X, Y, Z;
  const double a = 0.3, b = -1.7;
  for (std::size_t i = 0; i < plan.rects.size(); ++i) {
    X.push_back(testutil::random_image(32, 32, 3, rng));
    Y.push_back(testutil::random_image(32, 32, 3, rng));
    ImageBuffer z(32, 32, 3);
    for (std::size_t k = 0; k < z.size(); ++k)
      z.values()[k] = static_cast<float>(a * X.back().values()[k] + b * Y.back().values()[k]);
    Z.push_back(z);
  }
  const ImageBuffer sx = stitch(X, plan), sy = stitch(Y, plan), sz = stitch(Z, plan);
  for (std::size_t k = 0; k < sz.size(); ++k)
    ASSERT_NEAR(sz.values()[k], a * sx.values()[k] + b * sy.values()[k], 1e-5);
}

TEST(Stitch, WeightSumPositiveAndMissingPatchRejected) {
  const PatchPlan plan = plan_patches(101, 203, 16);
  BlendAccumulator acc(101, 203, 1);
  for (const auto& r : plan.rects) acc.add(r, ImageBuffer(16, 16, 1, 1.0f), patch_weight_mask(r, plan));
  const ImageBuffer weights = acc.weight_map();
  for (float w : weights.values()) ASSERT_GT(w, 0.0f);
  std::vector<ImageBuffer> short_list(plan.rects.size() - 1, ImageBuffer(16, 16, 1));
  EXPECT_THROW(stitch(short_list, plan), ValueError);
}

TEST(Stitch, MergedAccumulatorsMatchSerial) {
  Rng rng(3);
  const ImageBuffer src = testutil::random_image(80, 80, 3, rng);
  const PatchPlan plan = plan_patches(80, 80, 32);
  BlendAccumulator a(80, 80, 3), b(80, 80, 3);
  for (std::size_t i = 0; i < plan.rects.size(); ++i) {
    const auto& r = plan.rects[i];
    (i % 2 ? a : b).add(r, src.crop(r.top, r.left, 32, 32), patch_weight_mask(r, plan));
  }
  a.merge(b);
  const ImageBuffer out = a.resolve();
  for (std::size_t k = 0; k < src.size(); ++k) ASSERT_NEAR(out.values()[k], src.values()[k], 1e-6);
}
