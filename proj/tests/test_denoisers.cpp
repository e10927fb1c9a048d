#include "npn/denoisers.hpp"
#include "npn/phantoms.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace npn;

namespace {

double l1_dct(const Vec& x, Shape s) { return SeparableDct(s).forward(x).lpNorm<1>(); }

Vec noisy_step(Index n, unsigned seed) {
  Vec x = Vec::Zero(n);
  x.tail(n / 2).setOnes();
  return x + 0.2 * oracle::randn(n, seed);
}

}  // namespace

TEST(Identity, ReturnsInput) {
  const Vec x = oracle::randn(10, 1);
  EXPECT_EQ(denoise(Identity{}, x, Shape::vector(10)), x);
}

TEST(SoftThreshold, SingleCoefficient) {
  const Shape s = Shape::vector(8);
  Vec c = Vec::Zero(8);
  c[3] = 3.0;
  const SeparableDct t(s);
  const Vec out = t.forward(denoise(TransformSoftThreshold{1.0}, t.inverse(c), s));
  EXPECT_NEAR(out[3], 2.0, 1e-12);
  EXPECT_NEAR(out.norm(), 2.0, 1e-12);
}

TEST(SoftThreshold, ProximalInequality) {
  for (Shape s : {Shape::vector(16), Shape::image(6, 5)}) {
    const double tau = 0.3;
    const Vec x = oracle::randn(s.size(), 2);
    const Vec dx = denoise(TransformSoftThreshold{tau}, x, s);
    const double lhs = tau * l1_dct(dx, s) + 0.5 * (dx - x).squaredNorm();
    for (unsigned k = 0; k < 100; ++k) {
      const Vec z = dx + 0.5 * oracle::randn(s.size(), 100 + k);
      EXPECT_LE(lhs, tau * l1_dct(z, s) + 0.5 * (z - x).squaredNorm() + 1e-9);
    }
  }
}

TEST(TV, ReducesTotalVariationOnNoisyStep) {
  const Shape s = Shape::vector(64);
  const Vec x = noisy_step(64, 3);
  const Vec y = denoise(TVChambolle{0.3, 50}, x, s);
  EXPECT_LE(total_variation(y, s), total_variation(x, s));
  EXPECT_LT(total_variation(y, s), 0.5 * total_variation(x, s));
}

TEST(TV, ImageObjectiveBeatsPerturbations) {
  const Shape s = Shape::image(10, 10);
  const Vec f = piecewise_signal(s, 3, 1).values + 0.1 * oracle::randn(100, 4);
  const double lambda = 0.2;
  const Vec u = denoise(TVChambolle{lambda, 2000}, f, s);
  auto objective = [&](const Vec& v) { return 0.5 * (v - f).squaredNorm() + lambda * total_variation(v, s); };
  EXPECT_LE(objective(u), objective(f));
  for (unsigned k = 0; k < 50; ++k) EXPECT_LE(objective(u), objective(u + 0.01 * oracle::randn(100, 50 + k)) + 1e-4);
}

TEST(TV, ZeroLambdaAndTolerance) {
  const Vec x = oracle::randn(20, 1);
  EXPECT_EQ(denoise(TVChambolle{0.0, 20}, x, Shape::vector(20)), x);
  const Vec a = denoise(TVChambolle{0.2, 500, 1e-6}, x, Shape::vector(20));
  const Vec b = denoise(TVChambolle{0.2, 5000}, x, Shape::vector(20));
  EXPECT_LT((a - b).norm(), 1e-3);
}

TEST(Median, RemovesImpulse) {
  Vec x = Vec::Zero(9);
  x[4] = 10.0;
  EXPECT_EQ(denoise(Median{3}, x, Shape::vector(9)).norm(), 0.0);
  Vec img = Vec::Ones(25);
  img[12] = -5.0;
  EXPECT_EQ(denoise(Median{3}, img, Shape::image(5, 5)), Vec::Ones(25));
  EXPECT_THROW(denoise(Median{2}, x, Shape::vector(9)), InvalidParameter);
}

TEST(GaussianSmooth, PreservesConstantsAndShape) {
  const Vec c = Vec::Constant(30, 0.7);
  EXPECT_LT((denoise(GaussianSmooth{1.5}, c, Shape::image(5, 6)) - c).norm(), 1e-14);
  EXPECT_LT((denoise(GaussianSmooth{20.0}, c, Shape::vector(30)) - c).norm(), 1e-14);
}

TEST(EstimateDelta, IdentityAndSmoothing) {
  const Mat samples = oracle::randn(36, 12, 5);
  const Shape s = Shape::image(6, 6);
  EXPECT_EQ(estimate_delta(Identity{}, samples, s), 0.0);
  EXPECT_LE(estimate_delta(GaussianSmooth{1.0}, samples, s), 1e-12);
  EXPECT_LE(estimate_delta(TransformSoftThreshold{0.2}, samples, s), 1e-12);
}

TEST(EstimateDelta, MedianAdversarialPair) {
  Mat pair(5, 2);
  pair.col(0) << 0, 0, 1, 0, 0;
  pair.col(1) << 0, 1, 1, 0, 0;
  const double d = estimate_delta(Median{3}, pair, Shape::vector(5));
  EXPECT_GE(d, 0.0);
  // Median output difference [0,1,1,0,0] over input difference e_1: ratio 2.
  EXPECT_NEAR(d, 1.0, 1e-15);
}

TEST(EstimateDelta, SkipsCoincidentAndNeedsTwo) {
  Mat same(4, 3);
  same.col(0) = same.col(1) = Vec::Ones(4);
  same.col(2) = Vec::Zero(4);
  EXPECT_EQ(estimate_delta(Identity{}, same, Shape::vector(4)), 0.0);
  EXPECT_THROW(estimate_delta(Identity{}, Mat::Ones(4, 1), Shape::vector(4)), InvalidParameter);
}

TEST(AllDenoisers, FiniteOutputs) {
  const Shape s = Shape::image(7, 7);
  const Vec x = oracle::randn(49, 8);
  for (const Denoiser& d : {Denoiser{Identity{}}, Denoiser{GaussianSmooth{1.0}}, Denoiser{TransformSoftThreshold{0.1}},
                            Denoiser{TVChambolle{0.1, 20}}, Denoiser{Median{3}}}) {
    const Vec y = denoise(d, x, s);
    EXPECT_TRUE(y.allFinite()) << denoiser_name(d);
    EXPECT_EQ(y.size(), 49);
  }
}
