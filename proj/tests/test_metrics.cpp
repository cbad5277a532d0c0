#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hdnet/error.hpp"
#include "hdnet/metrics.hpp"
#include "hdnet/oracles.hpp"

using namespace hdnet;

namespace {

Mask random_mask(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.3);
  Tensor m({1, 1, h, w}, 0.0);
  for (double& v : m.data()) v = coin(rng) ? 1.0 : 0.0;
  m.data()[0] = 1.0;
  return Mask(m);
}

}  // namespace

TEST(Mse, Examples) {
  std::mt19937_64 rng(1);
  const Tensor a = oracle::random_tensor({1, 3, 6, 6}, rng, 0, 1);
  EXPECT_EQ(mse(a, a), 0.0);
  Tensor b = a.clone();
  for (double& v : b.data()) v += 1.0 / 255.0;
  EXPECT_NEAR(mse(a, b), 1.0, 1e-9);
  EXPECT_THROW(mse(a, Tensor::zeros({1, 3, 6, 5})), DimensionError);
}

TEST(Fmse, Examples) {
  std::mt19937_64 rng(2);
  const Tensor a = oracle::random_tensor({1, 3, 6, 6}, rng, 0, 1);
  const Mask m = random_mask(6, 6, rng);
  Tensor b = a.clone();
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 6; ++x)
      if (!m.is_foreground(y, x)) b.at(0, 0, y, x) = 0.123;
  EXPECT_EQ(fmse(a, b, m), 0.0);
  EXPECT_NEAR(fmse(a, b, Mask::ones(6, 6)), mse(a, b), 1e-9);

  Tensor c = a.clone();
  c.at(0, 2, 0, 0) += 2.0 / 255.0;
  const double area = static_cast<double>(m.foreground_count());
  EXPECT_NEAR(fmse(a, c, m), 4.0 / (3.0 * area), 1e-9);
  EXPECT_THROW(fmse(a, b, Mask::zeros(6, 6)), ContractError);
}

TEST(Psnr, Examples) {
  std::mt19937_64 rng(3);
  const Tensor a = oracle::random_tensor({1, 3, 4, 4}, rng, 0, 1);
  EXPECT_EQ(psnr(a, a), 100.0);
  EXPECT_NEAR(psnr_from_mse(1.0), 48.1308, 1e-3);
  EXPECT_NEAR(psnr_from_mse(255.0 * 255.0), 0.0, 1e-12);
}

TEST(Psnr, MonotoneDecreasingInMse) {
  double last = INFINITY;
  for (double m = 1e-3; m < 1e5; m *= 1.7) {
    const double p = psnr_from_mse(m);
    EXPECT_LT(p, last);
    last = p;
  }
}

TEST(Ssim, IdenticalIsOne) {
  std::mt19937_64 rng(4);
  const Tensor a = oracle::random_tensor({1, 3, 16, 16}, rng, 0, 1);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, ConstantImagesClosedForm) {
  const Tensor a({1, 3, 12, 12}, 0.0), b({1, 3, 12, 12}, 1.0);
  const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
  const double mu_a = 0.0, mu_b = 255.0;
  const double want = (2 * mu_a * mu_b + c1) * (0 + c2) / ((mu_a * mu_a + mu_b * mu_b + c1) * (0 + 0 + c2));
  EXPECT_NEAR(ssim(a, b), want, 1e-12);
}

TEST(Ssim, SmallerThanWindowThrows) {
  EXPECT_THROW(ssim(Tensor::zeros({1, 3, 10, 20}), Tensor::zeros({1, 3, 10, 20})), ContractError);
}

TEST(Metrics, MatchOraclesAndAreSymmetric) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t h = 11 + seed % 7, w = 11 + (seed * 3) % 7;
    const Tensor a = oracle::random_tensor({1, 3, h, w}, rng, 0, 1);
    const Tensor b = oracle::random_tensor({1, 3, h, w}, rng, 0, 1);
    const Mask m = random_mask(h, w, rng);
    EXPECT_NEAR(mse(a, b), oracle::mse(a, b), 1e-9);
    EXPECT_NEAR(fmse(a, b, m), oracle::fmse(a, b, m.values()), 1e-9);
    EXPECT_NEAR(psnr(a, b), oracle::psnr(a, b), 1e-9);
    EXPECT_NEAR(ssim(a, b), oracle::ssim(a, b), 1e-9);
    EXPECT_NEAR(mse(a, b), mse(b, a), 1e-9);
    EXPECT_NEAR(fmse(a, b, m), fmse(b, a, m), 1e-9);
    EXPECT_NEAR(psnr(a, b), psnr(b, a), 1e-9);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-9);
  }
}

TEST(Report, AverageAndFormat) {
  const MetricsReport r1{10.0, 20.0, 30.0, 0.5, 1}, r2{20.0, 40.0, 40.0, 0.7, 1};
  const MetricsReport avg = average({r1, r2});
  EXPECT_DOUBLE_EQ(avg.mse, 15.0);
  EXPECT_DOUBLE_EQ(avg.fmse, 30.0);
  EXPECT_DOUBLE_EQ(avg.psnr, 35.0);
  EXPECT_DOUBLE_EQ(avg.ssim, 0.6);
  EXPECT_EQ(avg.n_images, 2u);
  const MetricsReport odd{1.0 / 3.0, 172.47123, 40.4612345, 0.98, 3};
  EXPECT_EQ(format_report(odd, "x."), "x.mse=0.333333\nx.fmse=172.471\nx.psnr=40.4612\nx.ssim=0.98\nx.n_images=3\n");
}
