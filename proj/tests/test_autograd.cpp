#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hdnet/error.hpp"
#include "hdnet/gradcheck.hpp"
#include "hdnet/ops.hpp"
#include "hdnet/oracles.hpp"

using namespace hdnet;

namespace {

double max_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double d = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

}  // namespace

TEST(Conv2d, OnesKernelOverOnesSumsToNine) {
  const Tensor x = Tensor::ones({1, 1, 3, 3});
  const Tensor w = Tensor::ones({1, 1, 3, 3});
  const Tensor y = conv2d(x, w, Tensor::zeros({1}), 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.item(), 9.0);
}

TEST(Conv2d, UnitKernelIsIdentity) {
  std::mt19937_64 rng(3);
  const Tensor x = oracle::random_tensor({2, 1, 5, 4}, rng);
  const Tensor y = conv2d(x, Tensor::ones({1, 1, 1, 1}), Tensor::zeros({1}));
  EXPECT_EQ(y.values(), x.values());
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor x = oracle::random_tensor({2, 3, 8, 8}, rng);
    const Tensor w = oracle::random_tensor({4, 3, 3, 3}, rng);
    const Tensor b = oracle::random_tensor({4}, rng);
    EXPECT_LE(max_diff(conv2d(x, w, b, 1, 1), oracle::conv2d(x, w, &b, 1, 1)), 1e-12);
    EXPECT_LE(max_diff(conv2d(x, w, std::nullopt, 2, 1), oracle::conv2d(x, w, nullptr, 2, 1)), 1e-12);
  }
}

TEST(Conv2d, RandomDimsUpToEightMatchOracle) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> d(1, 8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t cin = d(rng), cout = d(rng), h = d(rng) + 2, w = d(rng) + 2;
    const std::size_t k = std::min<std::size_t>({3, h, w});
    const Tensor x = oracle::random_tensor({1, cin, h, w}, rng);
    const Tensor wt = oracle::random_tensor({cout, cin, k, k}, rng);
    const Tensor b = oracle::random_tensor({cout}, rng);
    EXPECT_LE(max_diff(conv2d(x, wt, b, 1, 0), oracle::conv2d(x, wt, &b, 1, 0)), 1e-12);
  }
}

TEST(Conv2d, ShapeMismatchNamesAxis) {
  const Tensor x = Tensor::zeros({1, 2, 4, 4});
  const Tensor w = Tensor::zeros({3, 5, 3, 3});
  try {
    conv2d(x, w, std::nullopt);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("axis 1"), std::string::npos);
  }
  EXPECT_THROW(conv2d(x, Tensor::zeros({3, 2, 3, 3}), Tensor::zeros({4})), DimensionError);
  EXPECT_THROW(conv2d(Tensor::zeros({2, 4, 4}), w, std::nullopt), DimensionError);
}

TEST(Elu, ScalarCases) {
  const Tensor y = elu(Tensor({3}, std::vector<double>{0.0, 2.0, -1.0}));
  EXPECT_EQ(y.data()[0], 0.0);
  EXPECT_EQ(y.data()[1], 2.0);
  EXPECT_NEAR(y.data()[2], std::exp(-1.0) - 1.0, 1e-15);
  EXPECT_NEAR(y.data()[2], -0.63212, 1e-5);
}

TEST(Resample, Examples) {
  EXPECT_EQ(resample(Tensor::ones({1, 1, 2, 2}), Resample::Down2).values(), std::vector<double>{1.0});
  EXPECT_EQ(resample(Tensor({1, 1, 1, 1}, 5.0), Resample::Up2).values(), std::vector<double>(4, 5.0));
  const Tensor x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(resample(x, Resample::Down2).item(), 2.5);
}

TEST(Resample, OddSizeDown2Throws) {
  EXPECT_THROW(resample(Tensor::zeros({1, 1, 3, 4}), Resample::Down2), DimensionError);
  EXPECT_NO_THROW(resample(Tensor::zeros({1, 1, 3, 4}), Resample::Up2));
}

TEST(Concat, OrderingAndRoundTrip) {
  const Tensor a({1, 1, 2, 2}, 1.0), b({1, 1, 2, 2}, 2.0);
  const Tensor c = concat_channels(a, b);
  ASSERT_EQ(c.shape(), (Shape{1, 2, 2, 2}));
  EXPECT_EQ(c.values(), (std::vector<double>{1, 1, 1, 1, 2, 2, 2, 2}));

  std::mt19937_64 rng(1);
  const Tensor x = oracle::random_tensor({2, 3, 4, 5}, rng);
  const Tensor back = slice_channels(concat_channels(x, Tensor::zeros({2, 2, 4, 5})), 0, 3);
  EXPECT_EQ(back.values(), x.values());
}

TEST(Concat, MismatchThrows) {
  EXPECT_THROW(concat_channels(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 2, 3})), DimensionError);
  EXPECT_THROW(concat_channels(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({2, 1, 2, 2})), DimensionError);
  EXPECT_THROW(concat_channels(Tensor::zeros({1, 0, 2, 2}), Tensor::zeros({1, 1, 2, 2})), DimensionError);
}

TEST(Concat, GradientOfSumIsOnes) {
  Tensor a({1, 2, 3, 3}, 0.5);
  a.set_requires_grad(true);
  const Tensor b({1, 1, 3, 3}, -2.0);
  backward(sum(concat_channels(a, b)));
  EXPECT_EQ(a.grad(), std::vector<double>(a.numel(), 1.0));
  const GradCheckResult r = grad_check([&](const Tensor& v) { return sum(concat_channels(v, b)); }, a, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-10);
}

TEST(Softmax, Examples) {
  EXPECT_EQ(softmax(Tensor({1}, 3.7)).item(), 1.0);
  const Tensor u = softmax(Tensor({3}, 0.0));
  for (double v : u.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const Tensor p = softmax(Tensor({2}, std::vector<double>{0.9, 0.5}));
  EXPECT_NEAR(p.data()[0], 0.59869, 1e-5);
  EXPECT_NEAR(p.data()[1], 0.40131, 1e-5);
  EXPECT_THROW(softmax(Tensor(Shape{0})), DimensionError);
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 1 + t % 9;
    const Tensor x = oracle::random_tensor({k}, rng, -20.0, 20.0);
    const double shift = std::uniform_real_distribution<double>(-50.0, 50.0)(rng);
    const Tensor p = softmax(x);
    double total = 0.0;
    for (double v : p.data()) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
    Tensor shifted = x.clone();
    for (double& v : shifted.data()) v += shift;
    EXPECT_LE(max_diff(softmax(shifted), p), 1e-12);
  }
}

TEST(Backward, LinearAndQuadratic) {
  std::mt19937_64 rng(2);
  Tensor x = oracle::random_tensor({2, 3, 4}, rng);
  x.set_requires_grad(true);
  backward(sum(x));
  EXPECT_EQ(x.grad(), std::vector<double>(x.numel(), 1.0));

  Tensor y = oracle::random_tensor({2, 5}, rng);
  y.set_requires_grad(true);
  backward(sum(mul(y, y)));
  for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_DOUBLE_EQ(y.grad()[i], 2.0 * y.data()[i]);
}

TEST(Backward, LeafGradientsAccumulateUntilZeroed) {
  Tensor x({3}, 1.0);
  x.set_requires_grad(true);
  backward(sum(x));
  backward(sum(scale(x, 2.0)));
  EXPECT_EQ(x.grad(), std::vector<double>(3, 3.0));
  x.zero_grad();
  EXPECT_EQ(x.grad(), std::vector<double>(3, 0.0));
}

TEST(Backward, NonScalarRootThrows) {
  Tensor x({2, 2}, 1.0);
  x.set_requires_grad(true);
  EXPECT_THROW(backward(scale(x, 2.0)), ContractError);
}

TEST(Backward, SharedSubexpressionGetsBothPaths) {
  Tensor x({1}, 3.0);
  x.set_requires_grad(true);
  const Tensor y = mul(x, x);
  backward(sum(add(y, mul(y, x))));  // x^2 + x^3
  EXPECT_DOUBLE_EQ(x.grad()[0], 2 * 3.0 + 3 * 9.0);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  Tensor x({2}, 1.0);
  x.set_requires_grad(true);
  NoGradGuard guard;
  const Tensor y = scale(x, 2.0);
  EXPECT_TRUE(y.is_leaf());
  EXPECT_FALSE(y.requires_grad());
}

TEST(Backward, DeterministicGradients) {
  auto run = [] {
    std::mt19937_64 rng(11);
    Tensor x = oracle::random_tensor({1, 3, 6, 6}, rng);
    const Tensor w = oracle::random_tensor({4, 3, 3, 3}, rng);
    x.set_requires_grad(true);
    backward(sum(elu(conv2d(x, w, std::nullopt, 1, 1))));
    return x.grad();
  };
  EXPECT_EQ(run(), run());
}

TEST(GradCheck, LinearFunctionIsExact) {
  std::mt19937_64 rng(4);
  const Tensor x = oracle::random_tensor({3, 4}, rng);
  EXPECT_LT(grad_check([](const Tensor& v) { return sum(v); }, x, 1e-5).max_relative_error, 1e-10);
}

TEST(GradCheck, EluAwayFromKink) {
  std::mt19937_64 rng(6);
  Tensor x = oracle::random_tensor({1, 2, 4, 4}, rng, -2.0, 2.0);
  for (double& v : x.data())
    if (std::abs(v) < 2e-3) v = 0.5;
  const GradCheckResult r = grad_check([](const Tensor& v) { return sum(elu(v)); }, x, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-6);
  EXPECT_EQ(r.skipped, 0u);
}

TEST(GradCheck, SkipsCoordinatesNextToKink) {
  Tensor x({4}, std::vector<double>{0.5, 2e-4, -3e-4, -1.0});
  const GradCheckResult r = grad_check([](const Tensor& v) { return sum(elu(v, 0.5)); }, x, 1e-5);
  EXPECT_EQ(r.skipped, 2u);
  EXPECT_EQ(r.checked, 2u);
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(GradCheck, ConvThenSum) {
  std::mt19937_64 rng(8);
  const Tensor x = oracle::random_tensor({1, 2, 5, 5}, rng);
  const Tensor w = oracle::random_tensor({3, 2, 3, 3}, rng);
  const GradCheckResult r =
      grad_check([&](const Tensor& v) { return sum(conv2d(v, w, std::nullopt, 1, 1)); }, x, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(GradCheck, RejectsNonScalarAndBadStep) {
  const Tensor x({2}, 1.0);
  EXPECT_THROW(grad_check([](const Tensor& v) { return scale(v, 2.0); }, x, 1e-5), ContractError);
  EXPECT_THROW(grad_check([](const Tensor& v) { return sum(v); }, x, 0.1), ContractError);
}

TEST(GradCheck, RestoresInput) {
  std::mt19937_64 rng(9);
  const Tensor x = oracle::random_tensor({5}, rng);
  const std::vector<double> before = x.values();
  grad_check([](const Tensor& v) { return sum(mul(v, v)); }, x, 1e-5);
  EXPECT_EQ(x.values(), before);
  EXPECT_FALSE(x.has_grad());
}

// Each differentiable operator at sizes up to 8, ten seeds.
class OperatorGradients : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(OperatorGradients, WithinTolerance) {
  std::mt19937_64 rng(GetParam());
  auto projected = [&](auto op, const Shape& out) {
    const Tensor r = oracle::random_tensor(out, rng);
    return std::function<Tensor(const Tensor&)>([op, r](const Tensor& v) { return sum(mul(op(v), r)); });
  };
  const Tensor x = oracle::random_tensor({1, 2, 6, 6}, rng);
  const Tensor w = oracle::random_tensor({3, 2, 3, 3}, rng);
  const Tensor b = oracle::random_tensor({3}, rng);
  EXPECT_LT(grad_check(projected([&](const Tensor& v) { return conv2d(v, w, b, 1, 1); }, {1, 3, 6, 6}), x, 1e-5).max_relative_error, 1e-4);
  EXPECT_LT(grad_check(projected([&](const Tensor& v) { return conv2d(x, v, b, 1, 1); }, {1, 3, 6, 6}), w, 1e-5).max_relative_error, 1e-4);
  EXPECT_LT(grad_check(projected([&](const Tensor& v) { return conv2d(x, w, v, 1, 1); }, {1, 3, 6, 6}), b, 1e-5).max_relative_error, 1e-4);
  EXPECT_LT(grad_check(projected([](const Tensor& v) { return elu(v); }, {1, 2, 6, 6}), x, 1e-5).max_relative_error, 1e-4);
  EXPECT_LT(grad_check(projected([](const Tensor& v) { return resample(v, Resample::Down2); }, {1, 2, 3, 3}), x, 1e-5).max_relative_error, 1e-4);
  EXPECT_LT(grad_check(projected([](const Tensor& v) { return resample(v, Resample::Up2); }, {1, 2, 12, 12}), x, 1e-5).max_relative_error, 1e-4);
  const Tensor s = oracle::random_tensor({7}, rng, -3.0, 3.0);
  EXPECT_LT(grad_check(projected([](const Tensor& v) { return softmax(v); }, {7}), s, 1e-5).max_relative_error, 1e-4);
  const Tensor a = oracle::random_tensor({2, 5}, rng), c = oracle::random_tensor({2, 4}, rng);
  EXPECT_LT(grad_check(projected([&](const Tensor& v) { return cosine_similarity(v, c); }, {5, 4}), a, 1e-5).max_relative_error, 1e-4);
  EXPECT_LT(grad_check(projected([&](const Tensor& v) { return cosine_similarity(a, v); }, {5, 4}), c, 1e-5).max_relative_error, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Seeds, OperatorGradients, ::testing::Range<std::uint64_t>(0, 10));

TEST(PositionOps, GatherScatterRoundTrip) {
  std::mt19937_64 rng(12);
  const Tensor f = oracle::random_tensor({1, 3, 4, 4}, rng);
  const std::vector<std::size_t> pos{0, 5, 15};
  const Tensor cols = gather_positions(f, pos);
  ASSERT_EQ(cols.shape(), (Shape{3, 3}));
  EXPECT_EQ(cols.data()[1 * 3 + 1], f.at(0, 1, 1, 1));
  EXPECT_EQ(scatter_positions(f, cols, pos).values(), f.values());
}

TEST(PositionOps, WeightedGatherArithmetic) {
  const Tensor columns({2, 2}, std::vector<double>{1, 0, 0, 1});
  const Tensor weights({1, 2}, std::vector<double>{0.6, 0.4});
  const Tensor out = weighted_gather(columns, {0, 1}, weights);
  EXPECT_NEAR(out.data()[0], 0.6, 1e-15);
  EXPECT_NEAR(out.data()[1], 0.4, 1e-15);
}
