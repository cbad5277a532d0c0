#include "hdnet/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hdnet::oracle {

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor* bias, std::size_t stride,
              std::size_t padding) {
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  const std::size_t ho = (h + 2 * padding - kh) / stride + 1;
  const std::size_t wo = (w + 2 * padding - kw) / stride + 1;
  Tensor out({n, cout, ho, wo}, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          double acc = bias ? bias->data()[co] : 0.0;
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long y = static_cast<long>(oy * stride + i) - static_cast<long>(padding);
                const long x = static_cast<long>(ox * stride + j) - static_cast<long>(padding);
                if (y < 0 || x < 0 || y >= static_cast<long>(h) || x >= static_cast<long>(w)) continue;
                acc += input.at(b, ci, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) *
                       weight.at(co, ci, i, j);
              }
          out.at(b, co, oy, ox) = acc;
        }
  return out;
}

void knn(const Tensor& similarity, std::size_t k, std::vector<std::size_t>& indices,
         std::vector<double>& weights) {
  const std::size_t rows = similarity.dim(0), cols = similarity.dim(1);
  indices.assign(rows * k, 0);
  weights.assign(rows * k, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::pair<double, std::size_t>> row;
    for (std::size_t j = 0; j < cols; ++j) row.emplace_back(similarity.data()[r * cols + j], j);
    std::stable_sort(row.begin(), row.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    double mx = row[0].first, total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(row[j].first - mx);
    for (std::size_t j = 0; j < k; ++j) {
      indices[r * k + j] = row[j].second;
      weights[r * k + j] = std::exp(row[j].first - mx) / total;
    }
  }
}

double foreground_mse(const Tensor& gt, const Tensor& out, const Tensor& mask, double a_min) {
  const std::size_t c = gt.dim(1), h = gt.dim(2), w = gt.dim(3);
  double numerator = 0.0, area = 0.0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double pixel = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double d = gt.at(0, ch, y, x) - out.at(0, ch, y, x);
        pixel += d * d;
      }
      numerator += pixel;
      area += mask.at(0, 0, y, x);
    }
  return numerator / std::max(a_min, area);
}

Tensor affine_fuse(const Tensor& reference, const Tensor& foreground, const Tensor& weight,
                   const Tensor& bias) {
  const std::size_t c = reference.dim(0), n = reference.dim(1);
  Tensor out({c, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> stacked(2 * c);
    for (std::size_t r = 0; r < c; ++r) {
      stacked[r] = reference.data()[r * n + i];
      stacked[c + r] = foreground.data()[r * n + i];
    }
    for (std::size_t r = 0; r < c; ++r) {
      double v = bias.data()[r];
      for (std::size_t j = 0; j < 2 * c; ++j) v += weight.data()[r * 2 * c + j] * stacked[j];
      out.data()[r * n + i] = v > 0.0 ? v : std::exp(v) - 1.0;
    }
  }
  return out;
}

double mse(const Tensor& a, const Tensor& b) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t ch = 0; ch < a.dim(1); ++ch)
    for (std::size_t y = 0; y < a.dim(2); ++y)
      for (std::size_t x = 0; x < a.dim(3); ++x) {
        const double d = 255.0 * a.at(0, ch, y, x) - 255.0 * b.at(0, ch, y, x);
        total += d * d;
        ++count;
      }
  return total / static_cast<double>(count);
}

double fmse(const Tensor& a, const Tensor& b, const Tensor& mask) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y < a.dim(2); ++y)
    for (std::size_t x = 0; x < a.dim(3); ++x) {
      if (mask.at(0, 0, y, x) < 0.5) continue;
      for (std::size_t ch = 0; ch < a.dim(1); ++ch) {
        const double d = 255.0 * a.at(0, ch, y, x) - 255.0 * b.at(0, ch, y, x);
        total += d * d;
        ++count;
      }
    }
  return total / static_cast<double>(count);
}

double psnr(const Tensor& a, const Tensor& b) {
  const double m = mse(a, b);
  if (m < 255.0 * 255.0 * 1e-10) return 100.0;
  return 20.0 * std::log10(255.0) - 10.0 * std::log10(m);
}

double ssim(const Tensor& a, const Tensor& b) {
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  const double c1 = std::pow(0.01 * 255.0, 2), c2 = std::pow(0.03 * 255.0, 2);
  double window[kWin][kWin];
  double total_w = 0.0;
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) {
      const double dy = i - 5, dx = j - 5;
      total_w += (window[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * kSigma * kSigma)));
    }
  for (auto& row : window)
    for (double& v : row) v /= total_w;

  const std::size_t h = a.dim(2), w = a.dim(3);
  double channel_total = 0.0;
  for (std::size_t ch = 0; ch < a.dim(1); ++ch) {
    double map_total = 0.0;
    std::size_t positions = 0;
    for (std::size_t y = 0; y + kWin <= h; ++y)
      for (std::size_t x = 0; x + kWin <= w; ++x) {
        double mu_a = 0, mu_b = 0;
        for (int i = 0; i < kWin; ++i)
          for (int j = 0; j < kWin; ++j) {
            mu_a += window[i][j] * 255.0 * a.at(0, ch, y + i, x + j);
            mu_b += window[i][j] * 255.0 * b.at(0, ch, y + i, x + j);
          }
        double var_a = 0, var_b = 0, cov = 0;
        for (int i = 0; i < kWin; ++i)
          for (int j = 0; j < kWin; ++j) {
            const double da = 255.0 * a.at(0, ch, y + i, x + j) - mu_a;
            const double db = 255.0 * b.at(0, ch, y + i, x + j) - mu_b;
            var_a += window[i][j] * da * da;
            var_b += window[i][j] * db * db;
            cov += window[i][j] * da * db;
          }
        map_total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                     ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        ++positions;
      }
    channel_total += map_total / static_cast<double>(positions);
  }
  return channel_total / static_cast<double>(a.dim(1));
}

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape), 0.0);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace hdnet::oracle
