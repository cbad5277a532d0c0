#include "hdnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "hdnet/error.hpp"

namespace hdnet {

namespace {

void require_images(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape() || a.rank() != 4 || a.dim(0) != 1) {
    throw DimensionError(std::string(op) + ": images " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " must share a [1,C,H,W] shape");
  }
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> g(size);
  const double centre = static_cast<double>(size - 1) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - centre;
    total += (g[i] = std::exp(-d * d / (2.0 * sigma * sigma)));
  }
  for (double& v : g) v /= total;
  return g;
}

// Valid-mode separable filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& g) {
  const std::size_t k = g.size(), ho = h - k + 1, wo = w - k + 1;
  std::vector<double> rows(h * wo, 0.0), out(ho * wo, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < wo; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += g[i] * plane[y * w + x + i];
      rows[y * wo + x] = acc;
    }
  for (std::size_t y = 0; y < ho; ++y)
    for (std::size_t x = 0; x < wo; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += g[i] * rows[(y + i) * wo + x];
      out[y * wo + x] = acc;
    }
  return out;
}

}  // namespace

double mse(const Tensor& a, const Tensor& b) {
  require_images(a, b, "mse");
  double total = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = 255.0 * (a.data()[i] - b.data()[i]);
    total += d * d;
  }
  return total / static_cast<double>(a.numel());
}

double fmse(const Tensor& a, const Tensor& b, const Mask& mask) {
  require_images(a, b, "fmse");
  if (mask.height() != a.dim(2) || mask.width() != a.dim(3)) {
    throw DimensionError("fmse: mask does not match image axes 2,3");
  }
  if (mask.foreground_count() == 0) throw ContractError("fmse: mask is empty");
  const std::size_t c = a.dim(1), hw = a.dim(2) * a.dim(3);
  double total = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) {
      if (mask.values().data()[i] != 1.0) continue;
      const double d = 255.0 * (a.data()[ch * hw + i] - b.data()[ch * hw + i]);
      total += d * d;
    }
  return total / static_cast<double>(c * mask.foreground_count());
}

double psnr_from_mse(double m) {
  if (m < 255.0 * 255.0 * 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / m));
}

double psnr(const Tensor& a, const Tensor& b) { return psnr_from_mse(mse(a, b)); }

double ssim(const Tensor& a, const Tensor& b, const SsimOptions& o) {
  require_images(a, b, "ssim");
  const std::size_t c = a.dim(1), h = a.dim(2), w = a.dim(3);
  if (h < o.window || w < o.window) {
    throw ContractError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                        " smaller than the " + std::to_string(o.window) + "-pixel window");
  }
  const auto g = gaussian_window(o.window, o.sigma);
  const double c1 = (o.k1 * o.dynamic_range) * (o.k1 * o.dynamic_range);
  const double c2 = (o.k2 * o.dynamic_range) * (o.k2 * o.dynamic_range);
  const std::size_t hw = h * w;
  double channel_sum = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::vector<double> x(hw), y(hw), xx(hw), yy(hw), xy(hw);
    for (std::size_t i = 0; i < hw; ++i) {
      x[i] = 255.0 * a.data()[ch * hw + i];
      y[i] = 255.0 * b.data()[ch * hw + i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, g), my = filter_valid(y, h, w, g);
    const auto sxx = filter_valid(xx, h, w, g), syy = filter_valid(yy, h, w, g),
               sxy = filter_valid(xy, h, w, g);
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    channel_sum += total / static_cast<double>(mx.size());
  }
  return channel_sum / static_cast<double>(c);
}

MetricsReport measure(const Tensor& harmonized, const Tensor& ground_truth, const Mask& mask) {
  MetricsReport r;
  r.mse = mse(harmonized, ground_truth);
  r.fmse = fmse(harmonized, ground_truth, mask);
  r.psnr = psnr_from_mse(r.mse);
  r.ssim = ssim(harmonized, ground_truth);
  r.n_images = 1;
  return r;
}

MetricsReport average(const std::vector<MetricsReport>& reports) {
  MetricsReport out;
  for (const auto& r : reports) {
    out.mse += r.mse;
    out.fmse += r.fmse;
    out.psnr += r.psnr;
    out.ssim += r.ssim;
    out.n_images += r.n_images;
  }
  if (!reports.empty()) {
    const double n = static_cast<double>(reports.size());
    out.mse /= n;
    out.fmse /= n;
    out.psnr /= n;
    out.ssim /= n;
  }
  return out;
}

std::string format_report(const MetricsReport& r, const std::string& prefix) {
  char buf[256];
  std::string out;
  const std::pair<const char*, double> rows[] = {
      {"mse", r.mse}, {"fmse", r.fmse}, {"psnr", r.psnr}, {"ssim", r.ssim}};
  for (const auto& [name, value] : rows) {
    std::snprintf(buf, sizeof buf, "%s%s=%.6g\n", prefix.c_str(), name, value);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%sn_images=%zu\n", prefix.c_str(), r.n_images);
  out += buf;
  return out;
}

}  // namespace hdnet
