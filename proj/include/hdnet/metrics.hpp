#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hdnet/harmonization.hpp"
#include "hdnet/tensor.hpp"

namespace hdnet {

// All metrics take [1,C,H,W] images in [0,1] and work on the 0-255 scale.

double mse(const Tensor& a, const Tensor& b);
// Mean over masked pixels and channels. Throws ContractError for an empty mask.
double fmse(const Tensor& a, const Tensor& b, const Mask& mask);

constexpr double kPsnrCap = 100.0;
double psnr_from_mse(double mse_value);
// 10 log10(255^2 / mse), capped at 100 dB.
double psnr(const Tensor& a, const Tensor& b);

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};
// Gaussian-window SSIM per channel over valid window positions, channel mean.
double ssim(const Tensor& a, const Tensor& b, const SsimOptions& options = {});

struct MetricsReport {
  double mse = 0.0;
  double fmse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::size_t n_images = 0;
};

MetricsReport measure(const Tensor& harmonized, const Tensor& ground_truth, const Mask& mask);
// Per-image mean of each metric.
MetricsReport average(const std::vector<MetricsReport>& reports);

// `metric=value` lines with 6 significant digits; `prefix` is prepended to names.
std::string format_report(const MetricsReport& report, const std::string& prefix = "");

}  // namespace hdnet
