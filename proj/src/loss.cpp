#include <algorithm>

#include "hdnet/error.hpp"
#include "hdnet/harmonization.hpp"
#include "hdnet/ops.hpp"

namespace hdnet {

LossConfig LossConfig::for_size(std::size_t h, std::size_t w) {
  return {std::max(1.0, 100.0 * static_cast<double>(h * w) / (256.0 * 256.0))};
}

Tensor foreground_mse_loss(const Tensor& ground_truth, const Tensor& harmonized, const Mask& mask,
                           const LossConfig& cfg) {
  if (ground_truth.shape() != harmonized.shape()) {
    throw DimensionError("foreground_mse_loss: ground truth " + shape_string(ground_truth.shape()) +
                         " and harmonized " + shape_string(harmonized.shape()) + " differ");
  }
  if (!(cfg.a_min >= 1.0)) throw ContractError("foreground_mse_loss: a_min must be at least 1");
  const double area = std::max(cfg.a_min, static_cast<double>(mask.foreground_count()));
  Tensor diff = sub(ground_truth, harmonized);
  return scale(sum(mul(diff, diff)), 1.0 / area);
}

}  // namespace hdnet
