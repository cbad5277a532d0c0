#include <string>

#include "hdnet/error.hpp"
#include "hdnet/harmonization.hpp"
#include "hdnet/ops.hpp"

namespace hdnet {

Mask::Mask(Tensor values) : values_(std::move(values)) {
  if (values_.rank() != 4 || values_.dim(0) != 1 || values_.dim(1) != 1) {
    throw DimensionError("mask must have shape [1,1,H,W], got " + shape_string(values_.shape()));
  }
  for (double v : values_.data()) {
    if (v != 0.0 && v != 1.0) throw ContractError("mask entries must be exactly 0 or 1");
    if (v == 1.0) ++foreground_count_;
  }
}

Mask Mask::zeros(std::size_t h, std::size_t w) { return Mask(Tensor({1, 1, h, w}, 0.0)); }
Mask Mask::ones(std::size_t h, std::size_t w) { return Mask(Tensor({1, 1, h, w}, 1.0)); }

Mask Mask::resized(std::size_t h, std::size_t w) const {
  if (h == height() && w == width()) return *this;
  if (h == 0 || w == 0 || height() % h != 0 || width() % w != 0) {
    throw DimensionError("mask " + shape_string(values_.shape()) + " cannot be area-resized to " +
                         std::to_string(h) + "x" + std::to_string(w));
  }
  const std::size_t by = height() / h, bx = width() / w;
  Tensor out({1, 1, h, w}, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t count = 0;
      for (std::size_t dy = 0; dy < by; ++dy)
        for (std::size_t dx = 0; dx < bx; ++dx) count += is_foreground(y * by + dy, x * bx + dx);
      // count / (by*bx) >= 0.5 without rounding.
      out.data()[y * w + x] = 2 * count >= by * bx ? 1.0 : 0.0;
    }
  return Mask(std::move(out));
}

Tensor compose_image(const Tensor& ground_truth, const Tensor& foreground, const Mask& mask) {
  if (ground_truth.shape() != foreground.shape()) {
    throw DimensionError("compose_image: ground truth " + shape_string(ground_truth.shape()) +
                         " and foreground " + shape_string(foreground.shape()) + " differ");
  }
  return mask_blend(mask.values(), foreground, ground_truth);
}

}  // namespace hdnet
