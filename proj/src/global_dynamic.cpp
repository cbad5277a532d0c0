#include "hdnet/error.hpp"
#include "hdnet/harmonization.hpp"
#include "hdnet/ops.hpp"

namespace hdnet {

Tensor mgd_forward(const Tensor& features, const Mask& mask, const MGDParams& params) {
  if (features.rank() != 4) {
    throw DimensionError("mgd_forward: features must be [N,C,H,W], got " +
                         shape_string(features.shape()));
  }
  if (params.w_f.shape() != params.w_b.shape()) {
    throw DimensionError("mgd_forward: w_f " + shape_string(params.w_f.shape()) + " and w_b " +
                         shape_string(params.w_b.shape()) + " differ");
  }
  const Mask m = mask.resized(features.dim(2), features.dim(3));
  return masked_dual_conv2d(features, params.w_f, params.bias_f, params.w_b, params.bias_b,
                            m.values());
}

}  // namespace hdnet
