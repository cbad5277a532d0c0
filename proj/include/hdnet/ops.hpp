#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "hdnet/tensor.hpp"

namespace hdnet {

// Cross-correlation (no kernel flip). input [N,Cin,H,W], weight [Cout,Cin,kh,kw],
// bias [Cout] or empty. Output spatial size is (H + 2p - kh) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, const std::optional<Tensor>& bias,
              std::size_t stride = 1, std::size_t padding = 0);

// Two 3x3 same-padding filter banks applied through a binary mask
// [1,1,H,W]: out = conv(x, Wf) * M + conv(x, Wb) * (1 - M). Each output
// value is taken from exactly one bank, so no blend arithmetic touches it.
Tensor masked_dual_conv2d(const Tensor& input, const Tensor& weight_fg, const Tensor& bias_fg,
                          const Tensor& weight_bg, const Tensor& bias_bg, const Tensor& mask);

Tensor elu(const Tensor& input, double alpha = 1.0);

enum class Resample { Down2, Up2 };
// Down2 is 2x2 average pooling, Up2 nearest-neighbour replication.
Tensor resample(const Tensor& input, Resample mode);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& input, std::size_t start, std::size_t count);

// Normalises over the last axis with max subtraction.
Tensor softmax(const Tensor& input);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// mask [1,1,H,W] broadcast over N and C: mask * a + (1 - mask) * b.
Tensor mask_blend(const Tensor& mask, const Tensor& a, const Tensor& b);

// Columns of a [1,C,H,W] map at the given flat (y*W + x) positions -> [C,N].
Tensor gather_positions(const Tensor& features, const std::vector<std::size_t>& positions);
// Copy of `base` with the given flat positions overwritten by the columns of
// `values` [C,N].
Tensor scatter_positions(const Tensor& base, const Tensor& values,
                         const std::vector<std::size_t>& positions);

// a [C,Na], b [C,Nb] -> [Na,Nb] of column cosines; denominator norm_a*norm_b + 1e-8.
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

// rows [R,M], indices R x K (row-major) -> [R,K] with out[r][k] = rows[r][indices[r*K+k]].
Tensor gather_rows(const Tensor& rows, const std::vector<std::size_t>& indices, std::size_t k);

// columns [C,Nb], indices Nf x K, weights [Nf,K] -> [C,Nf]:
// out[:, i] = sum_k weights[i][k] * columns[:, indices[i*K+k]].
Tensor weighted_gather(const Tensor& columns, const std::vector<std::size_t>& indices,
                       const Tensor& weights);

constexpr double kCosineEpsilon = 1e-8;

}  // namespace hdnet
