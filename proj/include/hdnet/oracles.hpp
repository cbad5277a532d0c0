#pragma once

// Straightforward reference implementations used only for verification. They
// share nothing with the production kernels beyond the Tensor container.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "hdnet/harmonization.hpp"
#include "hdnet/tensor.hpp"

namespace hdnet::oracle {

// Six nested loops, zero padding.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor* bias, std::size_t stride,
              std::size_t padding);

// Full stable sort of each row by (similarity desc, index asc); returns the
// first k indices per row and their softmax weights.
void knn(const Tensor& similarity, std::size_t k, std::vector<std::size_t>& indices,
         std::vector<double>& weights);

// Loop over pixels: sum of squared channel errors / max(a_min, sum M).
double foreground_mse(const Tensor& gt, const Tensor& out, const Tensor& mask, double a_min);

// out[:, i] = ELU(W * [ref_i; fg_i] + b) with W read as [C, 2C].
Tensor affine_fuse(const Tensor& reference, const Tensor& foreground, const Tensor& weight,
                   const Tensor& bias);

double mse(const Tensor& a, const Tensor& b);
double fmse(const Tensor& a, const Tensor& b, const Tensor& mask);
double psnr(const Tensor& a, const Tensor& b);
// Direct 2-D Gaussian window sums at every valid position.
double ssim(const Tensor& a, const Tensor& b);

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);

}  // namespace hdnet::oracle
