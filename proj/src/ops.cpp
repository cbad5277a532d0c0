#include "hdnet/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "hdnet/error.hpp"

namespace hdnet {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* name) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + name + " must have rank " +
                         std::to_string(rank) + ", got " + shape_string(t.shape()));
  }
}

// Row-major C[M,N] = alpha * op(A) * op(B) + beta * C.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, const double* b, double beta, double* c) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (beta == 0.0) std::fill(c, c + m * n, 0.0);
    else if (beta != 1.0) std::for_each(c, c + m * n, [beta](double& v) { v *= beta; });
    return;
  }
  const int lda = static_cast<int>(trans_a ? m : k);
  const int ldb = static_cast<int>(trans_b ? k : n);
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a, lda, b, ldb, beta, c, static_cast<int>(n));
}

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, kh, kw, stride, pad, ho, wo;
  std::size_t patch() const { return cin * kh * kw; }
  std::size_t pixels() const { return ho * wo; }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weight, std::size_t stride,
                           std::size_t padding, const char* op) {
  require_rank(input, 4, op, "input");
  require_rank(weight, 4, op, "weight");
  if (stride == 0) throw ContractError(std::string(op) + ": stride must be positive");
  ConvGeometry g{};
  g.n = input.dim(0);
  g.cin = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.cout = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = stride;
  g.pad = padding;
  if (weight.dim(1) != g.cin) {
    throw DimensionError(std::string(op) + ": weight axis 1 (Cin=" + std::to_string(weight.dim(1)) +
                         ") does not match input axis 1 (Cin=" + std::to_string(g.cin) + ")");
  }
  if (g.kh > g.h + 2 * padding || g.kw > g.w + 2 * padding) {
    throw DimensionError(std::string(op) + ": kernel axes 2,3 " + shape_string(weight.shape()) +
                         " exceed padded input axes 2,3 " + shape_string(input.shape()));
  }
  g.ho = (g.h + 2 * padding - g.kh) / stride + 1;
  g.wo = (g.w + 2 * padding - g.kw) / stride + 1;
  return g;
}

// cols[K, P] for sample `n`.
void im2col(const ConvGeometry& g, const double* x, double* cols) {
  const std::size_t p = g.pixels();
  for (std::size_t c = 0; c < g.cin; ++c) {
    const double* plane = x + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = cols + ((c * g.kh + i) * g.kw + j) * p;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long y = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
          double* dst = row + oy * g.wo;
          if (y < 0 || y >= static_cast<long>(g.h)) {
            std::fill(dst, dst + g.wo, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(y) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long xx = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
            dst[ox] = (xx < 0 || xx >= static_cast<long>(g.w)) ? 0.0 : src[xx];
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const double* cols, double* dx) {
  const std::size_t p = g.pixels();
  for (std::size_t c = 0; c < g.cin; ++c) {
    double* plane = dx + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = cols + ((c * g.kh + i) * g.kw + j) * p;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long y = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
          if (y < 0 || y >= static_cast<long>(g.h)) continue;
          double* dst = plane + static_cast<std::size_t>(y) * g.w;
          const double* src = row + oy * g.wo;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long xx = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
            if (xx >= 0 && xx < static_cast<long>(g.w)) dst[xx] += src[ox];
          }
        }
      }
    }
  }
}

// Copies the listed columns of a [rows, total] matrix into [rows, picks.size()].
void gather_cols(const double* src, std::size_t rows, std::size_t total,
                 const std::vector<std::size_t>& picks, double* dst) {
  const std::size_t n = picks.size();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* s = src + r * total;
    double* d = dst + r * n;
    for (std::size_t i = 0; i < n; ++i) d[i] = s[picks[i]];
  }
}

void scatter_cols(const double* src, std::size_t rows, std::size_t total,
                  const std::vector<std::size_t>& picks, double* dst) {
  const std::size_t n = picks.size();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* s = src + r * n;
    double* d = dst + r * total;
    for (std::size_t i = 0; i < n; ++i) d[picks[i]] = s[i];
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const std::optional<Tensor>& bias,
              std::size_t stride, std::size_t padding) {
  const ConvGeometry g = conv_geometry(input, weight, stride, padding, "conv2d");
  if (bias && (bias->rank() != 1 || bias->dim(0) != g.cout)) {
    throw DimensionError("conv2d: bias axis 0 must equal weight axis 0 (Cout=" +
                         std::to_string(g.cout) + "), got " + shape_string(bias->shape()));
  }
  const std::size_t k = g.patch(), p = g.pixels();
  std::vector<double> out(g.n * g.cout * p);
  std::vector<double> cols(k * p);
  const double* x = input.data().data();
  const double* w = weight.data().data();
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(g, x + n * g.cin * g.h * g.w, cols.data());
    double* o = out.data() + n * g.cout * p;
    if (bias) {
      for (std::size_t co = 0; co < g.cout; ++co) std::fill(o + co * p, o + (co + 1) * p, (*bias).data()[co]);
      gemm(false, false, g.cout, p, k, 1.0, w, cols.data(), 1.0, o);
    } else {
      gemm(false, false, g.cout, p, k, 1.0, w, cols.data(), 0.0, o);
    }
  }

  std::vector<Tensor> inputs{input, weight};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  auto in_impl = input.impl();
  auto w_impl = weight.impl();
  return Tensor::from_op(
      {g.n, g.cout, g.ho, g.wo}, std::move(out), "conv2d", std::move(inputs),
      [g, has_bias, in_impl, w_impl](const std::vector<double>& gout) {
        const std::size_t k = g.patch(), p = g.pixels();
        std::vector<std::vector<double>> grads(has_bias ? 3 : 2);
        const bool need_x = in_impl->requires_grad;
        const bool need_w = w_impl->requires_grad;
        if (need_x) grads[0].assign(in_impl->data.size(), 0.0);
        if (need_w) grads[1].assign(w_impl->data.size(), 0.0);
        std::vector<double> cols(k * p);
        for (std::size_t n = 0; n < g.n; ++n) {
          const double* go = gout.data() + n * g.cout * p;
          if (need_w) {
            im2col(g, in_impl->data.data() + n * g.cin * g.h * g.w, cols.data());
            gemm(false, true, g.cout, k, p, 1.0, go, cols.data(), 1.0, grads[1].data());
          }
          if (need_x) {
            gemm(true, false, k, p, g.cout, 1.0, w_impl->data.data(), go, 0.0, cols.data());
            col2im(g, cols.data(), grads[0].data() + n * g.cin * g.h * g.w);
          }
        }
        if (has_bias) {
          grads[2].assign(g.cout, 0.0);
          for (std::size_t n = 0; n < g.n; ++n)
            for (std::size_t co = 0; co < g.cout; ++co) {
              const double* go = gout.data() + (n * g.cout + co) * p;
              grads[2][co] += std::accumulate(go, go + p, 0.0);
            }
        }
        return grads;
      });
}

Tensor masked_dual_conv2d(const Tensor& input, const Tensor& weight_fg, const Tensor& bias_fg,
                          const Tensor& weight_bg, const Tensor& bias_bg, const Tensor& mask) {
  require_same_shape(weight_fg, weight_bg, "masked_dual_conv2d");
  if (weight_fg.rank() != 4 || weight_fg.dim(2) % 2 == 0 || weight_fg.dim(3) != weight_fg.dim(2)) {
    throw DimensionError("masked_dual_conv2d: filters must be square with odd size, got " +
                         shape_string(weight_fg.shape()));
  }
  const std::size_t pad = weight_fg.dim(2) / 2;
  const ConvGeometry g = conv_geometry(input, weight_fg, 1, pad, "masked_dual_conv2d");
  for (const Tensor* b : {&bias_fg, &bias_bg}) {
    if (b->rank() != 1 || b->dim(0) != g.cout) {
      throw DimensionError("masked_dual_conv2d: bias axis 0 must equal Cout=" +
                           std::to_string(g.cout) + ", got " + shape_string(b->shape()));
    }
  }
  require_rank(mask, 4, "masked_dual_conv2d", "mask");
  if (mask.dim(0) != 1 || mask.dim(1) != 1 || mask.dim(2) != g.h || mask.dim(3) != g.w) {
    throw DimensionError("masked_dual_conv2d: mask " + shape_string(mask.shape()) +
                         " must be [1,1," + std::to_string(g.h) + "," + std::to_string(g.w) + "]");
  }
  std::vector<unsigned char> fg(g.h * g.w);
  for (std::size_t i = 0; i < g.h * g.w; ++i) {
    const double m = mask.data()[i];
    if (m != 0.0 && m != 1.0) throw ContractError("masked_dual_conv2d: mask entries must be 0 or 1");
    fg[i] = m == 1.0;
  }

  // Both banks stacked as one [2*Cout, K] matrix: a single wider GEMM is
  // cheaper than two thin ones over gathered columns.
  const std::size_t k = g.patch(), p = g.pixels(), co2 = 2 * g.cout;
  std::vector<double> stacked(co2 * k);
  std::copy(weight_fg.data().begin(), weight_fg.data().end(), stacked.begin());
  std::copy(weight_bg.data().begin(), weight_bg.data().end(), stacked.begin() + g.cout * k);
  std::vector<double> out(g.n * g.cout * p);
  std::vector<double> cols(k * p), both(co2 * p);
  const double* x = input.data().data();
  const double* bf = bias_fg.data().data();
  const double* bb = bias_bg.data().data();
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(g, x + n * g.cin * g.h * g.w, cols.data());
    gemm(false, false, co2, p, k, 1.0, stacked.data(), cols.data(), 0.0, both.data());
    double* o = out.data() + n * g.cout * p;
    for (std::size_t co = 0; co < g.cout; ++co) {
      const double* yf = both.data() + co * p;
      const double* yb = both.data() + (g.cout + co) * p;
      for (std::size_t i = 0; i < p; ++i) o[co * p + i] = fg[i] ? yf[i] + bf[co] : yb[i] + bb[co];
    }
  }

  auto in_impl = input.impl();
  return Tensor::from_op(
      {g.n, g.cout, g.ho, g.wo}, std::move(out), "masked_dual_conv2d",
      {input, weight_fg, bias_fg, weight_bg, bias_bg},
      [g, in_impl, stacked = std::move(stacked), fg = std::move(fg)](const std::vector<double>& gout) {
        const std::size_t k = g.patch(), p = g.pixels(), co2 = 2 * g.cout;
        std::vector<std::vector<double>> grads(5);
        const bool need_x = in_impl->requires_grad;
        if (need_x) grads[0].assign(in_impl->data.size(), 0.0);
        std::vector<double> dstacked(co2 * k, 0.0), split(co2 * p), cols(k * p), dcols;
        std::vector<double> dbias(co2, 0.0);
        if (need_x) dcols.resize(k * p);
        for (std::size_t n = 0; n < g.n; ++n) {
          const double* go = gout.data() + n * g.cout * p;
          for (std::size_t co = 0; co < g.cout; ++co) {
            double* sf = split.data() + co * p;
            double* sb = split.data() + (g.cout + co) * p;
            for (std::size_t i = 0; i < p; ++i) {
              const double v = go[co * p + i];
              sf[i] = fg[i] ? v : 0.0;
              sb[i] = fg[i] ? 0.0 : v;
              dbias[fg[i] ? co : g.cout + co] += v;
            }
          }
          im2col(g, in_impl->data.data() + n * g.cin * g.h * g.w, cols.data());
          gemm(false, true, co2, k, p, 1.0, split.data(), cols.data(), 1.0, dstacked.data());
          if (need_x) {
            gemm(true, false, k, p, co2, 1.0, stacked.data(), split.data(), 0.0, dcols.data());
            col2im(g, dcols.data(), grads[0].data() + n * g.cin * g.h * g.w);
          }
        }
        grads[1].assign(dstacked.begin(), dstacked.begin() + g.cout * k);
        grads[3].assign(dstacked.begin() + g.cout * k, dstacked.end());
        grads[2].assign(dbias.begin(), dbias.begin() + g.cout);
        grads[4].assign(dbias.begin() + g.cout, dbias.end());
        return grads;
      });
}

Tensor elu(const Tensor& input, double alpha) {
  if (!(alpha > 0.0)) throw ContractError("elu: alpha must be positive");
  const auto& x = input.values();
  std::vector<double> out(x.size());
  KinkTrace* trace = active_kink_trace();
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] > 0.0 ? x[i] : alpha * std::expm1(x[i]);
    if (trace) trace->record_branch(x[i] > 0.0);
  }
  auto in_impl = input.impl();
  return Tensor::from_op(input.shape(), std::move(out), "elu", {input},
                         [in_impl, alpha](const std::vector<double>& gout) {
                           const auto& x = in_impl->data;
                           std::vector<double> gx(x.size());
                           for (std::size_t i = 0; i < x.size(); ++i)
                             gx[i] = gout[i] * (x[i] > 0.0 ? 1.0 : alpha * std::exp(x[i]));
                           return std::vector<std::vector<double>>{std::move(gx)};
                         });
}

Tensor resample(const Tensor& input, Resample mode) {
  require_rank(input, 4, "resample", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t planes = n * c;
  const auto& x = input.values();
  if (mode == Resample::Down2) {
    if (h % 2 != 0 || w % 2 != 0) {
      throw DimensionError("resample(down2): axes 2,3 must be even, got " +
                           shape_string(input.shape()));
    }
    const std::size_t ho = h / 2, wo = w / 2;
    std::vector<double> out(planes * ho * wo);
    for (std::size_t pl = 0; pl < planes; ++pl)
      for (std::size_t y = 0; y < ho; ++y)
        for (std::size_t xx = 0; xx < wo; ++xx) {
          const double* r0 = x.data() + pl * h * w + 2 * y * w + 2 * xx;
          const double* r1 = r0 + w;
          out[(pl * ho + y) * wo + xx] = 0.25 * ((r0[0] + r0[1]) + (r1[0] + r1[1]));
        }
    return Tensor::from_op({n, c, ho, wo}, std::move(out), "down2", {input},
                           [planes, h, w, ho, wo](const std::vector<double>& gout) {
                             std::vector<double> gx(planes * h * w);
                             for (std::size_t pl = 0; pl < planes; ++pl)
                               for (std::size_t y = 0; y < h; ++y)
                                 for (std::size_t xx = 0; xx < w; ++xx)
                                   gx[(pl * h + y) * w + xx] =
                                       0.25 * gout[(pl * ho + y / 2) * wo + xx / 2];
                             return std::vector<std::vector<double>>{std::move(gx)};
                           });
  }
  const std::size_t ho = h * 2, wo = w * 2;
  std::vector<double> out(planes * ho * wo);
  for (std::size_t pl = 0; pl < planes; ++pl)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xx = 0; xx < wo; ++xx)
        out[(pl * ho + y) * wo + xx] = x[(pl * h + y / 2) * w + xx / 2];
  return Tensor::from_op({n, c, ho, wo}, std::move(out), "up2", {input},
                         [planes, h, w, ho, wo](const std::vector<double>& gout) {
                           std::vector<double> gx(planes * h * w, 0.0);
                           for (std::size_t pl = 0; pl < planes; ++pl)
                             for (std::size_t y = 0; y < ho; ++y)
                               for (std::size_t xx = 0; xx < wo; ++xx)
                                 gx[(pl * h + y / 2) * w + xx / 2] +=
                                     gout[(pl * ho + y) * wo + xx];
                           return std::vector<std::vector<double>>{std::move(gx)};
                         });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank(a, 4, "concat_channels", "a");
  require_rank(b, 4, "concat_channels", "b");
  for (std::size_t axis : {0u, 2u, 3u}) {
    if (a.dim(axis) != b.dim(axis)) {
      throw DimensionError("concat_channels: axis " + std::to_string(axis) + " differs (" +
                           shape_string(a.shape()) + " vs " + shape_string(b.shape()) + ")");
    }
  }
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  if (ca == 0 || cb == 0) throw DimensionError("concat_channels: empty channel axis");
  std::vector<double> out(n * (ca + cb) * hw);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.data().data() + i * ca * hw, ca * hw, out.data() + i * (ca + cb) * hw);
    std::copy_n(b.data().data() + i * cb * hw, cb * hw, out.data() + (i * (ca + cb) + ca) * hw);
  }
  return Tensor::from_op({n, ca + cb, a.dim(2), a.dim(3)}, std::move(out), "concat_channels",
                         {a, b}, [n, ca, cb, hw](const std::vector<double>& gout) {
                           std::vector<double> ga(n * ca * hw), gb(n * cb * hw);
                           for (std::size_t i = 0; i < n; ++i) {
                             const double* src = gout.data() + i * (ca + cb) * hw;
                             std::copy_n(src, ca * hw, ga.data() + i * ca * hw);
                             std::copy_n(src + ca * hw, cb * hw, gb.data() + i * cb * hw);
                           }
                           return std::vector<std::vector<double>>{std::move(ga), std::move(gb)};
                         });
}

Tensor slice_channels(const Tensor& input, std::size_t start, std::size_t count) {
  require_rank(input, 4, "slice_channels", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (count == 0 || start + count > c) {
    throw DimensionError("slice_channels: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") outside axis 1 of size " +
                         std::to_string(c));
  }
  std::vector<double> out(n * count * hw);
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(input.data().data() + (i * c + start) * hw, count * hw,
                out.data() + i * count * hw);
  return Tensor::from_op({n, count, input.dim(2), input.dim(3)}, std::move(out), "slice_channels",
                         {input}, [n, c, hw, start, count](const std::vector<double>& gout) {
                           std::vector<double> gx(n * c * hw, 0.0);
                           for (std::size_t i = 0; i < n; ++i)
                             std::copy_n(gout.data() + i * count * hw, count * hw,
                                         gx.data() + (i * c + start) * hw);
                           return std::vector<std::vector<double>>{std::move(gx)};
                         });
}

Tensor softmax(const Tensor& input) {
  if (input.rank() == 0 || input.numel() == 0 || input.shape().back() == 0) {
    throw DimensionError("softmax: input must be non-empty, got " + shape_string(input.shape()));
  }
  const std::size_t k = input.shape().back();
  const std::size_t rows = input.numel() / k;
  const auto& x = input.values();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * k;
    double* yr = out.data() + r * k;
    const double mx = *std::max_element(xr, xr + k);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) total += (yr[i] = std::exp(xr[i] - mx));
    for (std::size_t i = 0; i < k; ++i) yr[i] /= total;
  }
  std::vector<double> saved = out;
  return Tensor::from_op(input.shape(), std::move(out), "softmax", {input},
                         [saved = std::move(saved), rows, k](const std::vector<double>& gout) {
                           std::vector<double> gx(saved.size());
                           for (std::size_t r = 0; r < rows; ++r) {
                             const double* y = saved.data() + r * k;
                             const double* g = gout.data() + r * k;
                             double dot = 0.0;
                             for (std::size_t i = 0; i < k; ++i) dot += y[i] * g[i];
                             for (std::size_t i = 0; i < k; ++i) gx[r * k + i] = y[i] * (g[i] - dot);
                           }
                           return std::vector<std::vector<double>>{std::move(gx)};
                         });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::from_op(a.shape(), std::move(out), "add", {a, b},
                         [](const std::vector<double>& g) {
                           return std::vector<std::vector<double>>{g, g};
                         });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor::from_op(a.shape(), std::move(out), "sub", {a, b},
                         [](const std::vector<double>& g) {
                           std::vector<double> neg(g.size());
                           for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
                           return std::vector<std::vector<double>>{g, std::move(neg)};
                         });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto ai = a.impl(), bi = b.impl();
  return Tensor::from_op(a.shape(), std::move(out), "mul", {a, b},
                         [ai, bi](const std::vector<double>& g) {
                           std::vector<double> ga(g.size()), gb(g.size());
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             ga[i] = g[i] * bi->data[i];
                             gb[i] = g[i] * ai->data[i];
                           }
                           return std::vector<std::vector<double>>{std::move(ga), std::move(gb)};
                         });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
  return Tensor::from_op(a.shape(), std::move(out), "scale", {a},
                         [factor](const std::vector<double>& g) {
                           std::vector<double> ga(g.size());
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * factor;
                           return std::vector<std::vector<double>>{std::move(ga)};
                         });
}

Tensor sum(const Tensor& a) {
  const double total = std::accumulate(a.data().begin(), a.data().end(), 0.0);
  const std::size_t n = a.numel();
  return Tensor::from_op({1}, {total}, "sum", {a}, [n](const std::vector<double>& g) {
    return std::vector<std::vector<double>>{std::vector<double>(n, g[0])};
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " cannot become " +
                         shape_string(shape));
  }
  return Tensor::from_op(std::move(shape), a.values(), "reshape", {a},
                         [](const std::vector<double>& g) {
                           return std::vector<std::vector<double>>{g};
                         });
}

Tensor mask_blend(const Tensor& mask, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mask_blend");
  require_rank(a, 4, "mask_blend", "a");
  require_rank(mask, 4, "mask_blend", "mask");
  if (mask.dim(0) != 1 || mask.dim(1) != 1 || mask.dim(2) != a.dim(2) || mask.dim(3) != a.dim(3)) {
    throw DimensionError("mask_blend: mask " + shape_string(mask.shape()) +
                         " does not cover axes 2,3 of " + shape_string(a.shape()));
  }
  const std::size_t planes = a.dim(0) * a.dim(1), hw = a.dim(2) * a.dim(3);
  std::vector<double> m(mask.values());
  std::vector<double> out(a.numel());
  for (std::size_t pl = 0; pl < planes; ++pl)
    for (std::size_t i = 0; i < hw; ++i) {
      const std::size_t j = pl * hw + i;
      out[j] = m[i] * a.data()[j] + (1.0 - m[i]) * b.data()[j];
    }
  return Tensor::from_op(a.shape(), std::move(out), "mask_blend", {mask, a, b},
                         [m = std::move(m), planes, hw](const std::vector<double>& g) {
                           std::vector<double> ga(g.size()), gb(g.size());
                           for (std::size_t pl = 0; pl < planes; ++pl)
                             for (std::size_t i = 0; i < hw; ++i) {
                               const std::size_t j = pl * hw + i;
                               ga[j] = m[i] * g[j];
                               gb[j] = (1.0 - m[i]) * g[j];
                             }
                           return std::vector<std::vector<double>>{{}, std::move(ga),
                                                                   std::move(gb)};
                         });
}

Tensor gather_positions(const Tensor& features, const std::vector<std::size_t>& positions) {
  require_rank(features, 4, "gather_positions", "features");
  if (features.dim(0) != 1) throw DimensionError("gather_positions: axis 0 must be 1");
  const std::size_t c = features.dim(1), hw = features.dim(2) * features.dim(3);
  const std::size_t n = positions.size();
  for (std::size_t p : positions)
    if (p >= hw) throw ContractError("gather_positions: position out of range");
  std::vector<double> out(c * n);
  gather_cols(features.data().data(), c, hw, positions, out.data());
  return Tensor::from_op({c, n}, std::move(out), "gather_positions", {features},
                         [c, hw, positions](const std::vector<double>& g) {
                           std::vector<double> gx(c * hw, 0.0);
                           scatter_cols(g.data(), c, hw, positions, gx.data());
                           return std::vector<std::vector<double>>{std::move(gx)};
                         });
}

Tensor scatter_positions(const Tensor& base, const Tensor& values,
                         const std::vector<std::size_t>& positions) {
  require_rank(base, 4, "scatter_positions", "base");
  require_rank(values, 2, "scatter_positions", "values");
  const std::size_t c = base.dim(1), hw = base.dim(2) * base.dim(3);
  if (base.dim(0) != 1 || values.dim(0) != c || values.dim(1) != positions.size()) {
    throw DimensionError("scatter_positions: values " + shape_string(values.shape()) +
                         " incompatible with base " + shape_string(base.shape()));
  }
  std::vector<double> out(base.values());
  scatter_cols(values.data().data(), c, hw, positions, out.data());
  return Tensor::from_op(base.shape(), std::move(out), "scatter_positions", {base, values},
                         [c, hw, positions](const std::vector<double>& g) {
                           std::vector<double> gbase(g);
                           std::vector<double> gvals(c * positions.size());
                           gather_cols(g.data(), c, hw, positions, gvals.data());
                           for (std::size_t r = 0; r < c; ++r)
                             for (std::size_t p : positions) gbase[r * hw + p] = 0.0;
                           return std::vector<std::vector<double>>{std::move(gbase),
                                                                   std::move(gvals)};
                         });
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "cosine_similarity", "a");
  require_rank(b, 2, "cosine_similarity", "b");
  if (a.dim(0) != b.dim(0)) {
    throw DimensionError("cosine_similarity: axis 0 differs (" + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()) + ")");
  }
  const std::size_t c = a.dim(0), na = a.dim(1), nb = b.dim(1);
  std::vector<double> norm_a(na, 0.0), norm_b(nb, 0.0);
  for (std::size_t r = 0; r < c; ++r) {
    for (std::size_t i = 0; i < na; ++i) norm_a[i] += a.data()[r * na + i] * a.data()[r * na + i];
    for (std::size_t j = 0; j < nb; ++j) norm_b[j] += b.data()[r * nb + j] * b.data()[r * nb + j];
  }
  for (double& v : norm_a) v = std::sqrt(v);
  for (double& v : norm_b) v = std::sqrt(v);
  std::vector<double> dots(na * nb, 0.0);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      double d = 0.0;
      for (std::size_t r = 0; r < c; ++r) d += a.data()[r * na + i] * b.data()[r * nb + j];
      dots[i * nb + j] = d;
    }
  std::vector<double> out(na * nb);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j)
      out[i * nb + j] = dots[i * nb + j] / (norm_a[i] * norm_b[j] + kCosineEpsilon);

  auto ai = a.impl(), bi = b.impl();
  return Tensor::from_op(
      {na, nb}, std::move(out), "cosine_similarity", {a, b},
      [ai, bi, c, na, nb, norm_a, norm_b, dots](const std::vector<double>& g) {
        const auto& av = ai->data;
        const auto& bv = bi->data;
        std::vector<double> ga(c * na, 0.0), gb(c * nb, 0.0);
        // S = dot / D, D = |a||b| + eps.
        // dS/da = b / D - dot * |b| * (a / |a|) / D^2, symmetric for b.
        for (std::size_t i = 0; i < na; ++i)
          for (std::size_t j = 0; j < nb; ++j) {
            const double gij = g[i * nb + j];
            if (gij == 0.0) continue;
            const double d = norm_a[i] * norm_b[j] + kCosineEpsilon;
            const double dot = dots[i * nb + j];
            const double ca = norm_a[i] > 0.0 ? dot * norm_b[j] / (norm_a[i] * d * d) : 0.0;
            const double cb = norm_b[j] > 0.0 ? dot * norm_a[i] / (norm_b[j] * d * d) : 0.0;
            for (std::size_t r = 0; r < c; ++r) {
              const double x = av[r * na + i], y = bv[r * nb + j];
              ga[r * na + i] += gij * (y / d - ca * x);
              gb[r * nb + j] += gij * (x / d - cb * y);
            }
          }
        return std::vector<std::vector<double>>{std::move(ga), std::move(gb)};
      });
}

Tensor gather_rows(const Tensor& rows, const std::vector<std::size_t>& indices, std::size_t k) {
  require_rank(rows, 2, "gather_rows", "rows");
  const std::size_t r = rows.dim(0), m = rows.dim(1);
  if (indices.size() != r * k) throw DimensionError("gather_rows: index count must be rows*k");
  std::vector<double> out(r * k);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t idx = indices[i * k + j];
      if (idx >= m) throw ContractError("gather_rows: index out of range");
      out[i * k + j] = rows.data()[i * m + idx];
    }
  return Tensor::from_op({r, k}, std::move(out), "gather_rows", {rows},
                         [r, m, k, indices](const std::vector<double>& g) {
                           std::vector<double> gx(r * m, 0.0);
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < k; ++j)
                               gx[i * m + indices[i * k + j]] += g[i * k + j];
                           return std::vector<std::vector<double>>{std::move(gx)};
                         });
}

Tensor weighted_gather(const Tensor& columns, const std::vector<std::size_t>& indices,
                       const Tensor& weights) {
  require_rank(columns, 2, "weighted_gather", "columns");
  require_rank(weights, 2, "weighted_gather", "weights");
  const std::size_t c = columns.dim(0), nb = columns.dim(1);
  const std::size_t nf = weights.dim(0), k = weights.dim(1);
  if (indices.size() != nf * k) throw DimensionError("weighted_gather: index count must be Nf*K");
  for (std::size_t idx : indices)
    if (idx >= nb) throw ContractError("weighted_gather: index out of range");
  std::vector<double> out(c * nf, 0.0);
  const auto& col = columns.values();
  const auto& w = weights.values();
  for (std::size_t r = 0; r < c; ++r)
    for (std::size_t i = 0; i < nf; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += w[i * k + j] * col[r * nb + indices[i * k + j]];
      out[r * nf + i] = acc;
    }
  auto ci = columns.impl(), wi = weights.impl();
  return Tensor::from_op({c, nf}, std::move(out), "weighted_gather", {columns, weights},
                         [ci, wi, c, nb, nf, k, indices](const std::vector<double>& g) {
                           std::vector<double> gc(c * nb, 0.0), gw(nf * k, 0.0);
                           for (std::size_t r = 0; r < c; ++r)
                             for (std::size_t i = 0; i < nf; ++i) {
                               const double gi = g[r * nf + i];
                               for (std::size_t j = 0; j < k; ++j) {
                                 const std::size_t idx = indices[i * k + j];
                                 gc[r * nb + idx] += gi * wi->data[i * k + j];
                                 gw[i * k + j] += gi * ci->data[r * nb + idx];
                               }
                             }
                           return std::vector<std::vector<double>>{std::move(gc), std::move(gw)};
                         });
}

}  // namespace hdnet
