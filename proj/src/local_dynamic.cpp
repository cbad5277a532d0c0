#include <algorithm>
#include <cmath>
#include <numeric>

#include "hdnet/error.hpp"
#include "hdnet/harmonization.hpp"
#include "hdnet/ops.hpp"

namespace hdnet {

LocalSplit split_locals(const Tensor& features, const Mask& mask) {
  if (features.rank() != 4 || features.dim(0) != 1) {
    throw DimensionError("split_locals: features must be [1,C,H,W], got " +
                         shape_string(features.shape()));
  }
  const std::size_t h = features.dim(2), w = features.dim(3);
  if (mask.height() != h || mask.width() != w) {
    throw DimensionError("split_locals: mask " + std::to_string(mask.height()) + "x" +
                         std::to_string(mask.width()) + " does not match features axes 2,3 " +
                         shape_string(features.shape()));
  }
  LocalSplit split;
  split.height = h;
  split.width = w;
  for (std::size_t i = 0; i < h * w; ++i) {
    (mask.values().data()[i] == 1.0 ? split.fg_positions : split.bg_positions).push_back(i);
  }
  if (split.fg_positions.empty() || split.bg_positions.empty()) {
    throw DegenerateMaskError("split_locals: mask has " + std::to_string(split.fg_positions.size()) +
                              " foreground and " + std::to_string(split.bg_positions.size()) +
                              " background locations");
  }
  split.foreground_locals = gather_positions(features, split.fg_positions);
  split.background_locals = gather_positions(features, split.bg_positions);
  return split;
}

Tensor scatter_locals(const LocalSplit& split) {
  const std::size_t c = split.foreground_locals.dim(0);
  Tensor base({1, c, split.height, split.width}, 0.0);
  Tensor with_fg = scatter_positions(base, split.foreground_locals, split.fg_positions);
  return scatter_positions(with_fg, split.background_locals, split.bg_positions);
}

Tensor cosine_similarity_map(const LocalSplit& split) {
  return cosine_similarity(split.foreground_locals, split.background_locals);
}

LDSelection knn_select(const Tensor& similarity, std::size_t k) {
  if (similarity.rank() != 2) {
    throw DimensionError("knn_select: similarity must be [N_f,N_b], got " +
                         shape_string(similarity.shape()));
  }
  const std::size_t rows = similarity.dim(0), nb = similarity.dim(1);
  if (k == 0) throw ContractError("knn_select: k must be at least 1");
  if (k > nb) {
    throw ContractError("knn_select: k=" + std::to_string(k) + " exceeds N_b=" + std::to_string(nb));
  }
  LDSelection sel;
  sel.k = k;
  sel.rows = rows;
  sel.indices.resize(rows * k);
  sel.weights.resize(rows * k);
  sel.similarity = similarity;
  const auto& s = similarity.values();
  std::vector<std::size_t> order(nb);
  KinkTrace* trace = active_kink_trace();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = s.data() + r * nb;
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                      [row](std::size_t a, std::size_t b) {
                        return row[a] != row[b] ? row[a] > row[b] : a < b;
                      });
    const double top = row[order[0]];
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      sel.indices[r * k + j] = order[j];
      total += (sel.weights[r * k + j] = std::exp(row[order[j]] - top));
      if (trace) trace->record_index(order[j]);
    }
    for (std::size_t j = 0; j < k; ++j) sel.weights[r * k + j] /= total;
  }
  return sel;
}

Tensor fuse_reference(const LocalSplit& split, const LDSelection& selection,
                      const Tensor& similarity) {
  Tensor alpha = softmax(gather_rows(similarity, selection.indices, selection.k));
  return weighted_gather(split.background_locals, selection.indices, alpha);
}

Tensor fuse_reference(const LocalSplit& split, const LDSelection& selection) {
  if (selection.rows != split.foreground_locals.dim(1)) {
    throw ContractError("fuse_reference: selection rows do not match N_f");
  }
  if (selection.similarity) return fuse_reference(split, selection, *selection.similarity);
  Tensor alpha({selection.rows, selection.k}, selection.weights);
  return weighted_gather(split.background_locals, selection.indices, alpha);
}

Tensor adaptive_fuse(const Tensor& reference, const Tensor& foreground, const LDParams& params) {
  if (reference.rank() != 2 || reference.shape() != foreground.shape()) {
    throw DimensionError("adaptive_fuse: reference " + shape_string(reference.shape()) +
                         " and foreground " + shape_string(foreground.shape()) +
                         " must be equal [C,N] shapes");
  }
  const std::size_t c = reference.dim(0), n = reference.dim(1);
  const Shape& ws = params.fusion_weight.shape();
  if (ws.size() != 4 || ws[0] != c || ws[1] != 2 * c || ws[2] != 1 || ws[3] != 1) {
    throw DimensionError("adaptive_fuse: fusion weight " + shape_string(ws) + " must be [" +
                         std::to_string(c) + "," + std::to_string(2 * c) + ",1,1]");
  }
  Tensor ref4 = reshape(reference, {1, c, 1, n});
  Tensor fg4 = reshape(foreground, {1, c, 1, n});
  Tensor fused = conv2d(concat_channels(ref4, fg4), params.fusion_weight, params.fusion_bias, 1, 0);
  return reshape(elu(fused, 1.0), {c, n});
}

Tensor ld_forward(const Tensor& features, const Mask& mask, const LDParams& params,
                  LDDiagnostics* diag) {
  if (features.rank() != 4 || features.dim(0) != 1) {
    throw DimensionError("ld_forward: features must be [1,C,H,W], got " +
                         shape_string(features.shape()));
  }
  if (params.k_neighbors == 0) throw ContractError("ld_forward: k_neighbors must be at least 1");
  const Mask m = mask.resized(features.dim(2), features.dim(3));
  if (diag) *diag = {};
  if (m.foreground_count() == 0 || m.background_count() == 0) {
    if (diag) diag->bypassed = true;
    return features;
  }
  LocalSplit split = split_locals(features, m);
  Tensor similarity = cosine_similarity_map(split);
  const std::size_t k = std::min(params.k_neighbors, split.bg_positions.size());
  LDSelection selection = knn_select(similarity, k);
  Tensor reference = fuse_reference(split, selection, similarity);
  Tensor fused = adaptive_fuse(reference, split.foreground_locals, params);
  Tensor out = scatter_positions(features, fused, split.fg_positions);
  if (diag) diag->selection = std::move(selection);
  return out;
}

}  // namespace hdnet
