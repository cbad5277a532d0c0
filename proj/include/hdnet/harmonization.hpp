#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hdnet/tensor.hpp"

namespace hdnet {

// Binary foreground mask [1,1,H,W]. The background mask is always 1 - M.
class Mask {
 public:
  Mask() = default;
  // Throws ContractError unless every entry is exactly 0 or 1.
  explicit Mask(Tensor values);

  static Mask zeros(std::size_t h, std::size_t w);
  static Mask ones(std::size_t h, std::size_t w);

  const Tensor& values() const { return values_; }
  std::size_t height() const { return values_.dim(2); }
  std::size_t width() const { return values_.dim(3); }
  std::size_t foreground_count() const { return foreground_count_; }
  std::size_t background_count() const { return height() * width() - foreground_count_; }
  bool is_foreground(std::size_t y, std::size_t x) const {
    return values_.data()[y * width() + x] == 1.0;
  }

  // Area average over integer blocks, then >= 0.5 -> 1. H and W must be
  // multiples of the target size.
  Mask resized(std::size_t h, std::size_t w) const;

 private:
  Tensor values_{Shape{1, 1, 0, 0}};
  std::size_t foreground_count_ = 0;
};

// Image-domain I_c = M * I_f + (1 - M) * I.
Tensor compose_image(const Tensor& ground_truth, const Tensor& foreground, const Mask& mask);

struct LocalSplit {
  Tensor foreground_locals;  // [C, N_f]
  Tensor background_locals;  // [C, N_b]
  std::vector<std::size_t> fg_positions;  // flat y*W + x
  std::vector<std::size_t> bg_positions;
  std::size_t height = 0;
  std::size_t width = 0;
};

// Throws DegenerateMaskError when either side is empty.
LocalSplit split_locals(const Tensor& features, const Mask& mask);
// Inverse of split_locals.
Tensor scatter_locals(const LocalSplit& split);

Tensor cosine_similarity_map(const LocalSplit& split);

struct LDSelection {
  std::size_t k = 0;
  std::size_t rows = 0;
  std::vector<std::size_t> indices;  // rows x k, row-major, best first
  std::vector<double> weights;       // rows x k softmax weights
  std::optional<Tensor> similarity;
};

// Top-k background columns per row, larger similarity first, smaller index on
// ties; weights are the softmax of the selected similarities.
LDSelection knn_select(const Tensor& similarity, std::size_t k);

// reference[:, i] = sum_k alpha_k * F_b[:, idx_k], alpha recomputed on the tape
// from the similarity map so that gradients flow through it. Selection indices
// are constants.
Tensor fuse_reference(const LocalSplit& split, const LDSelection& selection);
Tensor fuse_reference(const LocalSplit& split, const LDSelection& selection,
                      const Tensor& similarity);

struct LDParams {
  Tensor fusion_weight;  // [C, 2C, 1, 1]
  Tensor fusion_bias;    // [C]
  std::size_t k_neighbors = 1;
};

// ELU(conv1x1(concat(reference, foreground))) per location; inputs are [C, N].
Tensor adaptive_fuse(const Tensor& reference, const Tensor& foreground, const LDParams& params);

struct LDDiagnostics {
  bool bypassed = false;
  std::optional<LDSelection> selection;
};

// Local dynamic module. Background locations are returned unchanged; a
// degenerate mask returns the input and sets `diag->bypassed`.
Tensor ld_forward(const Tensor& features, const Mask& mask, const LDParams& params,
                  LDDiagnostics* diag = nullptr);

struct MGDParams {
  Tensor w_f;  // [Cout, Cin, 3, 3]
  Tensor w_b;
  Tensor bias_f;  // [Cout]
  Tensor bias_b;
};

// Mask-aware global dynamic convolution, stride 1 padding 1. The mask is
// resized to the feature resolution when needed.
Tensor mgd_forward(const Tensor& features, const Mask& mask, const MGDParams& params);

enum class Variant { Base, LdOnly, MgdOnly, Full, FullLite };

std::string_view variant_name(Variant v);
// Throws ConfigError on an unknown name.
Variant parse_variant(std::string_view name);
bool variant_uses_ld(Variant v);
bool variant_uses_mgd(Variant v);

struct GeneratorConfig {
  std::size_t base_channels = 32;
  std::size_t k_neighbors = 1;
  Variant variant = Variant::Full;
  std::uint64_t init_seed = 0;

  // base_channels / 4 for FullLite, base_channels otherwise.
  std::size_t effective_base_channels() const;
};

// Named learnable tensors in registration order.
class GeneratorParams {
 public:
  GeneratorParams() = default;
  static GeneratorParams initialize(const GeneratorConfig& config);

  const GeneratorConfig& config() const { return config_; }
  GeneratorConfig& config() { return config_; }

  void add(std::string name, Tensor tensor);
  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }

  void zero_grads();

  LDParams ld_params() const;
  MGDParams mgd_params(std::size_t stage) const;

 private:
  GeneratorConfig config_;
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// Rebuilds the architecture description from parameter names and shapes.
// Throws VersionError when the tensors do not form a known generator.
GeneratorConfig infer_generator_config(const std::vector<std::pair<std::string, Tensor>>& tensors,
                                       std::size_t k_neighbors);

constexpr std::size_t kEncoderStages = 4;

struct GeneratorDiagnostics {
  bool ld_bypassed = false;
};

// U-Net: 4 x (conv3x3 + ELU + down2), LD at the bottleneck, 4 x (up2 + skip
// concat + MGD/conv + ELU), 1x1 projection to 3 channels, then the output is
// blended with the composite through the mask.
Tensor generator_forward(const Tensor& composite, const Mask& mask, const GeneratorParams& params,
                         GeneratorDiagnostics* diag = nullptr);

struct LossConfig {
  double a_min = 100.0;
  // 100 px at 256x256 scaled by area.
  static LossConfig for_size(std::size_t h, std::size_t w);
};

// sum_{y,x} ||I - I_h||^2 / max(a_min, sum M).
Tensor foreground_mse_loss(const Tensor& ground_truth, const Tensor& harmonized, const Mask& mask,
                           const LossConfig& cfg);

std::size_t count_parameters(const GeneratorParams& params);

}  // namespace hdnet
