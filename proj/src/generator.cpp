#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "hdnet/error.hpp"
#include "hdnet/harmonization.hpp"
#include "hdnet/ops.hpp"

namespace hdnet {

namespace {

constexpr std::size_t kImageChannels = 3;

std::string stage_name(const char* prefix, std::size_t stage) {
  return std::string(prefix) + std::to_string(stage);
}

Tensor uniform_tensor(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape), 0.0);
  for (double& v : t.data()) v = dist(rng);
  t.set_requires_grad(true);
  return t;
}

Tensor zero_param(Shape shape) {
  Tensor t(std::move(shape), 0.0);
  t.set_requires_grad(true);
  return t;
}

// Output channels of encoder stage s and of decoder stage s.
std::size_t stage_width(std::size_t base, std::size_t stage) { return base << stage; }

// Decoder stage s consumes up2(previous) concatenated with encoder skip s.
std::size_t decoder_in_channels(std::size_t base, std::size_t stage) {
  const std::size_t from_below =
      stage + 1 == kEncoderStages ? stage_width(base, kEncoderStages - 1) : stage_width(base, stage + 1);
  return from_below + stage_width(base, stage);
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Base: return "base";
    case Variant::LdOnly: return "ld_only";
    case Variant::MgdOnly: return "mgd_only";
    case Variant::Full: return "full";
    case Variant::FullLite: return "full_lite";
  }
  return "full";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::Base, Variant::LdOnly, Variant::MgdOnly, Variant::Full,
                    Variant::FullLite}) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) + "'", 0);
}

bool variant_uses_ld(Variant v) {
  return v == Variant::LdOnly || v == Variant::Full || v == Variant::FullLite;
}
bool variant_uses_mgd(Variant v) {
  return v == Variant::MgdOnly || v == Variant::Full || v == Variant::FullLite;
}

std::size_t GeneratorConfig::effective_base_channels() const {
  return variant == Variant::FullLite ? std::max<std::size_t>(1, base_channels / 4) : base_channels;
}

GeneratorParams GeneratorParams::initialize(const GeneratorConfig& config) {
  const std::size_t b = config.effective_base_channels();
  if (b == 0) throw ContractError("base_channels must be positive");
  if (config.k_neighbors == 0) throw ContractError("k_neighbors must be at least 1");
  GeneratorParams p;
  p.config_ = config;
  std::mt19937_64 rng(config.init_seed);

  std::size_t in = kImageChannels;
  for (std::size_t s = 0; s < kEncoderStages; ++s) {
    const std::size_t out = stage_width(b, s);
    p.add(stage_name("enc", s) + ".conv.weight", uniform_tensor({out, in, 3, 3}, in * 9, rng));
    p.add(stage_name("enc", s) + ".conv.bias", zero_param({out}));
    in = out;
  }
  if (variant_uses_ld(config.variant)) {
    const std::size_t c = stage_width(b, kEncoderStages - 1);
    p.add("ld.fusion_weight", uniform_tensor({c, 2 * c, 1, 1}, 2 * c, rng));
    p.add("ld.fusion_bias", zero_param({c}));
  }
  for (std::size_t i = 0; i < kEncoderStages; ++i) {
    const std::size_t s = kEncoderStages - 1 - i;
    const std::size_t cin = decoder_in_channels(b, s), cout = stage_width(b, s);
    const std::string prefix = stage_name("dec", s);
    if (variant_uses_mgd(config.variant)) {
      p.add(prefix + ".mgd.w_f", uniform_tensor({cout, cin, 3, 3}, cin * 9, rng));
      p.add(prefix + ".mgd.w_b", uniform_tensor({cout, cin, 3, 3}, cin * 9, rng));
      p.add(prefix + ".mgd.bias_f", zero_param({cout}));
      p.add(prefix + ".mgd.bias_b", zero_param({cout}));
    } else {
      p.add(prefix + ".conv.weight", uniform_tensor({cout, cin, 3, 3}, cin * 9, rng));
      p.add(prefix + ".conv.bias", zero_param({cout}));
    }
  }
  p.add("out.weight", uniform_tensor({kImageChannels, b, 1, 1}, b, rng));
  p.add("out.bias", zero_param({kImageChannels}));
  return p;
}

void GeneratorParams::add(std::string name, Tensor tensor) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  tensor.set_requires_grad(true);
  entries_.emplace_back(std::move(name), std::move(tensor));
}

bool GeneratorParams::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [name](const auto& e) { return e.first == name; });
}

const Tensor& GeneratorParams::get(std::string_view name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw ContractError("no parameter named '" + std::string(name) + "'");
}

void GeneratorParams::zero_grads() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

LDParams GeneratorParams::ld_params() const {
  return {get("ld.fusion_weight"), get("ld.fusion_bias"), config_.k_neighbors};
}

MGDParams GeneratorParams::mgd_params(std::size_t stage) const {
  const std::string prefix = stage_name("dec", stage) + ".mgd.";
  return {get(prefix + "w_f"), get(prefix + "w_b"), get(prefix + "bias_f"), get(prefix + "bias_b")};
}

GeneratorConfig infer_generator_config(const std::vector<std::pair<std::string, Tensor>>& tensors,
                                       std::size_t k_neighbors) {
  auto find = [&](std::string_view name) -> const Tensor* {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  };
  const Tensor* first = find("enc0.conv.weight");
  if (!first || first->rank() != 4) throw VersionError("checkpoint lacks enc0.conv.weight");
  const bool ld = find("ld.fusion_weight") != nullptr;
  const bool mgd = find("dec0.mgd.w_f") != nullptr;
  GeneratorConfig cfg;
  cfg.base_channels = first->dim(0);
  cfg.k_neighbors = k_neighbors;
  cfg.variant = ld ? (mgd ? Variant::Full : Variant::LdOnly) : (mgd ? Variant::MgdOnly : Variant::Base);

  const GeneratorParams expected = GeneratorParams::initialize(cfg);
  if (expected.entries().size() != tensors.size()) {
    throw VersionError("checkpoint holds " + std::to_string(tensors.size()) +
                       " tensors, architecture expects " +
                       std::to_string(expected.entries().size()));
  }
  for (const auto& [name, t] : expected.entries()) {
    const Tensor* got = find(name);
    if (!got) throw VersionError("checkpoint lacks tensor '" + name + "'");
    if (got->shape() != t.shape()) {
      throw VersionError("tensor '" + name + "' has shape " + shape_string(got->shape()) +
                         ", architecture expects " + shape_string(t.shape()));
    }
  }
  return cfg;
}

Tensor generator_forward(const Tensor& composite, const Mask& mask, const GeneratorParams& params,
                         GeneratorDiagnostics* diag) {
  if (composite.rank() != 4 || composite.dim(0) != 1 || composite.dim(1) != kImageChannels) {
    throw DimensionError("generator_forward: composite must be [1,3,H,W], got " +
                         shape_string(composite.shape()));
  }
  const std::size_t h = composite.dim(2), w = composite.dim(3);
  const std::size_t factor = std::size_t{1} << kEncoderStages;
  if (h % factor != 0 || w % factor != 0 || h == 0 || w == 0) {
    throw DimensionError("generator_forward: axes 2,3 (" + std::to_string(h) + "x" +
                         std::to_string(w) + ") must be divisible by " + std::to_string(factor));
  }
  if (mask.height() != h || mask.width() != w) {
    throw DimensionError("generator_forward: mask must be at image resolution");
  }
  const Variant variant = params.config().variant;

  std::vector<Mask> level_masks;
  for (std::size_t l = 0; l <= kEncoderStages; ++l)
    level_masks.push_back(mask.resized(h >> l, w >> l));

  std::vector<Tensor> skips;
  Tensor x = composite;
  for (std::size_t s = 0; s < kEncoderStages; ++s) {
    const std::string prefix = stage_name("enc", s);
    x = elu(conv2d(x, params.get(prefix + ".conv.weight"), params.get(prefix + ".conv.bias"), 1, 1));
    skips.push_back(x);
    x = resample(x, Resample::Down2);
  }

  if (diag) *diag = {};
  if (variant_uses_ld(variant)) {
    LDDiagnostics ld_diag;
    x = ld_forward(x, level_masks[kEncoderStages], params.ld_params(), &ld_diag);
    if (diag) diag->ld_bypassed = ld_diag.bypassed;
  }

  for (std::size_t i = 0; i < kEncoderStages; ++i) {
    const std::size_t s = kEncoderStages - 1 - i;
    x = concat_channels(resample(x, Resample::Up2), skips[s]);
    if (variant_uses_mgd(variant)) {
      x = mgd_forward(x, level_masks[s], params.mgd_params(s));
    } else {
      const std::string prefix = stage_name("dec", s);
      x = conv2d(x, params.get(prefix + ".conv.weight"), params.get(prefix + ".conv.bias"), 1, 1);
    }
    x = elu(x);
  }
  Tensor raw = conv2d(x, params.get("out.weight"), params.get("out.bias"), 1, 0);
  return mask_blend(mask.values(), raw, composite);
}

std::size_t count_parameters(const GeneratorParams& params) {
  std::size_t total = 0;
  for (const auto& [name, t] : params.entries()) total += t.numel();
  return total;
}

}  // namespace hdnet
