#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hdnet/harmonization.hpp"
#include "hdnet/tensor.hpp"

namespace hdnet {

// Foreground-ratio bands: low (0, 5%), mid [5%, 15%], high (15%, 100%).
enum class FgBand { Low, Mid, High };

std::string_view band_name(FgBand band);
// Throws ConfigError on an unknown name.
FgBand parse_band(std::string_view name);
bool band_contains(FgBand band, double ratio);

struct PerturbParams {
  std::array<double, 3> gain{1.0, 1.0, 1.0};     // [0.5, 1.5]
  std::array<double, 3> offset{0.0, 0.0, 0.0};   // [-0.2, 0.2]
  double gamma = 1.0;                           // [0.7, 1.4]

  static PerturbParams identity() { return {}; }
};

// clamp(gain * v^gamma + offset, 0, 1) applied to every pixel.
Tensor apply_perturbation(const Tensor& image, const PerturbParams& params);

struct CompositeSample {
  Tensor ground_truth;  // [1,3,H,W] in [0,1]
  Tensor composite;     // [1,3,H,W] in [0,1]
  Tensor foreground;    // perturbed ground truth over the whole frame
  Mask mask;
  PerturbParams perturbation;
  std::uint64_t seed = 0;
  FgBand band = FgBand::Mid;
};

// Deterministic in (seed, size, band). Sizes must be multiples of 16 and at
// least 32. For size >= 64 the mask keeps both foreground and background
// cells at the 1/16 bottleneck resolution. Throws GenerationError when the
// band cannot be met.
CompositeSample generate_sample(std::uint64_t seed, std::size_t size, FgBand band,
                                std::optional<PerturbParams> perturbation = std::nullopt);

// 8-bit RGB PNG, bytes round(255 * v).
void save_image(const std::string& path, const Tensor& image);
// [1,3,H,W] with values byte / 255. Grayscale inputs are expanded to RGB.
Tensor load_image(const std::string& path);
// 8-bit grayscale PNG of a mask (0 or 255).
void save_mask(const std::string& path, const Mask& mask);
// Grayscale PNG (colour inputs are converted to gray); byte >= 128 marks foreground.
Mask load_mask(const std::string& path);

std::uint8_t quantize_unit(double v);

// Threshold at 0.5, inclusive.
Mask mask_binarize(const Tensor& gray);

struct ManifestEntry {
  std::uint64_t seed = 0;
  std::size_t size = 64;
  FgBand band = FgBand::Mid;
};

// `seed size band` per line; blank lines and `#` comments ignored. Throws
// ConfigError with the line number on malformed input, IoError when unreadable.
std::vector<ManifestEntry> read_manifest(const std::string& path);
std::vector<ManifestEntry> parse_manifest(std::string_view text);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

// seeds [first, first + count) with bands cycling low, mid, high.
std::vector<ManifestEntry> make_manifest(std::uint64_t first_seed, std::size_t count,
                                         std::size_t size);

}  // namespace hdnet
