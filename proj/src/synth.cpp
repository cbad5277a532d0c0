#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "hdnet/data.hpp"
#include "hdnet/error.hpp"

namespace hdnet {

namespace {

constexpr int kMaskAttempts = 4000;

std::mt19937_64 sample_rng(std::uint64_t seed, std::size_t size, FgBand band) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(size), static_cast<std::uint32_t>(band), 0x48444eu};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Sum of random plane waves at doubling frequencies plus a few flat shapes.
Tensor smooth_color_field(std::mt19937_64& rng, std::size_t size) {
  Tensor img({1, 3, size, size}, 0.0);
  const double n = static_cast<double>(size);
  for (std::size_t c = 0; c < 3; ++c) {
    const double base = uniform(rng, 0.25, 0.75);
    double amplitude = 0.18;
    std::vector<std::array<double, 4>> waves;  // fx, fy, phase, amplitude
    for (int octave = 0; octave < 4; ++octave) {
      const double freq = std::pow(2.0, octave) * 2.0 * std::numbers::pi / n;
      for (int j = 0; j < 2; ++j) {
        const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        waves.push_back({freq * std::cos(angle), freq * std::sin(angle),
                         uniform(rng, 0.0, 2.0 * std::numbers::pi), amplitude * uniform(rng, 0.5, 1.0)});
      }
      amplitude *= 0.5;
    }
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        double v = base;
        for (const auto& w : waves)
          v += w[3] * std::sin(w[0] * static_cast<double>(x) + w[1] * static_cast<double>(y) + w[2]);
        img.at(0, c, y, x) = v;
      }
  }

  const int shapes = std::uniform_int_distribution<int>(2, 5)(rng);
  for (int s = 0; s < shapes; ++s) {
    const bool ellipse = rng() % 2 == 0;
    const double cx = uniform(rng, 0.0, n), cy = uniform(rng, 0.0, n);
    const double rx = uniform(rng, 0.05, 0.25) * n, ry = uniform(rng, 0.05, 0.25) * n;
    const double opacity = uniform(rng, 0.4, 0.9);
    std::array<double, 3> color{uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)};
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
        const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
        const bool inside = ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (!inside) continue;
        for (std::size_t c = 0; c < 3; ++c)
          img.at(0, c, y, x) = (1.0 - opacity) * img.at(0, c, y, x) + opacity * color[c];
      }
  }
  for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

std::pair<double, double> band_target(FgBand band) {
  switch (band) {
    case FgBand::Low: return {0.005, 0.05};
    case FgBand::Mid: return {0.05, 0.15};
    case FgBand::High: return {0.15, 0.6};
  }
  return {0.05, 0.15};
}

std::optional<Mask> random_mask(std::mt19937_64& rng, std::size_t size, FgBand band) {
  const double n = static_cast<double>(size);
  const auto [lo, hi] = band_target(band);
  const bool ellipse = rng() % 2 == 0;
  const double ratio = uniform(rng, lo, hi);
  const double aspect = std::exp(uniform(rng, std::log(0.5), std::log(2.0)));
  const double area = ratio * n * n / (ellipse ? std::numbers::pi / 4.0 : 1.0);
  const double w = std::sqrt(area * aspect), h = std::sqrt(area / aspect);
  if (w < 1.0 || h < 1.0) return std::nullopt;
  // Rotating the shape keeps small masks from colliding across seeds.
  const double theta = uniform(rng, 0.0, std::numbers::pi);
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double ex = std::abs(w / 2 * cs) + std::abs(h / 2 * sn), ey = std::abs(w / 2 * sn) + std::abs(h / 2 * cs);
  if (2 * ex > n || 2 * ey > n) return std::nullopt;
  const double cx = uniform(rng, ex, n - ex), cy = uniform(rng, ey, n - ey);
  Tensor values({1, 1, size, size}, 0.0);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double px = static_cast<double>(x) + 0.5 - cx, py = static_cast<double>(y) + 0.5 - cy;
      const double u = (px * cs + py * sn) / (w / 2), v = (-px * sn + py * cs) / (h / 2);
      const bool inside = ellipse ? u * u + v * v <= 1.0 : std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
      values.data()[y * size + x] = inside ? 1.0 : 0.0;
    }
  return Mask(std::move(values));
}

}  // namespace

std::string_view band_name(FgBand band) {
  switch (band) {
    case FgBand::Low: return "low";
    case FgBand::Mid: return "mid";
    case FgBand::High: return "high";
  }
  return "mid";
}

FgBand parse_band(std::string_view name) {
  for (FgBand b : {FgBand::Low, FgBand::Mid, FgBand::High})
    if (band_name(b) == name) return b;
  throw ConfigError("unknown foreground band '" + std::string(name) + "'", 0);
}

bool band_contains(FgBand band, double ratio) {
  switch (band) {
    case FgBand::Low: return ratio > 0.0 && ratio < 0.05;
    case FgBand::Mid: return ratio >= 0.05 && ratio <= 0.15;
    case FgBand::High: return ratio > 0.15 && ratio <= 1.0;
  }
  return false;
}

Tensor apply_perturbation(const Tensor& image, const PerturbParams& params) {
  Tensor out = image.detach();
  const std::size_t hw = image.dim(2) * image.dim(3);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < hw; ++i) {
      double& v = out.data()[c * hw + i];
      v = std::clamp(params.gain[c] * std::pow(v, params.gamma) + params.offset[c], 0.0, 1.0);
    }
  }
  return out;
}

CompositeSample generate_sample(std::uint64_t seed, std::size_t size, FgBand band,
                                std::optional<PerturbParams> perturbation) {
  if (size < 32 || size % 16 != 0) {
    throw GenerationError("sample size must be a multiple of 16 and at least 32, got " +
                          std::to_string(size));
  }
  auto rng = sample_rng(seed, size, band);
  CompositeSample sample;
  sample.seed = seed;
  sample.band = band;
  sample.ground_truth = smooth_color_field(rng, size);

  const std::size_t cells = size / 16;
  std::optional<Mask> mask;
  for (int attempt = 0; attempt < kMaskAttempts && !mask; ++attempt) {
    auto candidate = random_mask(rng, size, band);
    if (!candidate) continue;
    const double ratio = static_cast<double>(candidate->foreground_count()) /
                         static_cast<double>(size * size);
    if (!band_contains(band, ratio)) continue;
    if (size >= 64) {
      const Mask bottleneck = candidate->resized(cells, cells);
      if (bottleneck.foreground_count() == 0 || bottleneck.background_count() == 0) continue;
    }
    mask = std::move(candidate);
  }
  if (!mask) {
    throw GenerationError("cannot place a '" + std::string(band_name(band)) + "' band mask at size " +
                          std::to_string(size) + " (seed " + std::to_string(seed) + ")");
  }
  sample.mask = std::move(*mask);

  PerturbParams p;
  for (auto& g : p.gain) g = uniform(rng, 0.5, 1.5);
  for (auto& o : p.offset) o = uniform(rng, -0.2, 0.2);
  p.gamma = uniform(rng, 0.7, 1.4);
  sample.perturbation = perturbation.value_or(p);
  sample.foreground = apply_perturbation(sample.ground_truth, sample.perturbation);
  sample.composite = compose_image(sample.ground_truth, sample.foreground, sample.mask).detach();
  return sample;
}

}  // namespace hdnet
