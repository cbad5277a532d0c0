#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "hdnet/data.hpp"
#include "hdnet/error.hpp"
#include "hdnet/oracles.hpp"
#include "temp_dir.hpp"

using namespace hdnet;

TEST(Synth, Deterministic) {
  const CompositeSample a = generate_sample(42, 64, FgBand::Mid);
  const CompositeSample b = generate_sample(42, 64, FgBand::Mid);
  EXPECT_EQ(a.ground_truth.values(), b.ground_truth.values());
  EXPECT_EQ(a.composite.values(), b.composite.values());
  EXPECT_EQ(a.mask.values().values(), b.mask.values().values());
}

TEST(Synth, IdentityPerturbationGivesGroundTruth) {
  const CompositeSample s = generate_sample(7, 64, FgBand::High, PerturbParams::identity());
  EXPECT_EQ(s.composite.values(), s.ground_truth.values());
}

TEST(Synth, CompositeIsComposeOfParts) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const CompositeSample s = generate_sample(seed, 64, static_cast<FgBand>(seed % 3));
    EXPECT_EQ(compose_image(s.ground_truth, s.foreground, s.mask).values(), s.composite.values());
    EXPECT_EQ(apply_perturbation(s.ground_truth, s.perturbation).values(), s.foreground.values());
  }
}

TEST(Synth, BandContracts) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    for (FgBand band : {FgBand::Low, FgBand::Mid, FgBand::High}) {
      const std::size_t size = seed % 2 ? 64 : 96;
      const CompositeSample s = generate_sample(seed, size, band);
      const double ratio = static_cast<double>(s.mask.foreground_count()) / static_cast<double>(size * size);
      EXPECT_TRUE(band_contains(band, ratio)) << band_name(band) << " seed " << seed << " ratio " << ratio;
      if (band == FgBand::Mid) {
        EXPECT_GE(ratio, 0.05);
        EXPECT_LE(ratio, 0.15);
      }
    }
  }
}

TEST(Synth, BottleneckHasBothSides) {
  for (std::uint64_t seed = 0; seed < 90; ++seed) {
    const std::size_t size = 64 + 16 * (seed % 3);
    const CompositeSample s = generate_sample(seed, size, static_cast<FgBand>(seed % 3));
    const Mask small = s.mask.resized(size / 16, size / 16);
    EXPECT_GE(small.foreground_count(), 1u) << "seed " << seed;
    EXPECT_GE(small.background_count(), 1u) << "seed " << seed;
  }
}

TEST(Synth, ThousandSeedsGiveDistinctMasks) {
  std::set<std::vector<double>> masks;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    masks.insert(generate_sample(seed, 32, static_cast<FgBand>(seed % 3)).mask.values().values());
  }
  EXPECT_EQ(masks.size(), 1000u);
}

TEST(Synth, PerturbationRanges) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const PerturbParams p = generate_sample(seed, 32, FgBand::High).perturbation;
    for (int c = 0; c < 3; ++c) {
      EXPECT_GE(p.gain[c], 0.5);
      EXPECT_LE(p.gain[c], 1.5);
      EXPECT_GE(p.offset[c], -0.2);
      EXPECT_LE(p.offset[c], 0.2);
    }
    EXPECT_GE(p.gamma, 0.7);
    EXPECT_LE(p.gamma, 1.4);
  }
}

TEST(Synth, ValuesInUnitRange) {
  const CompositeSample s = generate_sample(3, 64, FgBand::High);
  for (const Tensor* t : {&s.ground_truth, &s.composite, &s.foreground})
    for (double v : t->data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
}

TEST(Synth, InvalidSizesThrow) {
  EXPECT_THROW(generate_sample(0, 16, FgBand::Mid), GenerationError);
  EXPECT_THROW(generate_sample(0, 72, FgBand::Mid), GenerationError);
}

TEST(Png, QuantizationRule) {
  EXPECT_EQ(quantize_unit(0.5), 128);
  EXPECT_EQ(quantize_unit(0.0), 0);
  EXPECT_EQ(quantize_unit(1.0), 255);
  EXPECT_EQ(quantize_unit(-0.3), 0);
  EXPECT_EQ(quantize_unit(1.7), 255);
}

TEST(Png, ConstantHalfStoresByte128) {
  TempDir dir("png");
  const std::string path = dir.file("half.png");
  save_image(path, Tensor({1, 3, 4, 5}, 0.5));
  const Tensor back = load_image(path);
  for (double v : back.data()) EXPECT_EQ(v, 128.0 / 255.0);
}

TEST(Png, GridImagesRoundTripExactly) {
  TempDir dir("png");
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> byte(0, 255);
  Tensor img({1, 3, 7, 9}, 0.0);
  for (double& v : img.data()) v = byte(rng) / 255.0;
  save_image(dir.file("grid.png"), img);
  EXPECT_EQ(load_image(dir.file("grid.png")).values(), img.values());
}

TEST(Png, RandomRoundTripWithinHalfStep) {
  TempDir dir("png");
  std::mt19937_64 rng(2);
  const Tensor img = oracle::random_tensor({1, 3, 16, 12}, rng, 0.0, 1.0);
  save_image(dir.file("r.png"), img);
  const Tensor back = load_image(dir.file("r.png"));
  ASSERT_EQ(back.shape(), img.shape());
  double worst = 0.0;
  for (std::size_t i = 0; i < img.numel(); ++i) worst = std::max(worst, std::abs(img.data()[i] - back.data()[i]));
  EXPECT_LE(worst, 1.0 / 510.0 + 1e-15);
}

TEST(Png, MaskRoundTrip) {
  TempDir dir("png");
  const CompositeSample s = generate_sample(5, 64, FgBand::Mid);
  save_mask(dir.file("m.png"), s.mask);
  EXPECT_EQ(load_mask(dir.file("m.png")).values().values(), s.mask.values().values());
}

TEST(Png, MissingOrMalformedFileNamesPath) {
  TempDir dir("png");
  const std::string missing = dir.file("absent.png");
  try {
    load_image(missing);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(missing), std::string::npos);
  }
  std::ofstream(dir.file("junk.png")) << "not a png";
  EXPECT_THROW(load_image(dir.file("junk.png")), IoError);
}

TEST(MaskBinarize, Threshold) {
  EXPECT_EQ(mask_binarize(Tensor({1, 1, 2, 2}, 0.4)).foreground_count(), 0u);
  EXPECT_EQ(mask_binarize(Tensor({1, 1, 2, 2}, 0.5)).foreground_count(), 4u);
  const Tensor alt({1, 1, 2, 2}, std::vector<double>{0, 1, 1, 0});
  EXPECT_EQ(mask_binarize(alt).values().values(), alt.values());
}

TEST(Manifest, ParseAndRoundTrip) {
  const auto entries = parse_manifest("# header\n1 64 low\n\n  2 96 high  # trailing\n3 64 mid\n");
  ASSERT_EQ(entries.size(), 3u);
  EXPECT_EQ(entries[1].seed, 2u);
  EXPECT_EQ(entries[1].size, 96u);
  EXPECT_EQ(entries[1].band, FgBand::High);

  TempDir dir("manifest");
  write_manifest(dir.file("m.txt"), entries);
  const auto back = read_manifest(dir.file("m.txt"));
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].seed, entries[i].seed);
    EXPECT_EQ(back[i].size, entries[i].size);
    EXPECT_EQ(back[i].band, entries[i].band);
  }
}

TEST(Manifest, ErrorsCarryLineNumber) {
  try {
    parse_manifest("1 64 low\n2 64 purple\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2);
  }
  EXPECT_THROW(parse_manifest("1 64\n"), ConfigError);
  EXPECT_THROW(parse_manifest("x 64 low\n"), ConfigError);
  EXPECT_THROW(read_manifest("/nonexistent/manifest.txt"), IoError);
}

TEST(Manifest, MakeCyclesBands) {
  const auto m = make_manifest(10, 5, 64);
  ASSERT_EQ(m.size(), 5u);
  EXPECT_EQ(m[0].band, FgBand::Low);
  EXPECT_EQ(m[1].band, FgBand::Mid);
  EXPECT_EQ(m[2].band, FgBand::High);
  EXPECT_EQ(m[3].band, FgBand::Low);
  EXPECT_EQ(m[4].seed, 14u);
}
