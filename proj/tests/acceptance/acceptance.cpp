// Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hdnet/data.hpp"
#include "hdnet/oracles.hpp"
#include "hdnet/selftest.hpp"
#include "hdnet/trainer.hpp"
#include "../temp_dir.hpp"

using namespace hdnet;

namespace {

constexpr std::size_t kAblationWidth = 8;
constexpr std::size_t kAblationEpochs = 12;
constexpr std::size_t kImageSize = 64;
const std::vector<std::uint64_t> kTrainSeeds{0, 1, 2};

struct Outcome {
  bool passed = false;
  std::string detail;
};

int g_failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int id, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.passed) ++g_failures;
  std::printf("%s %d %s: %s (%.1fs)\n", o.passed ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

Outcome suite(std::string_view name, double budget_s) {
  const SuiteResult r = run_suite(name, false);
  std::string detail = r.summary;
  for (const auto& f : r.failures) detail += "; " + f;
  if (r.seconds >= budget_s) {
    detail += "; over the " + std::to_string(static_cast<int>(budget_s)) + "s budget";
    return {false, detail};
  }
  return {r.passed, detail};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

ExperimentConfig desk_config(Variant v, std::uint64_t seed, std::size_t k) {
  ExperimentConfig cfg;
  cfg.trainer.epochs = kAblationEpochs;
  cfg.trainer.decay_epochs = {kAblationEpochs * 2 / 3, kAblationEpochs * 5 / 6};
  cfg.trainer.seed = seed;
  cfg.trainer.variant = v;
  cfg.model.variant = v;
  cfg.model.base_channels = kAblationWidth;
  cfg.model.k_neighbors = k;
  cfg.model.init_seed = seed;
  return cfg;
}

struct DeskRun {
  EvalReport report;
  bool finite = true;
  std::string checkpoint;
};

// Geometry shared by the ablation and the K sweep: 128 training and 32
// held-out samples, disjoint seeds.
const std::vector<ManifestEntry>& train_set() {
  static const auto m = make_manifest(1000, 128, kImageSize);
  return m;
}
const std::vector<ManifestEntry>& eval_set() {
  static const auto m = make_manifest(5000, 32, kImageSize);
  return m;
}

DeskRun desk_run(const TempDir& dir, Variant v, std::uint64_t seed, std::size_t k) {
  const std::string out = dir.file(std::string(variant_name(v)) + "_s" + std::to_string(seed) + "_k" +
                                   std::to_string(k));
  const TrainResult r = train(train_set(), desk_config(v, seed, k), out);
  DeskRun run;
  for (const auto& s : r.history) run.finite = run.finite && std::isfinite(s.loss);
  run.report = evaluate(r.params, eval_set());
  run.checkpoint = r.checkpoint;
  return run;
}

}  // namespace

int main() {
  report(1, "gradient suite", [] { return suite("gradients", 120.0); });
  report(2, "knn oracle", [] { return suite("knn_oracle", 10.0); });
  report(3, "mgd identities", [] { return suite("mgd_identities", 60.0); });
  report(4, "ld contracts", [] { return suite("ld_contracts", 60.0); });
  report(5, "loss and composition", [] { return suite("loss_composition", 60.0); });

  report(6, "overfit one sample", [] {
    const auto t0 = std::chrono::steady_clock::now();
    GeneratorConfig gc;
    gc.variant = Variant::Full;
    GeneratorParams params = GeneratorParams::initialize(gc);
    AdamState state = AdamState::for_params(params);
    const CompositeSample s = generate_sample(11, kImageSize, FgBand::High);
    const LossConfig lc = LossConfig::for_size(kImageSize, kImageSize);
    TrainerConfig tc;
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 50; ++step) {
      params.zero_grads();
      const Tensor loss = foreground_mse_loss(s.ground_truth, generator_forward(s.composite, s.mask, params),
                                              s.mask, lc);
      if (step == 0) first = loss.item();
      last = loss.item();
      backward(loss);
      adam_step(params, state, tc, 1e-3);
    }
    const Tensor out = harmonize(params, s.composite, s.mask);
    const double ratio = last / first;
    const bool metrics_better = mse(s.ground_truth, s.composite) > mse(s.ground_truth, out) &&
                                psnr(s.ground_truth, s.composite) < psnr(s.ground_truth, out);
    const double secs = seconds_since(t0);
    return Outcome{ratio < 0.1 && metrics_better && secs < 300.0,
                   "loss " + fmt(first) + " -> " + fmt(last) + " (ratio " + fmt(ratio) + "), composite psnr " +
                       fmt(psnr(s.ground_truth, s.composite)) + " vs output " + fmt(psnr(s.ground_truth, out))};
  });

  TempDir desk("acceptance");
  std::map<Variant, std::vector<DeskRun>> ablation;
  report(7, "desk ablation", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<Variant> variants{Variant::Base, Variant::LdOnly, Variant::MgdOnly, Variant::Full};
    std::map<Variant, double> mean;
    bool finite = true;
    for (std::uint64_t seed : kTrainSeeds)
      for (Variant v : variants) {
        ablation[v].push_back(desk_run(desk, v, seed, 1));
        finite = finite && ablation[v].back().finite;
        mean[v] += ablation[v].back().report.harmonized.fmse / static_cast<double>(kTrainSeeds.size());
      }
    const double secs = seconds_since(t0);
    std::string detail = "mean eval fMSE";
    for (Variant v : variants) detail += " " + std::string(variant_name(v)) + " " + fmt(mean[v]);
    detail += "; composite " + fmt(ablation[Variant::Base][0].report.composite.fmse);
    const bool order = mean[Variant::Full] <= mean[Variant::Base] && mean[Variant::LdOnly] <= mean[Variant::Base] &&
                       mean[Variant::MgdOnly] <= mean[Variant::Base];
    // The first full checkpoint must also beat the raw composite once reloaded from disk.
    const std::string manifest = desk.file("heldout.txt");
    write_manifest(manifest, eval_set());
    const EvalReport r = evaluate(ablation[Variant::Full][0].checkpoint, manifest);
    const bool beats = r.harmonized.mse < r.composite.mse && r.harmonized.psnr > r.composite.psnr;
    detail += "; reloaded full checkpoint psnr " + fmt(r.harmonized.psnr) + " vs composite " + fmt(r.composite.psnr) +
              ", mse " + fmt(r.harmonized.mse) + " vs " + fmt(r.composite.mse);
    if (!finite) detail += "; non-finite loss";
    if (secs >= 1800.0) detail += "; over the 1800s budget";
    return Outcome{order && beats && finite && secs < 1800.0, detail};
  });

  report(8, "k sweep (report only)", [&] {
    std::string detail;
    for (std::size_t k : {1u, 3u, 5u}) {
      const DeskRun run = k == 1 && !ablation[Variant::Full].empty() ? ablation[Variant::Full][0]
                                                                     : desk_run(desk, Variant::Full, kTrainSeeds[0], k);
      detail += "K=" + std::to_string(k) + " psnr " + fmt(run.report.harmonized.psnr) + " mse " +
                fmt(run.report.harmonized.mse) + "; ";
    }
    detail.resize(detail.size() - 2);
    return Outcome{true, detail};
  });

  report(9, "lite ratio", [] {
    GeneratorConfig full, lite;
    lite.variant = Variant::FullLite;
    const double ratio = static_cast<double>(count_parameters(GeneratorParams::initialize(lite))) /
                         static_cast<double>(count_parameters(GeneratorParams::initialize(full)));
    return Outcome{ratio < 0.25, "lite/full parameters " + fmt(ratio)};
  });

  report(10, "metric oracles", [] { return suite("metric_oracles", 60.0); });

  report(11, "determinism and round trips", [&] {
    TempDir a("det"), b("det");
    ExperimentConfig cfg = desk_config(Variant::Full, 4, 1);
    cfg.trainer.epochs = 3;
    cfg.trainer.decay_epochs = {1, 2};
    const auto manifest = make_manifest(200, 6, 32);
    const TrainResult ra = train(manifest, cfg, a.path().string());
    train(manifest, cfg, b.path().string());
    const bool same_history = slurp(a.file("loss_history.txt")) == slurp(b.file("loss_history.txt"));
    const bool same_ckpt = slurp(a.file("checkpoint.hdnc")) == slurp(b.file("checkpoint.hdnc"));

    const GeneratorParams back = load_checkpoint(ra.checkpoint);
    bool exact = back.entries().size() == ra.params.entries().size();
    for (std::size_t i = 0; exact && i < back.entries().size(); ++i)
      exact = back.entries()[i].first == ra.params.entries()[i].first &&
              back.entries()[i].second.values() == ra.params.entries()[i].second.values();

    std::mt19937_64 rng(17);
    const Tensor img = oracle::random_tensor({1, 3, 48, 40}, rng, 0.0, 1.0);
    save_image(a.file("rt.png"), img);
    const Tensor loaded = load_image(a.file("rt.png"));
    double worst = 0.0;
    for (std::size_t i = 0; i < img.numel(); ++i) worst = std::max(worst, std::abs(img.data()[i] - loaded.data()[i]));

    const bool ok = same_history && same_ckpt && exact && worst <= 1.0 / 510.0;
    return Outcome{ok, std::string("train history ") + (same_history ? "identical" : "differs") + ", checkpoint " +
                           (same_ckpt ? "identical" : "differs") + ", load " + (exact ? "bit-exact" : "inexact") +
                           ", png max error " + std::to_string(worst)};
  });

  return g_failures == 0 ? 0 : 1;
}
