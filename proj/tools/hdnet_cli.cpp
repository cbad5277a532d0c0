// Command-line front end. Talks to the library only through hdnet.h.

#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "hdnet/hdnet.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitSelftest = 3;

int report(hdnet_status status) {
  if (status == HDNET_OK) return kExitOk;
  std::fprintf(stderr, "hdnet: %s\n", hdnet_last_error());
  if (status == HDNET_ERR_CONFIG) return kExitUsage;
  if (status == HDNET_ERR_SELFTEST) return kExitSelftest;
  return kExitFailure;
}

struct ModelDeleter {
  void operator()(hdnet_model* m) const { hdnet_model_free(m); }
};
struct ImageDeleter {
  void operator()(hdnet_image* i) const { hdnet_image_free(i); }
};
struct ReportDeleter {
  void operator()(hdnet_eval_report* r) const { hdnet_eval_report_free(r); }
};
using ModelPtr = std::unique_ptr<hdnet_model, ModelDeleter>;
using ImagePtr = std::unique_ptr<hdnet_image, ImageDeleter>;
using ReportPtr = std::unique_ptr<hdnet_eval_report, ReportDeleter>;

int run_train(const std::string& config, const std::string& out) {
  char checkpoint[4096] = {0};
  const hdnet_status s = hdnet_train(config.c_str(), out.c_str(), checkpoint, sizeof checkpoint);
  if (s == HDNET_OK) std::printf("checkpoint=%s\n", checkpoint);
  return report(s);
}

int run_eval(const std::string& checkpoint, const std::string& manifest, const std::string& out) {
  hdnet_model* raw = nullptr;
  if (hdnet_status s = hdnet_model_load(checkpoint.c_str(), &raw); s != HDNET_OK) return report(s);
  ModelPtr model(raw);
  hdnet_eval_report* rep = nullptr;
  if (hdnet_status s = hdnet_evaluate(model.get(), manifest.c_str(), &rep); s != HDNET_OK) return report(s);
  ReportPtr result(rep);
  std::fputs(hdnet_eval_report_text(result.get()), stdout);
  if (!out.empty()) return report(hdnet_eval_report_write(result.get(), out.c_str()));
  return kExitOk;
}

int run_harmonize(const std::string& checkpoint, const std::string& composite,
                  const std::string& mask, const std::string& out) {
  hdnet_model* m = nullptr;
  if (hdnet_status s = hdnet_model_load(checkpoint.c_str(), &m); s != HDNET_OK) return report(s);
  ModelPtr model(m);
  hdnet_image* c = nullptr;
  if (hdnet_status s = hdnet_image_load_png(composite.c_str(), &c); s != HDNET_OK) return report(s);
  ImagePtr comp(c);
  hdnet_image* k = nullptr;
  if (hdnet_status s = hdnet_mask_load_png(mask.c_str(), &k); s != HDNET_OK) return report(s);
  ImagePtr msk(k);
  hdnet_image* h = nullptr;
  if (hdnet_status s = hdnet_harmonize(model.get(), comp.get(), msk.get(), &h); s != HDNET_OK) return report(s);
  ImagePtr result(h);
  return report(hdnet_image_save_png(result.get(), out.c_str()));
}

void print_suite(const char* suite, int passed, const char* summary, const char* detail, void*) {
  std::printf("%s %s: %s\n", passed ? "PASS" : "FAIL", suite, summary);
  if (!passed) std::printf("%s", detail);
  std::fflush(stdout);
}

int run_selftest(bool quick) {
  std::size_t failures = 0;
  const hdnet_status s = hdnet_selftest(quick ? 1 : 0, print_suite, nullptr, &failures);
  return report(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image harmonization with local and mask-aware global dynamic modules"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hdnet_version()));

  std::string config, out, checkpoint, manifest, report_path, composite, mask;
  bool quick = false;

  auto* train = app.add_subcommand("train", "Train a generator from a config file");
  train->add_option("--config", config, "Config file (key = value)")->required();
  train->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint (.hdnc)")->required();
  eval->add_option("--manifest", manifest, "Manifest of seed size band lines")->required();
  eval->add_option("--report", report_path, "Also write the report here");

  auto* harm = app.add_subcommand("harmonize", "Harmonize one composite image");
  harm->add_option("--checkpoint", checkpoint, "Checkpoint (.hdnc)")->required();
  harm->add_option("--composite", composite, "Composite RGB PNG")->required();
  harm->add_option("--mask", mask, "Foreground mask PNG")->required();
  harm->add_option("--out", out, "Output PNG")->required();

  auto* gen = app.add_subcommand("gen-data", "Write the synthetic samples of a manifest as PNGs");
  gen->add_option("--manifest", manifest, "Manifest of seed size band lines")->required();
  gen->add_option("--out", out, "Output directory")->required();

  auto* self = app.add_subcommand("selftest", "Run the built-in verification suites");
  self->add_flag("--quick", quick, "Fewer seeds and sampled coordinates");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*train) return run_train(config, out);
  if (*eval) return run_eval(checkpoint, manifest, report_path);
  if (*harm) return run_harmonize(checkpoint, composite, mask, out);
  if (*gen) return report(hdnet_generate_dataset(manifest.c_str(), out.c_str()));
  if (*self) return run_selftest(quick);
  return kExitUsage;
}
