#include "hdnet/hdnet.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>

#include "hdnet/data.hpp"
#include "hdnet/error.hpp"
#include "hdnet/selftest.hpp"
#include "hdnet/trainer.hpp"

struct hdnet_model {
  hdnet::GeneratorParams params;
};

struct hdnet_image {
  hdnet::Tensor pixels;  // [1,C,H,W]
  bool is_mask = false;
};

struct hdnet_eval_report {
  hdnet::EvalReport report;
  std::string text;
};

namespace {

thread_local std::string t_error;
thread_local int t_error_line = 0;

hdnet_status from_kind(hdnet::ErrorKind kind) {
  using hdnet::ErrorKind;
  switch (kind) {
    case ErrorKind::Io: return HDNET_ERR_IO;
    case ErrorKind::Config: return HDNET_ERR_CONFIG;
    case ErrorKind::Dimension: return HDNET_ERR_DIMENSION;
    case ErrorKind::Contract: return HDNET_ERR_CONTRACT;
    case ErrorKind::DegenerateMask: return HDNET_ERR_CONTRACT;
    case ErrorKind::Version: return HDNET_ERR_VERSION;
    case ErrorKind::Numeric: return HDNET_ERR_NUMERIC;
    case ErrorKind::Generation: return HDNET_ERR_GENERATION;
  }
  return HDNET_ERR_INTERNAL;
}

hdnet_status fail(hdnet_status status, std::string message, int line = 0) {
  t_error = std::move(message);
  t_error_line = line;
  return status;
}

template <typename F>
hdnet_status guarded(F&& body) {
  t_error.clear();
  t_error_line = 0;
  try {
    body();
    return HDNET_OK;
  } catch (const hdnet::ConfigError& e) {
    return fail(HDNET_ERR_CONFIG, e.what(), e.line());
  } catch (const hdnet::Error& e) {
    return fail(from_kind(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(HDNET_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(HDNET_ERR_INTERNAL, e.what());
  }
}

#define HDNET_REQUIRE(cond, what)                                          \
  do {                                                                     \
    if (!(cond)) return fail(HDNET_ERR_INVALID_ARGUMENT, what);            \
  } while (0)

void copy_out(const std::string& s, char* buf, std::size_t len) {
  if (!buf || len == 0) return;
  const std::size_t n = std::min(len - 1, s.size());
  std::memcpy(buf, s.data(), n);
  buf[n] = '\0';
}

void write_metrics(const hdnet::MetricsReport& r, hdnet_metrics* out) {
  out->mse = r.mse;
  out->fmse = r.fmse;
  out->psnr = r.psnr;
  out->ssim = r.ssim;
  out->n_images = r.n_images;
}

}  // namespace

extern "C" {

const char* hdnet_last_error(void) { return t_error.c_str(); }

int hdnet_last_error_line(void) { return t_error_line; }

const char* hdnet_version(void) { return "1.0.0"; }

hdnet_status hdnet_train(const char* config_path, const char* out_dir, char* checkpoint_path,
                         size_t len) {
  HDNET_REQUIRE(config_path && out_dir, "hdnet_train: config path and output directory are required");
  return guarded([&] {
    const hdnet::ExperimentConfig cfg = hdnet::load_config(config_path);
    const hdnet::TrainResult result = hdnet::train(cfg, out_dir);
    copy_out(result.checkpoint, checkpoint_path, len);
  });
}

hdnet_status hdnet_model_load(const char* checkpoint_path, hdnet_model** out) {
  HDNET_REQUIRE(checkpoint_path && out, "hdnet_model_load: null argument");
  *out = nullptr;
  return guarded([&] { *out = new hdnet_model{hdnet::load_checkpoint(checkpoint_path)}; });
}

void hdnet_model_free(hdnet_model* model) { delete model; }

size_t hdnet_model_parameter_count(const hdnet_model* model) {
  return model ? hdnet::count_parameters(model->params) : 0;
}

hdnet_status hdnet_image_load_png(const char* path, hdnet_image** out) {
  HDNET_REQUIRE(path && out, "hdnet_image_load_png: null argument");
  *out = nullptr;
  return guarded([&] { *out = new hdnet_image{hdnet::load_image(path), false}; });
}

hdnet_status hdnet_mask_load_png(const char* path, hdnet_image** out) {
  HDNET_REQUIRE(path && out, "hdnet_mask_load_png: null argument");
  *out = nullptr;
  return guarded([&] { *out = new hdnet_image{hdnet::load_mask(path).values(), true}; });
}

hdnet_status hdnet_image_save_png(const hdnet_image* image, const char* path) {
  HDNET_REQUIRE(image && path, "hdnet_image_save_png: null argument");
  return guarded([&] {
    if (image->is_mask) hdnet::save_mask(path, hdnet::Mask(image->pixels));
    else hdnet::save_image(path, image->pixels);
  });
}

void hdnet_image_dims(const hdnet_image* image, size_t* channels, size_t* height, size_t* width) {
  const bool ok = image != nullptr;
  if (channels) *channels = ok ? image->pixels.dim(1) : 0;
  if (height) *height = ok ? image->pixels.dim(2) : 0;
  if (width) *width = ok ? image->pixels.dim(3) : 0;
}

void hdnet_image_free(hdnet_image* image) { delete image; }

hdnet_status hdnet_harmonize(const hdnet_model* model, const hdnet_image* composite,
                             const hdnet_image* mask, hdnet_image** out) {
  HDNET_REQUIRE(model && composite && mask && out, "hdnet_harmonize: null argument");
  HDNET_REQUIRE(!composite->is_mask && mask->is_mask,
                "hdnet_harmonize: expected an RGB composite and a mask");
  *out = nullptr;
  return guarded([&] {
    if (composite->pixels.dim(2) != mask->pixels.dim(2) ||
        composite->pixels.dim(3) != mask->pixels.dim(3)) {
      throw hdnet::DimensionError("composite is " + hdnet::shape_string(composite->pixels.shape()) +
                                  " but mask is " + hdnet::shape_string(mask->pixels.shape()));
    }
    *out = new hdnet_image{
        hdnet::harmonize(model->params, composite->pixels, hdnet::Mask(mask->pixels)), false};
  });
}

hdnet_status hdnet_evaluate(const hdnet_model* model, const char* manifest_path,
                            hdnet_eval_report** out) {
  HDNET_REQUIRE(model && manifest_path && out, "hdnet_evaluate: null argument");
  *out = nullptr;
  return guarded([&] {
    auto* r = new hdnet_eval_report{hdnet::evaluate(model->params, hdnet::read_manifest(manifest_path)), {}};
    r->text = hdnet::format_eval_report(r->report);
    *out = r;
  });
}

void hdnet_eval_report_harmonized(const hdnet_eval_report* report, hdnet_metrics* out) {
  if (report && out) write_metrics(report->report.harmonized, out);
}

void hdnet_eval_report_composite(const hdnet_eval_report* report, hdnet_metrics* out) {
  if (report && out) write_metrics(report->report.composite, out);
}

const char* hdnet_eval_report_text(const hdnet_eval_report* report) {
  return report ? report->text.c_str() : "";
}

hdnet_status hdnet_eval_report_write(const hdnet_eval_report* report, const char* path) {
  HDNET_REQUIRE(report && path, "hdnet_eval_report_write: null argument");
  return guarded([&] {
    std::ofstream file(path, std::ios::trunc);
    if (!file) throw hdnet::IoError("cannot write report '" + std::string(path) + "'");
    file << report->text;
    if (!file) throw hdnet::IoError("failed writing report '" + std::string(path) + "'");
  });
}

void hdnet_eval_report_free(hdnet_eval_report* report) { delete report; }

hdnet_status hdnet_generate_dataset(const char* manifest_path, const char* out_dir) {
  HDNET_REQUIRE(manifest_path && out_dir, "hdnet_generate_dataset: null argument");
  return guarded([&] {
    const auto entries = hdnet::read_manifest(manifest_path);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
      throw hdnet::IoError("cannot create output directory '" + std::string(out_dir) + "'");
    }
    for (const auto& e : entries) {
      const hdnet::CompositeSample s = hdnet::generate_sample(e.seed, e.size, e.band);
      const std::string stem = (std::filesystem::path(out_dir) /
                                (std::to_string(e.seed) + "_" + std::to_string(e.size) + "_" +
                                 std::string(hdnet::band_name(e.band))))
                                   .string();
      hdnet::save_image(stem + "_real.png", s.ground_truth);
      hdnet::save_image(stem + "_composite.png", s.composite);
      hdnet::save_mask(stem + "_mask.png", s.mask);
    }
  });
}

hdnet_status hdnet_selftest(int quick, hdnet_selftest_sink sink, void* user, size_t* failures) {
  std::size_t failed = 0;
  const hdnet_status status = guarded([&] {
    hdnet::run_selftest(quick != 0, [&](const hdnet::SuiteResult& r) {
      if (!r.passed) ++failed;
      if (!sink) return;
      std::string detail;
      for (const auto& f : r.failures) detail += f + "\n";
      sink(r.name.c_str(), r.passed ? 1 : 0, r.summary.c_str(), detail.c_str(), user);
    });
  });
  if (failures) *failures = failed;
  if (status != HDNET_OK) return status;
  if (failed > 0) return fail(HDNET_ERR_SELFTEST, std::to_string(failed) + " selftest suite(s) failed");
  return HDNET_OK;
}

}  // extern "C"
