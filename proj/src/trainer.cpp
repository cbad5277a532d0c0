#include "hdnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "hdnet/error.hpp"
#include "hdnet/ops.hpp"

namespace hdnet {

namespace {

std::string join(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

void write_history(const std::string& path, const std::vector<StepRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  char buf[96];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu %zu %.17g\n", r.epoch, r.step, r.loss);
    out << buf;
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

LossConfig loss_config_for(const ExperimentConfig& config, const Tensor& image) {
  if (config.a_min) return {*config.a_min};
  return LossConfig::for_size(image.dim(2), image.dim(3));
}

}  // namespace

Tensor harmonize(const GeneratorParams& params, const Tensor& composite, const Mask& mask) {
  NoGradGuard no_grad;
  return generator_forward(composite, mask, params).detach();
}

TrainResult train(const std::vector<ManifestEntry>& manifest, const ExperimentConfig& config,
                  const std::string& out_dir) {
  if (manifest.empty()) throw ContractError("train: manifest is empty");
  config.trainer.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create output directory '" + out_dir + "'");
  }

  std::vector<CompositeSample> samples;
  samples.reserve(manifest.size());
  for (const auto& e : manifest) samples.push_back(generate_sample(e.seed, e.size, e.band));

  const TrainerConfig& tc = config.trainer;
  GeneratorConfig model = config.model;
  model.variant = tc.variant;
  model.init_seed = tc.seed;

  TrainResult result;
  result.params = GeneratorParams::initialize(model);
  GeneratorParams& params = result.params;
  AdamState adam = AdamState::for_params(params);
  std::mt19937_64 order_rng(tc.seed ^ 0x5eed0f0d3e5ull);

  std::vector<std::size_t> order(samples.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = lr_at_epoch(tc, epoch);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      params.zero_grads();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const CompositeSample& s = samples[order[i]];
        GeneratorDiagnostics diag;
        Tensor out = generator_forward(s.composite, s.mask, params, &diag);
        Tensor loss = foreground_mse_loss(s.ground_truth, out, s.mask, loss_config_for(config, out));
        if (!std::isfinite(loss.item())) {
          const std::string dump = join(out_dir, "nan_dump.txt");
          std::ofstream d(dump, std::ios::trunc);
          d << "epoch " << epoch << "\nstep " << step << "\nseed " << s.seed << "\nsize "
            << s.ground_truth.dim(2) << "\nband " << band_name(s.band) << "\nloss " << loss.item()
            << "\nlr " << lr << '\n';
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " step " +
                             std::to_string(step) + " (sample seed " + std::to_string(s.seed) +
                             "); see " + dump);
        }
        result.ld_bypasses += diag.ld_bypassed;
        backward(loss);
        batch_loss += loss.item();
      }
      adam_step(params, adam, tc, lr);
      result.history.push_back({epoch, step, batch_loss});
      ++step;
    }
    const std::string stem = join(out_dir, "checkpoint_epoch" + std::to_string(epoch));
    save_checkpoint(stem + ".hdnc", params);
    save_adam_state(stem + ".hdna", adam);
  }
  result.checkpoint = join(out_dir, "checkpoint.hdnc");
  save_checkpoint(result.checkpoint, params);
  save_adam_state(join(out_dir, "checkpoint.hdna"), adam);
  write_history(join(out_dir, "loss_history.txt"), result.history);
  for (auto& [name, t] : params.entries()) t.clear_grad();
  return result;
}

TrainResult train(const ExperimentConfig& config, const std::string& out_dir) {
  if (config.manifest.empty()) throw ConfigError("config does not name a training manifest", 0);
  return train(read_manifest(config.manifest), config, out_dir);
}

EvalReport evaluate(const GeneratorParams& params, const std::vector<ManifestEntry>& manifest) {
  if (manifest.empty()) throw ContractError("evaluate: manifest is empty");
  std::vector<MetricsReport> harmonized, composite;
  std::map<std::string, std::vector<MetricsReport>> h_band, c_band;
  for (const auto& e : manifest) {
    const CompositeSample s = generate_sample(e.seed, e.size, e.band);
    const Tensor out = harmonize(params, s.composite, s.mask);
    const MetricsReport h = measure(out, s.ground_truth, s.mask);
    const MetricsReport c = measure(s.composite, s.ground_truth, s.mask);
    harmonized.push_back(h);
    composite.push_back(c);
    h_band[std::string(band_name(e.band))].push_back(h);
    c_band[std::string(band_name(e.band))].push_back(c);
  }
  EvalReport report;
  report.harmonized = average(harmonized);
  report.composite = average(composite);
  for (const auto& [band, rs] : h_band) report.harmonized_by_band[band] = average(rs);
  for (const auto& [band, rs] : c_band) report.composite_by_band[band] = average(rs);
  return report;
}

EvalReport evaluate(const std::string& checkpoint, const std::string& manifest_path) {
  const GeneratorParams params = load_checkpoint(checkpoint);
  return evaluate(params, read_manifest(manifest_path));
}

std::string format_eval_report(const EvalReport& report) {
  std::string out = format_report(report.harmonized);
  for (const auto& [band, r] : report.harmonized_by_band) out += format_report(r, "band." + band + ".");
  out += format_report(report.composite, "composite.");
  for (const auto& [band, r] : report.composite_by_band)
    out += format_report(r, "composite.band." + band + ".");
  return out;
}

}  // namespace hdnet
