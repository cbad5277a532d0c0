#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hdnet/data.hpp"
#include "hdnet/harmonization.hpp"
#include "hdnet/metrics.hpp"

namespace hdnet {

struct TrainerConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 30;
  std::array<std::size_t, 2> decay_epochs{25, 28};
  double decay_factor = 0.1;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  Variant variant = Variant::Full;

  // Throws ContractError when an invariant does not hold.
  void validate() const;
};

// 0.001 base, x0.1 from epoch 100, x0.01 from epoch 110, over 120 epochs.
TrainerConfig full_scale_schedule();

// Piecewise constant: base, then decay once at decay_epochs[0], twice at decay_epochs[1].
double lr_at_epoch(const TrainerConfig& cfg, std::size_t epoch);

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, std::vector<double>>> first_moment;
  std::vector<std::pair<std::string, std::vector<double>>> second_moment;

  static AdamState for_params(const GeneratorParams& params);
};

// Bias-corrected Adam update, then gradients are zeroed. Throws ContractError
// naming the first parameter without a gradient.
void adam_step(GeneratorParams& params, AdamState& state, const TrainerConfig& cfg, double lr_now);

// Checkpoint: "HDNC", u32 version 1, u32 count, then per tensor u32 name
// length, name, u32 rank, u64 dims, little-endian float64 data.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;
constexpr std::uint32_t kCheckpointVersion = 1;
void write_tensor_file(const std::string& path, const char magic[4], const NamedTensors& tensors);
NamedTensors read_tensor_file(const std::string& path, const char magic[4]);

void save_checkpoint(const std::string& path, const GeneratorParams& params);
// Architecture is inferred from names and shapes; k_neighbors comes from the
// `<path>.meta` sidecar when present.
GeneratorParams load_checkpoint(const std::string& path);
void save_adam_state(const std::string& path, const AdamState& state);
AdamState load_adam_state(const std::string& path);

struct ExperimentConfig {
  TrainerConfig trainer;
  GeneratorConfig model;
  std::optional<double> a_min;  // pixels at image resolution; default scales with size
  std::string manifest;         // training manifest path
  std::string eval_manifest;    // optional
};

// `key = value` lines, `#` comments. Relative paths resolve against the file's
// directory. Unknown keys and malformed values throw ConfigError with the line.
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
};

struct TrainResult {
  std::string checkpoint;
  std::vector<StepRecord> history;
  std::size_t ld_bypasses = 0;
  GeneratorParams params;
};

// Per batch: forward, loss, backward accumulated over batch_size samples,
// then one Adam step. Writes checkpoint_epoch<N>.hdnc (+ .hdna) each epoch,
// checkpoint.hdnc at the end and loss_history.txt. A non-finite loss throws
// NumericError and leaves nan_dump.txt in out_dir.
TrainResult train(const std::vector<ManifestEntry>& manifest, const ExperimentConfig& config,
                  const std::string& out_dir);
TrainResult train(const ExperimentConfig& config, const std::string& out_dir);

struct EvalReport {
  MetricsReport harmonized;
  MetricsReport composite;
  std::map<std::string, MetricsReport> harmonized_by_band;
  std::map<std::string, MetricsReport> composite_by_band;
};

EvalReport evaluate(const GeneratorParams& params, const std::vector<ManifestEntry>& manifest);
EvalReport evaluate(const std::string& checkpoint, const std::string& manifest_path);
std::string format_eval_report(const EvalReport& report);

// Runs the generator without recording a tape.
Tensor harmonize(const GeneratorParams& params, const Tensor& composite, const Mask& mask);

}  // namespace hdnet
