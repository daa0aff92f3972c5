#pragma once

#include <filesystem>
#include <string>

#include "csl/predmae.hpp"
#include "csl/retrieval.hpp"
#include "csl/simlearn.hpp"
#include "csl/synth.hpp"

namespace csl {

// Every tunable of a run, addressed by flat dotted keys ("loss.alpha").
struct RunConfig {
  std::uint64_t seed = 42;
  ModelConfig model = ModelConfig::toy();
  PredMaeConfig predmae;
  PretrainOptions pretrain;
  LossConfig loss;
  TrainConfig train;
  std::size_t eval_k = kDefaultTopK;
  Task eval_task = Task::DSVR;
  synth::BenchmarkConfig synth;

  // Copies `seed` into the pretraining and training options and validates
  // every section. Throws ConfigError.
  void finalize();
};

// Applies a JSON object of flat keys on top of `cfg`. "model.variant" is
// applied first so that explicit model.* keys override the preset. Unknown
// keys and mistyped values throw ConfigError; malformed JSON throws
// FormatError.
void apply_config_json(RunConfig& cfg, const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

// Flat JSON object with every key, pretty-printed.
std::string config_to_json(const RunConfig& cfg);

}  // namespace csl
