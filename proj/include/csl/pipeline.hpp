#pragma once

#include <functional>
#include <string>
#include <vector>

#include "csl/config.hpp"

// Glue shared by the command-line tool and the acceptance run.
namespace csl {

// Every video split into F-frame clips and encoded; one index entry per video.
CorpusIndex build_index(const ParamSet<float>& params, const ModelConfig& model,
                        const std::vector<synth::Video>& videos);

// One report per task, in DSVR, CSVR, ISVR order.
std::vector<EvalReport> evaluate_all(const CorpusIndex& index, const AnnotationSet& annotations, std::size_t k);

// Encoder parameters the similarity stage starts from when no checkpoint is
// given.
ParamSet<float> initial_encoder(const RunConfig& cfg);

struct SimilarityRun {
  ParamSet<float> params;
  std::vector<StepMetrics> metrics;
};

SimilarityRun train_similarity(const RunConfig& cfg, const ParamSet<float>& init, const std::vector<synth::Video>& pool,
                               const std::function<void(const StepMetrics&)>& on_step = {});

struct AblationRow {
  std::string name;
  bool shotmix = false;
  bool fcs = false;
  std::size_t k = 0;  // 0 = plain chamfer
  double map[3] = {0, 0, 0};  // DSVR, CSVR, ISVR
};

// Untrained baseline followed by the four cumulative configurations: no
// ShotMix/FCS with chamfer, +ShotMix, +FCS, +TopK-CS. The last two share one
// training run since TopK-CS only changes matching.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, const ParamSet<float>& init, const synth::Benchmark& bench,
                                      const std::function<void(const std::string&)>& log = {});
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace csl
