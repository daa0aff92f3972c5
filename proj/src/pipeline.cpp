#include "csl/pipeline.hpp"

#include <cstdio>

namespace csl {

CorpusIndex build_index(const ParamSet<float>& params, const ModelConfig& model,
                        const std::vector<synth::Video>& videos) {
  CorpusIndex index;
  for (const auto& v : videos) index.add(v.id, encode_clips(params, model, split_clips(v.frames, model.frames)));
  return index;
}

std::vector<EvalReport> evaluate_all(const CorpusIndex& index, const AnnotationSet& annotations, std::size_t k) {
  std::vector<EvalReport> out;
  for (Task t : {Task::DSVR, Task::CSVR, Task::ISVR}) out.push_back(evaluate(index, annotations, t, k));
  return out;
}

ParamSet<float> initial_encoder(const RunConfig& cfg) {
  Rng rng = Rng(cfg.seed).split(1);
  return init_encoder(cfg.model, rng);
}

SimilarityRun train_similarity(const RunConfig& cfg, const ParamSet<float>& init, const std::vector<synth::Video>& pool,
                               const std::function<void(const StepMetrics&)>& on_step) {
  std::vector<Frames> frames;
  frames.reserve(pool.size());
  for (const auto& v : pool) frames.push_back(v.frames);
  SimTrainer trainer(cfg.model, cfg.loss, cfg.train, init);
  auto metrics = trainer.run(frames, on_step);
  return {trainer.params(), std::move(metrics)};
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const ParamSet<float>& init, const synth::Benchmark& bench,
                                      const std::function<void(const std::string&)>& log) {
  auto fill = [&](AblationRow row, const ParamSet<float>& params) {
    const auto reports = evaluate_all(build_index(params, cfg.model, bench.corpus), bench.annotations, row.k);
    for (std::size_t t = 0; t < 3; ++t) row.map[t] = reports[t].map;
    if (log) log(row.name + " done");
    return row;
  };
  std::vector<AblationRow> rows;
  rows.push_back(fill({"untrained", false, false, 0}, init));
  const std::size_t topk = cfg.eval_k == 0 ? kDefaultTopK : cfg.eval_k;
  SimilarityRun run;
  for (int variant = 0; variant < 3; ++variant) {
    RunConfig c = cfg;
    c.train.use_shotmix = variant >= 1;
    c.train.use_fcs = variant >= 2;
    if (log) log("training variant " + std::to_string(variant + 1));
    run = train_similarity(c, init, bench.train);
    static const char* names[] = {"baseline", "+shotmix", "+fcs"};
    rows.push_back(fill({names[variant], c.train.use_shotmix, c.train.use_fcs, 0}, run.params));
  }
  rows.push_back(fill({"+topk", true, true, topk}, run.params));
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = "config      shotmix fcs  k  dsvr    csvr    isvr\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-11s %-7s %-4s %-2zu %.4f  %.4f  %.4f\n", r.name.c_str(), r.shotmix ? "yes" : "no",
                  r.fcs ? "yes" : "no", r.k, r.map[0], r.map[1], r.map[2]);
    out += line;
  }
  return out;
}

}  // namespace csl
