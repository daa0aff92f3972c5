#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

#include "CLI11.hpp"

#include "csl/binio.hpp"
#include "csl/checks/loss_checks.hpp"
#include "csl/checks/model_checks.hpp"
#include "csl/checks/oracles.hpp"
#include "csl/config.hpp"
#include "csl/pipeline.hpp"

namespace csl::cli {

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps, batch, k;
  std::optional<std::string> task;
  std::string data, out, store, annotations, checkpoint, query_id, curve;
  std::size_t top = 0;
  bool ablation = false;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  binio::write_file(path, std::vector<char>(text.begin(), text.end()));
}

std::string with_suffix(const std::string& path, const std::string& suffix) { return path + suffix; }

class Runner {
 public:
  Runner(const Flags& f, std::ostream& out, std::ostream& err) : f_(f), out_(out), err_(err) {}

  // Config file, then flags; the resolved result is logged.
  RunConfig resolve(const std::string& command) {
    RunConfig cfg = f_.config.empty() ? RunConfig{} : load_run_config(f_.config);
    if (f_.seed) cfg.seed = *f_.seed;
    if (f_.steps) (command == "pretrain" ? cfg.pretrain.steps : cfg.train.steps) = *f_.steps;
    if (f_.batch) (command == "pretrain" ? cfg.pretrain.batch : cfg.train.batch) = *f_.batch;
    if (f_.k) cfg.eval_k = *f_.k;
    if (f_.task) cfg.eval_task = parse_task(*f_.task);
    cfg.finalize();
    err_ << "resolved config: " << config_to_json(cfg) << "\n";
    return cfg;
  }

  int synth() {
    const RunConfig cfg = resolve("synth");
    const auto bench = synth::generate_benchmark(cfg.synth, cfg.seed);
    synth::write_benchmark(bench, f_.out);
    out_ << "wrote " << bench.corpus.size() << " corpus videos, " << bench.train.size() << " training videos and "
         << bench.queries.size() << " annotated queries to " << f_.out << "\n";
    return kOk;
  }

  int pretrain() {
    const RunConfig cfg = resolve("pretrain");
    std::vector<Frames> videos;
    if (f_.data.empty()) {
      videos = synth::moving_pattern_videos(64, cfg.model.image, cfg.seed);
    } else {
      for (auto& v : synth::read_benchmark(f_.data).train) videos.push_back(std::move(v.frames));
    }
    std::optional<ParamSet<float>> init;
    if (!f_.checkpoint.empty()) init = load_checkpoint(f_.checkpoint);
    const auto res = pretrain_run(videos, cfg.model, cfg.predmae, cfg.pretrain, init ? &*init : nullptr,
                                  [&](std::size_t step, double loss) {
                                    if (step % 20 == 0) err_ << "step " << step << " loss " << loss << "\n";
                                  });
    save_checkpoint(res.params, f_.out);
    const std::string curve = f_.curve.empty() ? with_suffix(f_.out, ".loss.csv") : f_.curve;
    write_text(curve, loss_curve_csv(res.losses));
    if (!res.losses.empty()) {
      out_ << "pretrain loss " << res.losses.front() << " -> " << res.losses.back() << "\n";
    }
    out_ << "checkpoint " << f_.out << ", loss curve " << curve << "\n";
    return kOk;
  }

  ParamSet<float> encoder_params(const RunConfig& cfg) {
    if (f_.checkpoint.empty()) return initial_encoder(cfg);
    return load_checkpoint(f_.checkpoint).subset("enc.");
  }

  int train() {
    const RunConfig cfg = resolve("train");
    const auto bench = synth::read_benchmark(f_.data);
    const auto init = encoder_params(cfg);
    if (f_.ablation) {
      const auto rows = run_ablation(cfg, init, bench, [&](const std::string& m) { err_ << m << "\n"; });
      const std::string table = ablation_table(rows);
      out_ << table;
      if (!f_.out.empty()) write_text(f_.out, table);
      return kOk;
    }
    const auto run = train_similarity(cfg, init, bench.train, [&](const StepMetrics& m) {
      if (m.step % 25 == 0) err_ << "step " << m.step << " ms " << m.ms << " fcs " << m.fcs << " lr " << m.lr << "\n";
    });
    save_checkpoint(run.params, f_.out);
    const std::string metrics = f_.curve.empty() ? with_suffix(f_.out, ".metrics.csv") : f_.curve;
    write_text(metrics, metrics_csv(run.metrics));
    const auto reports = evaluate_all(build_index(run.params, cfg.model, bench.corpus), bench.annotations, cfg.eval_k);
    for (const auto& r : reports) out_ << task_name(r.task) << " mAP " << std::setprecision(6) << r.map << "\n";
    out_ << "checkpoint " << f_.out << ", metrics " << metrics << "\n";
    return kOk;
  }

  int extract() {
    const RunConfig cfg = resolve("extract");
    const auto bench = synth::read_benchmark(f_.data);
    const auto index = build_index(encoder_params(cfg), cfg.model, bench.corpus);
    write_store(index, f_.store);
    out_ << "stored " << index.total_clips() << " clip vectors for " << index.size() << " videos in " << f_.store
         << "\n";
    return kOk;
  }

  int query() {
    const RunConfig cfg = resolve("query");
    const auto index = read_store(f_.store);
    const auto ranked = rank_query(f_.query_id, index, cfg.eval_k);
    const std::size_t n = f_.top == 0 ? ranked.size() : std::min(f_.top, ranked.size());
    out_ << std::setprecision(9);
    for (std::size_t i = 0; i < n; ++i) out_ << i + 1 << '\t' << ranked[i].id << '\t' << ranked[i].score << '\n';
    return kOk;
  }

  int eval() {
    const RunConfig cfg = resolve("eval");
    const auto index = read_store(f_.store);
    const auto annotations = read_annotations(f_.annotations);
    std::vector<EvalReport> reports;
    if (f_.task) {
      reports.push_back(evaluate(index, annotations, cfg.eval_task, cfg.eval_k));
    } else {
      reports = evaluate_all(index, annotations, cfg.eval_k);
    }
    const std::string csv = map_report_csv(reports);
    if (f_.out.empty()) {
      out_ << csv;
    } else {
      write_text(f_.out, csv);
    }
    for (const auto& r : reports) {
      err_ << task_name(r.task) << " mAP " << r.map << " over " << r.per_query.size() << " queries";
      if (r.excluded) err_ << " (" << r.excluded << " without relevant videos skipped)";
      err_ << "\n";
    }
    return kOk;
  }

  int selfcheck() {
    const RunConfig cfg = resolve("selfcheck");
    const std::uint64_t s = cfg.seed;
    std::vector<checks::SuiteResult> results = checks::op_gradient_suite(s, 20, 1e-6);
    results.push_back(checks::ms_loss_gradient_suite(s + 1, 100, 1e-6));
    results.push_back(checks::fcs_loss_gradient_suite(s + 2, 100, 1e-6));
    results.push_back(checks::encoder_gradient_check(s + 3, 20, 1e-3));
    results.push_back(checks::topk_oracle_suite(s + 4, 1000, 1e-6));
    results.push_back(checks::reduction_identity_suite(s + 5, 200));
    results.push_back(checks::store_roundtrip_suite(s + 6, 50));
    results.push_back(checks::checkpoint_roundtrip_suite(s + 7, 20));
    results.push_back(checks::map_oracle_suite(s + 8, 100, 1e-9));
    bool ok = true;
    for (const auto& r : results) {
      out_ << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.trials << " trials, worst " << r.worst << ")\n";
      ok = ok && r.passed;
    }
    return ok ? kOk : kNumeric;
  }

 private:
  const Flags& f_;
  std::ostream& out_;
  std::ostream& err_;
};

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clip-level near-duplicate video retrieval and similarity learning"};
  app.name("csl");
  Flags f;
  app.require_subcommand(1);

  auto common = [&](CLI::App* c) {
    c->add_option("--config", f.config, "Flat-key JSON config file")->check(CLI::ExistingFile);
    c->add_option("--seed", f.seed, "Random seed");
  };
  auto* synth = app.add_subcommand("synth", "Generate the synthetic benchmark");
  common(synth);
  synth->add_option("--out", f.out, "Output directory")->required();

  auto* pretrain = app.add_subcommand("pretrain", "Future-frame prediction pretraining");
  common(pretrain);
  pretrain->add_option("--data", f.data, "Benchmark directory (default: generated moving patterns)");
  pretrain->add_option("--checkpoint", f.checkpoint, "Resume from this checkpoint");
  pretrain->add_option("--steps", f.steps);
  pretrain->add_option("--batch", f.batch);
  pretrain->add_option("--out", f.out, "Checkpoint to write")->required();
  pretrain->add_option("--curve", f.curve, "Loss curve CSV (default: <out>.loss.csv)");

  auto* train = app.add_subcommand("train", "Self-supervised similarity learning");
  common(train);
  train->add_option("--data", f.data, "Benchmark directory")->required();
  train->add_option("--checkpoint", f.checkpoint, "Start from this checkpoint's encoder");
  train->add_option("--steps", f.steps);
  train->add_option("--batch", f.batch);
  train->add_option("--k", f.k, "TopK-CS k used for the final evaluation (0 = chamfer)");
  train->add_option("--out", f.out, "Encoder checkpoint to write (ablation: table file)");
  train->add_option("--curve", f.curve, "Metrics CSV (default: <out>.metrics.csv)");
  train->add_flag("--ablation", f.ablation, "Run the four-configuration ablation and print a table");

  auto* extract = app.add_subcommand("extract", "Encode corpus videos into a feature store");
  common(extract);
  extract->add_option("--data", f.data, "Benchmark directory")->required();
  extract->add_option("--checkpoint", f.checkpoint, "Encoder checkpoint (default: untrained from seed)");
  extract->add_option("--store", f.store, "Feature store to write")->required();

  auto* query = app.add_subcommand("query", "Rank the store against one of its videos");
  common(query);
  query->add_option("id", f.query_id, "Query video id")->required();
  query->add_option("--store", f.store, "Feature store")->required();
  query->add_option("--k", f.k, "TopK-CS k (0 = chamfer)");
  query->add_option("--top", f.top, "Print only the first N results");

  auto* eval = app.add_subcommand("eval", "mAP of a feature store against annotations");
  common(eval);
  eval->add_option("--store", f.store, "Feature store")->required();
  eval->add_option("--annotations", f.annotations, "Annotation JSON")->required();
  eval->add_option("--task", f.task, "dsvr, csvr or isvr (default: all three)");
  eval->add_option("--k", f.k, "TopK-CS k (0 = chamfer)");
  eval->add_option("--out", f.out, "Write the CSV report here instead of standard output");

  auto* selfcheck = app.add_subcommand("selfcheck", "Run the gradient, oracle and roundtrip suites");
  common(selfcheck);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }
  if (train->parsed() && !f.ablation && f.out.empty()) {
    err << "error: train needs --out unless --ablation is given\n";
    return kUsage;
  }

  Runner run(f, out, err);
  try {
    if (synth->parsed()) return run.synth();
    if (pretrain->parsed()) return run.pretrain();
    if (train->parsed()) return run.train();
    if (extract->parsed()) return run.extract();
    if (query->parsed()) return run.query();
    if (eval->parsed()) return run.eval();
    if (selfcheck->parsed()) return run.selfcheck();
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const TrainingError& e) {
    err << "training error: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  err << app.help();
  return kUsage;
}

}  // namespace csl::cli
