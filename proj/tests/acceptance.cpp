// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "csl/binio.hpp"
#include "csl/checks/loss_checks.hpp"
#include "csl/checks/model_checks.hpp"
#include "csl/checks/oracles.hpp"
#include "csl/pipeline.hpp"

using namespace csl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

void guarded(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    verdict(id, false, std::string("threw: ") + e.what());
  }
}

RunConfig toy_config() {
  RunConfig cfg = load_run_config(fs::path(CSL_SOURCE_DIR) / "configs" / "toy.json");
  cfg.finalize();
  return cfg;
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  return cli::dispatch(args, out, err);
}

void criterion_1() {
  const auto t0 = Clock::now();
  const auto r = checks::topk_oracle_suite(101, 1000, 1e-6);
  const double secs = seconds_since(t0);
  verdict(1, r.passed && secs < 10.0,
          fmt("TopK-CS vs brute force on 1000 instances, worst |diff| %.3g (<= 1e-6), %.2f s (< 10 s)", r.worst, secs));
}

void criterion_2() {
  const auto r = checks::reduction_identity_suite(102, 200);
  verdict(2, r.passed, fmt("topk_cs(k >= n) == chamfer bitwise on 200 instances, mismatches %.0f", r.worst));
}

void criterion_3() {
  const auto ms = checks::ms_loss_gradient_suite(103, 100, 1e-6);
  const auto fcs = checks::fcs_loss_gradient_suite(104, 100, 1e-6);
  verdict(3, ms.passed && fcs.passed,
          fmt("loss gradients vs central differences (h=1e-5), 100 configs each: ms worst %.3g, fcs worst %.3g "
              "(<= 1e-6)",
              ms.worst, fcs.worst));
}

void criterion_4() {
  const auto t0 = Clock::now();
  const auto r = checks::encoder_gradient_check(105, 20, 1e-3, ModelConfig::toy());
  const double secs = seconds_since(t0);
  verdict(4, r.passed && secs < 120.0,
          fmt("toy encoder (2 blocks, d_model 32) at 20 parameters, worst rel err %.3g (<= 1e-3), %.2f s (< 120 s)",
              r.worst, secs));
}

void criterion_5(const RunConfig& toy) {
  const auto t0 = Clock::now();
  // Four tubes at patch 8 leave nothing visible at ratio 0.9, so the smoke run
  // uses 4-pixel patches (16 tubes, 2 visible).
  ModelConfig model = toy.model;
  model.patch = 4;
  const PredMaeConfig pcfg = toy.predmae;
  PretrainOptions opts = toy.pretrain;
  opts.seed = 42;
  opts.steps = 200;
  const auto videos = synth::moving_pattern_videos(64, model.image, 42);
  Rng eval_rng(4242);
  std::vector<PredPair> pairs;
  std::vector<TubeMask> masks;
  for (std::size_t i = 0; i < 16; ++i) {
    pairs.push_back(sample_pred_pair(videos[i], model.frames, eval_rng));
    masks.push_back(tube_mask(model.spatial(), pcfg.mask_ratio, eval_rng.next_u64()));
  }
  Rng init_rng = Rng(opts.seed).split(1);
  const double before = predmae_eval(init_predmae(model, pcfg, init_rng), model, pcfg, pairs, masks);
  const auto res = pretrain_run(videos, model, pcfg, opts);
  const double after = predmae_eval(res.params, model, pcfg, pairs, masks);
  const double secs = seconds_since(t0);
  const double ratio = after / before;
  verdict(5, ratio <= 0.5 && secs < 300.0,
          fmt("PredMAE 200 steps seed 42: held-out MSE %.4f -> %.4f, ratio %.3f (<= 0.5), %.0f s (< 300 s)", before,
              after, ratio, secs) +
              fmt("; training loss %.4f -> %.4f", res.losses.front(), res.losses.back()));
}

void criterion_6(const RunConfig& toy) {
  const auto t0 = Clock::now();
  const auto bench = synth::generate_benchmark(toy.synth, toy.seed);
  const auto init = initial_encoder(toy);
  const auto before = evaluate_all(build_index(init, toy.model, bench.corpus), bench.annotations, toy.eval_k);
  const auto run = train_similarity(toy, init, bench.train);
  const CorpusIndex index = build_index(run.params, toy.model, bench.corpus);
  const auto after = evaluate_all(index, bench.annotations, toy.eval_k);
  const double secs = seconds_since(t0);
  const double gain = after[0].map - before[0].map;
  std::printf("  untrained mAP dsvr %.4f csvr %.4f isvr %.4f\n", before[0].map, before[1].map, before[2].map);
  std::printf("  trained   mAP dsvr %.4f csvr %.4f isvr %.4f\n", after[0].map, after[1].map, after[2].map);
  std::printf("  ordering dsvr >= csvr: %s, csvr >= isvr: %s\n", after[0].map >= after[1].map ? "yes" : "no",
              after[1].map >= after[2].map ? "yes" : "no");
  // Reported only: ND variants above IS variants for each query.
  std::size_t pairs = 0, ordered = 0;
  for (const auto& q : bench.queries) {
    const auto ranked = rank_query(q, index, toy.eval_k);
    std::map<std::string, double> score;
    for (const auto& r : ranked) score[r.id] = r.score;
    for (const auto& [a, la] : bench.annotations.queries.at(q)) {
      for (const auto& [b, lb] : bench.annotations.queries.at(q)) {
        if (la == Label::ND && lb == Label::IS) {
          ++pairs;
          ordered += score[a] >= score[b];
        }
      }
    }
  }
  std::printf("  ND scored >= IS for %zu of %zu (query, ND, IS) triples\n", ordered, pairs);
  verdict(6, gain >= 0.10 && secs < 900.0,
          fmt("similarity learning 300 steps seed 42: DSVR mAP %.4f -> %.4f, gain %.4f (>= 0.10), %.0f s (< 900 s)",
              before[0].map, after[0].map, gain, secs));
}

void criterion_7() {
  Rng rng(107);
  std::size_t frames = 0, clips = 0;
  bool each_ok = true;
  for (std::size_t t = 56; t <= 400; t += 3) {
    Frames video({t, 2, 2, 3});
    const auto parts = split_clips(video);
    const double factor = static_cast<double>(t) / static_cast<double>(parts.size());
    each_ok = each_ok && factor >= 7.0 && factor <= 8.0;
    frames += t;
    clips += parts.size();
  }
  const double overall = static_cast<double>(frames) / static_cast<double>(clips);
  // Dot products per pair: clip-level n*m against frame-level (8n)*(8m).
  bool dots_ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(12), m = 1 + rng.below(12), d = 16;
    DotCounter clip, frame;
    topk_cs(checks::random_unit_rows(n, d, rng), checks::random_unit_rows(m, d, rng), 3, &clip);
    topk_cs(checks::random_unit_rows(8 * n, d, rng), checks::random_unit_rows(8 * m, d, rng), 3, &frame);
    dots_ok = dots_ok && clip.dots == n * m && frame.dots == 64 * n * m;
  }
  verdict(7, each_ok && dots_ok,
          fmt("stored-vector reduction in [7, 8] for every length 56..400 (overall %.3f); dot products n*m vs 64*n*m "
              "on 50 pairs: ",
              overall) +
              (dots_ok ? "ok" : "mismatch"));
}

void criterion_8(const RunConfig& toy) {
  const auto store = checks::store_roundtrip_suite(108, 50);
  const auto ckpt = checks::checkpoint_roundtrip_suite(109, 20);
  const fs::path dir = fs::temp_directory_path() / "csl_acceptance_c8";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg_path = (dir / "c.json").string();
  const std::string cfg_text = R"({"synth.videos": 21, "synth.queries": 3, "synth.train_videos": 2})";
  binio::write_file(cfg_path, std::vector<char>(cfg_text.begin(), cfg_text.end()));
  const std::string data = (dir / "data").string();
  bool cli_ok = cli({"synth", "--config", cfg_path, "--out", data}) == 0;
  cli_ok = cli_ok && cli({"extract", "--data", data, "--store", (dir / "s.csf").string()}) == 0;
  // Truncated and bit-flipped store.
  auto bytes = binio::read_file(dir / "s.csf");
  auto truncated = bytes;
  truncated.resize(truncated.size() - 5);
  binio::write_file(dir / "t.csf", truncated);
  auto flipped = bytes;
  flipped[0] ^= 0x01;
  binio::write_file(dir / "f.csf", flipped);
  const std::string ann = data + "/annotations.json";
  const std::string report = (dir / "report.csv").string();
  const int e1 = cli({"eval", "--store", (dir / "t.csf").string(), "--annotations", ann, "--out", report});
  const int e2 = cli({"eval", "--store", (dir / "f.csf").string(), "--annotations", ann, "--out", report});
  // Corrupt checkpoint.
  save_checkpoint(initial_encoder(toy), dir / "p.ckpt");
  auto ck = binio::read_file(dir / "p.ckpt");
  ck.resize(ck.size() / 3);
  binio::write_file(dir / "bad.ckpt", ck);
  const std::string out_store = (dir / "never.csf").string();
  const int e3 = cli({"extract", "--data", data, "--checkpoint", (dir / "bad.ckpt").string(), "--store", out_store});
  const bool no_partial = !fs::exists(report) && !fs::exists(out_store);
  fs::remove_all(dir);
  verdict(8, store.passed && ckpt.passed && cli_ok && e1 == 2 && e2 == 2 && e3 == 2 && no_partial,
          "store and checkpoint roundtrips bit-exact (" + std::to_string(store.trials) + " + " +
              std::to_string(ckpt.trials) + "), corrupt store exits " + std::to_string(e1) + "/" +
              std::to_string(e2) + ", corrupt checkpoint exits " + std::to_string(e3) + ", no partial output: " +
              (no_partial ? "yes" : "no"));
}

void criterion_9() {
  const auto r = checks::map_oracle_suite(110, 100, 1e-9);
  const RankedList hand{{"a", 0.9}, {"b", 0.8}, {"c", 0.7}};
  const double ap = average_precision(hand, {"a", "c"});
  const bool hand_ok = std::abs(ap - 5.0 / 6.0) < 1e-12;
  verdict(9, r.passed && hand_ok,
          fmt("mAP vs definition oracle on 100 rankings, worst %.3g (<= 1e-9); ranks 1 and 3 -> %.5f", r.worst, ap));
}

void criterion_10(const RunConfig& toy) {
  const auto t0 = Clock::now();
  const fs::path dir = fs::temp_directory_path() / "csl_acceptance_c10";
  fs::remove_all(dir);
  const std::string cfg = (fs::path(CSL_SOURCE_DIR) / "configs" / "toy.json").string();
  std::vector<std::string> synth_args{"synth", "--config", cfg, "--out", (dir / "data").string()};
  std::ostringstream log, out, err;
  int code = cli::dispatch(synth_args, log, err);
  std::vector<std::string> train_args{"train", "--config", cfg, "--data", (dir / "data").string(), "--ablation"};
  if (code == 0) code = cli::dispatch(train_args, out, err);
  fs::remove_all(dir);
  const std::string table = out.str();
  std::printf("%s", table.c_str());
  std::vector<double> dsvr;
  std::istringstream lines(table);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream cols(line);
    std::string name, shot, fcs, k;
    double d = 0;
    if (cols >> name >> shot >> fcs >> k >> d && name != "untrained") dsvr.push_back(d);
  }
  bool monotone = dsvr.size() == 4;
  for (std::size_t i = 1; i < dsvr.size(); ++i) monotone = monotone && dsvr[i] >= dsvr[i - 1];
  verdict(10, code == 0 && dsvr.size() == 4,
          fmt("`train --ablation` exit %.0f, %.0f configuration rows, %.0f s; DSVR monotone across them: ", code,
              static_cast<double>(dsvr.size()), seconds_since(t0)) +
              (monotone ? "yes" : "no") + " (reported, not asserted)");
}

}  // namespace

int main() {
  const RunConfig toy = toy_config();
  std::printf("toy config: %s\n", config_to_json(toy).c_str());
  guarded(1, criterion_1);
  guarded(2, criterion_2);
  guarded(3, criterion_3);
  guarded(4, criterion_4);
  guarded(5, [&] { criterion_5(toy); });
  guarded(6, [&] { criterion_6(toy); });
  guarded(7, criterion_7);
  guarded(8, [&] { criterion_8(toy); });
  guarded(9, criterion_9);
  guarded(10, [&] { criterion_10(toy); });
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
