#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "csl/binio.hpp"
#include "csl/config.hpp"

using namespace csl;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("csl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Small benchmark: 4 queries over 30 videos.
  void make_data() {
    const std::string cfg = path("small.json");
    const std::string text = R"({"synth.videos": 30, "synth.queries": 4, "synth.train_videos": 6})";
    binio::write_file(cfg, std::vector<char>(text.begin(), text.end()));
    ASSERT_EQ(run({"synth", "--config", cfg, "--out", path("data")}).code, 0);
  }

  fs::path dir_;
};

}  // namespace

TEST(Cli, NoSubcommandIsUsageError) {
  const auto r = run({});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"eval", "--store"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, EvalMissingStoreIsDataError) {
  const auto r = run({"eval", "--store", path("nope.csf"), "--annotations", path("nope.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, UnknownConfigKeyIsUsageError) {
  const std::string text = R"({"train.stepz": 3})";
  binio::write_file(path("c.json"), std::vector<char>(text.begin(), text.end()));
  const auto r = run({"synth", "--config", path("c.json"), "--out", path("d")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("train.stepz"), std::string::npos);
}

TEST_F(CliTest, SynthIsByteIdentical) {
  make_data();
  const std::string cfg = path("small.json");
  ASSERT_EQ(run({"synth", "--config", cfg, "--out", path("again")}).code, 0);
  for (const auto& e : fs::recursive_directory_iterator(path("data"))) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), path("data"));
    EXPECT_EQ(binio::read_file(e.path()), binio::read_file(fs::path(path("again")) / rel)) << rel;
  }
}

TEST_F(CliTest, ExtractQueryEval) {
  make_data();
  auto r = run({"extract", "--data", path("data"), "--store", path("s.csf")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("resolved config"), std::string::npos);
  r = run({"query", "q000", "--store", path("s.csf"), "--top", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
  EXPECT_EQ(run({"query", "zzz", "--store", path("s.csf")}).code, 2);
  r = run({"eval", "--store", path("s.csf"), "--annotations", path("data/annotations.json"), "--task", "dsvr"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("task,query_id,ap\n", 0), 0u);
  EXPECT_NE(r.out.find("dsvr,mAP,"), std::string::npos);
  EXPECT_EQ(run({"eval", "--store", path("s.csf"), "--annotations", path("data/annotations.json"), "--task", "xyz"})
                .code,
            1);
}

TEST_F(CliTest, CorruptStoreRejected) {
  make_data();
  ASSERT_EQ(run({"extract", "--data", path("data"), "--store", path("s.csf")}).code, 0);
  auto bytes = binio::read_file(path("s.csf"));
  bytes.resize(bytes.size() / 2);
  binio::write_file(path("half.csf"), bytes);
  EXPECT_EQ(run({"eval", "--store", path("half.csf"), "--annotations", path("data/annotations.json")}).code, 2);
  EXPECT_EQ(run({"query", "q000", "--store", path("half.csf")}).code, 2);
}

TEST_F(CliTest, PretrainTrainAndCorruptCheckpoint) {
  make_data();
  auto r = run({"pretrain", "--data", path("data"), "--steps", "2", "--batch", "2", "--out", path("p.ckpt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("p.ckpt.loss.csv")));
  r = run({"train", "--data", path("data"), "--checkpoint", path("p.ckpt"), "--steps", "2", "--batch", "3", "--out",
           path("t.ckpt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("dsvr mAP"), std::string::npos);
  const auto metrics = binio::read_file(path("t.ckpt.metrics.csv"));
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 3);
  ASSERT_EQ(run({"extract", "--data", path("data"), "--checkpoint", path("t.ckpt"), "--store", path("t.csf")}).code,
            0);

  auto bytes = binio::read_file(path("t.ckpt"));
  bytes[bytes.size() / 2] ^= 0x5a;
  bytes.resize(bytes.size() - 3);
  binio::write_file(path("bad.ckpt"), bytes);
  EXPECT_EQ(run({"extract", "--data", path("data"), "--checkpoint", path("bad.ckpt"), "--store", path("u.csf")}).code,
            2);
  EXPECT_FALSE(fs::exists(path("u.csf")));
  EXPECT_EQ(run({"train", "--data", path("data"), "--steps", "1"}).code, 1);
}

TEST_F(CliTest, AblationTable) {
  make_data();
  const auto r = run({"train", "--data", path("data"), "--ablation", "--steps", "1", "--batch", "2", "--out",
                      path("ablation.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* name : {"untrained", "baseline", "+shotmix", "+fcs", "+topk"}) {
    EXPECT_NE(r.out.find(name), std::string::npos) << name;
  }
  EXPECT_TRUE(fs::exists(path("ablation.txt")));
}

TEST(RunConfig, FlatKeysAndResolution) {
  RunConfig cfg;
  apply_config_json(cfg, R"({"model.variant": "toy", "model.patch": 4, "loss.epsilon": -0.1, "train.use_fcs": false,
                              "eval.task": "ISVR", "seed": 7})");
  cfg.finalize();
  EXPECT_EQ(cfg.model.patch, 4u);
  EXPECT_EQ(cfg.loss.epsilon, -0.1);
  EXPECT_FALSE(cfg.train.use_fcs);
  EXPECT_EQ(cfg.eval_task, Task::ISVR);
  EXPECT_EQ(cfg.train.seed, 7u);
  EXPECT_EQ(cfg.pretrain.seed, 7u);

  // The resolved dump reads back to the same config.
  RunConfig back;
  apply_config_json(back, config_to_json(cfg));
  back.finalize();
  EXPECT_EQ(config_to_json(back), config_to_json(cfg));
}

TEST(RunConfig, Rejections) {
  RunConfig cfg;
  EXPECT_THROW(apply_config_json(cfg, R"({"loss.alphaa": 1})"), ConfigError);
  EXPECT_THROW(apply_config_json(cfg, R"({"train.steps": -1})"), ConfigError);
  EXPECT_THROW(apply_config_json(cfg, R"({"train.steps": 1.5})"), ConfigError);
  EXPECT_THROW(apply_config_json(cfg, R"({"train.use_fcs": 1})"), ConfigError);
  EXPECT_THROW(apply_config_json(cfg, R"({"model.variant": "huge"})"), ConfigError);
  EXPECT_THROW(apply_config_json(cfg, R"([1, 2])"), ConfigError);
  EXPECT_THROW(apply_config_json(cfg, R"({"a": )"), FormatError);
  RunConfig bad;
  apply_config_json(bad, R"({"loss.w2": -1})");
  EXPECT_THROW(bad.finalize(), ConfigError);
  RunConfig mismatch;
  apply_config_json(mismatch, R"({"synth.image": 32})");
  EXPECT_THROW(mismatch.finalize(), ConfigError);
}
