#include <gtest/gtest.h>

#include <cmath>

#include "csl/checks/model_checks.hpp"
#include "csl/encoder.hpp"

using namespace csl;

namespace {

ParamSet<float> toy_params(std::uint64_t seed = 1) {
  Rng rng(seed);
  return init_encoder(ModelConfig::toy(), rng);
}

void zero_param(ParamSet<float>& ps, const std::string& name) {
  for (auto& v : ps.get(name).data()) v = 0.0f;
}

}  // namespace

TEST(ModelConfig, PresetsValidate) {
  for (const char* v : {"toy", "small", "base"}) EXPECT_NO_THROW(ModelConfig::preset(v).validate());
  EXPECT_EQ(ModelConfig::small().embed_dim, 384u);
  EXPECT_EQ(ModelConfig::base().embed_dim, 768u);
  ModelConfig bad = ModelConfig::toy();
  bad.patch = 5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ModelConfig::toy();
  bad.heads = 5;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(PatchEmbed, TokenCount) {
  const auto cfg = ModelConfig::toy();
  EXPECT_EQ(cfg.tokens(), 33u);
  auto ps = toy_params();
  Tape<float> tape;
  BoundParams<float> p(tape, ps);
  Rng rng(2);
  auto tb = patch_embed(p, cfg, {checks::random_clip(cfg, rng)});
  EXPECT_EQ(tb.tokens.shape(), (Shape{33, 32}));
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    tb = encode_block(p, cfg, tb, i);
    EXPECT_EQ(tb.tokens.shape(), (Shape{33, 32}));
  }
}

TEST(PatchEmbed, ZeroClipGivesPositionalEmbeddings) {
  const auto cfg = ModelConfig::toy();
  auto ps = toy_params();
  zero_param(ps, "enc.patch.w");
  Tape<float> tape;
  BoundParams<float> p(tape, ps);
  auto tok = patch_embed(p, cfg, {Frames({8, 16, 16, 3})}).tokens.value();
  const auto& sp = ps.get("enc.pos.spatial");
  const auto& tp = ps.get("enc.pos.temporal");
  for (std::size_t f = 0; f < 8; ++f) {
    for (std::size_t s = 0; s < 4; ++s) {
      for (std::size_t c = 0; c < 32; ++c) {
        EXPECT_EQ(tok.at({1 + f * 4 + s, c}), sp.at({s, c}) + tp.at({f, c}));
      }
    }
  }
}

TEST(PatchEmbed, LocalityOfProjection) {
  const auto cfg = ModelConfig::toy();
  auto ps = toy_params();
  Rng rng(3);
  Frames a = checks::random_clip(cfg, rng);
  Frames b = a;
  b.at({3, 9, 1, 0}) = 1.0f - b.at({3, 9, 1, 0});  // frame 3, patch (1,0) -> s = 2
  Tape<float> tape;
  BoundParams<float> p(tape, ps);
  auto ta = patch_embed(p, cfg, {a}).tokens.value();
  auto tb = patch_embed(p, cfg, {b}).tokens.value();
  for (std::size_t r = 0; r < 33; ++r) {
    bool same = true;
    for (std::size_t c = 0; c < 32; ++c) same = same && ta.at({r, c}) == tb.at({r, c});
    EXPECT_EQ(same, r != 1 + 3 * 4 + 2) << r;
  }
}

TEST(PatchEmbed, WrongClipShapeIsConfigError) {
  auto ps = toy_params();
  Tape<float> tape;
  BoundParams<float> p(tape, ps);
  EXPECT_THROW(patch_embed(p, ModelConfig::toy(), {Frames({7, 16, 16, 3})}), ConfigError);
}

TEST(EncodeBlock, ZeroBranchesAreIdentity) {
  const auto cfg = ModelConfig::toy();
  auto ps = toy_params();
  for (const char* n : {"enc.block0.tattn.proj.w", "enc.block0.sattn.proj.w", "enc.block0.mlp.fc2.w"}) zero_param(ps, n);
  Tape<float> tape;
  BoundParams<float> p(tape, ps);
  Rng rng(4);
  auto in = patch_embed(p, cfg, {checks::random_clip(cfg, rng), checks::random_clip(cfg, rng)});
  auto out = encode_block(p, cfg, in, 0);
  EXPECT_EQ(out.tokens.value(), in.tokens.value());
}

TEST(EncodeClip, UnitNormAndDeterministic) {
  const auto cfg = ModelConfig::toy();
  Rng rng(5);
  std::vector<Frames> clips;
  for (int i = 0; i < 5; ++i) clips.push_back(checks::random_clip(cfg, rng));
  auto e1 = encode_clips(toy_params(), cfg, clips);
  auto e2 = encode_clips(toy_params(), cfg, clips);
  EXPECT_EQ(e1, e2);
  for (std::size_t i = 0; i < 5; ++i) {
    double sq = 0;
    for (std::size_t c = 0; c < cfg.embed_dim; ++c) sq += e1.at({i, c}) * e1.at({i, c});
    EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-5);
  }
}

TEST(EncodeClip, BatchPermutationPermutesOutputs) {
  const auto cfg = ModelConfig::toy();
  Rng rng(6);
  std::vector<Frames> clips;
  for (int i = 0; i < 4; ++i) clips.push_back(checks::random_clip(cfg, rng));
  auto ps = toy_params();
  auto fwd = encode_clips(ps, cfg, clips);
  std::vector<Frames> rev(clips.rbegin(), clips.rend());
  auto back = encode_clips(ps, cfg, rev);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < cfg.embed_dim; ++c) EXPECT_NEAR(fwd.at({i, c}), back.at({3 - i, c}), 1e-6);
  }
  // Chunking the batch does not change results either.
  auto chunked = encode_clips(ps, cfg, clips, 1);
  for (std::size_t i = 0; i < fwd.numel(); ++i) EXPECT_NEAR(fwd[i], chunked[i], 1e-6);
}

TEST(EncodeClip, FlipChangesEmbeddingOfAsymmetricClip) {
  const auto cfg = ModelConfig::toy();
  Frames clip({8, 16, 16, 3});
  // Bright block in the left half only.
  for (std::size_t f = 0; f < 8; ++f) {
    for (std::size_t y = 2; y < 10; ++y) {
      for (std::size_t x = 0; x < 5; ++x) clip.at({f, y, x, 0}) = 1.0f;
    }
  }
  auto e = encode_clips(toy_params(), cfg, {clip, hflip(clip)});
  double dot = 0;
  for (std::size_t c = 0; c < cfg.embed_dim; ++c) dot += e.at({0, c}) * e.at({1, c});
  EXPECT_LT(dot, 1.0 - 1e-3);
}

TEST(EncodeClip, NonFiniteActivationNamesBlock) {
  const auto cfg = ModelConfig::toy();
  auto ps = toy_params();
  ps.get("enc.block1.mlp.fc2.b")[0] = INFINITY;
  Rng rng(7);
  try {
    encode_clips(ps, cfg, {checks::random_clip(cfg, rng)});
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("block 1"), std::string::npos);
  }
}

TEST(EncodeClip, VisibleSubsetUsesOnlyThoseTubes) {
  const auto cfg = ModelConfig::toy();
  auto ps = toy_params();
  Rng rng(8);
  Frames a = checks::random_clip(cfg, rng);
  Frames b = a;
  // Change only spatial index 0 (top-left patch) in every frame.
  for (std::size_t f = 0; f < 8; ++f) b.at({f, 0, 0, 0}) = 1.0f - b.at({f, 0, 0, 0});
  Tape<float> tape;
  BoundParams<float> p(tape, ps, false);
  VisibleSets vis{{1, 3}, {1, 3}};
  auto e = encode(p, cfg, {a, b}, vis);
  EXPECT_EQ(e.tokens.shape(), (Shape{2 + 2 * 8 * 2, 32}));
  for (std::size_t c = 0; c < cfg.embed_dim; ++c) {
    EXPECT_EQ(e.embeddings.value().at({0, c}), e.embeddings.value().at({1, c}));
  }
  VisibleSets none{{}, {}};
  EXPECT_EQ(encode(p, cfg, {a, b}, none).embeddings.shape(), (Shape{2, 16}));
}

TEST(Patchify, UnpatchifyInverts) {
  auto cfg = ModelConfig::toy();
  cfg.patch = 4;
  Rng rng(9);
  std::vector<Frames> clips{checks::random_clip(cfg, rng), checks::random_clip(cfg, rng)};
  auto back = unpatchify(patchify<float>(clips, cfg), 2, cfg);
  EXPECT_EQ(back[0], clips[0]);
  EXPECT_EQ(back[1], clips[1]);
}

TEST(EncoderGradients, MatchFiniteDifferences) {
  auto r = checks::encoder_gradient_check(42, 20, 1e-3);
  EXPECT_TRUE(r.passed) << r.worst;
  EXPECT_LT(r.worst, 1e-5);
}
