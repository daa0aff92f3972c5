#pragma once

#include <string>
#include <vector>

#include "csl/autograd.hpp"
#include "csl/params.hpp"
#include "csl/video.hpp"

// Divided space-time attention encoder: clip [F,H,W,3] -> unit-norm D vector.
namespace csl {

struct ModelConfig {
  std::string variant = "toy";
  std::size_t frames = 8;
  std::size_t image = 16;  // H = W
  std::size_t patch = 8;
  std::size_t d_model = 32;
  std::size_t heads = 4;
  std::size_t depth = 2;
  std::size_t embed_dim = 16;
  std::size_t mlp_ratio = 4;

  std::size_t grid() const { return image / patch; }
  std::size_t spatial() const { return grid() * grid(); }
  std::size_t patch_dim() const { return patch * patch * 3; }
  std::size_t tokens() const { return frames * spatial() + 1; }

  // Throws ConfigError on inconsistent sizes.
  void validate() const;

  static ModelConfig toy();
  static ModelConfig small();  // 224px, patch 16, width 384, 12 blocks, D = 384
  static ModelConfig base();   // 224px, patch 16, width 768, 12 blocks, D = 768
  static ModelConfig preset(const std::string& variant);
};

// Parameters named enc.patch.{w,b}, enc.pos.spatial [S,d], enc.pos.temporal [F,d],
// enc.cls [1,d], enc.block{i}.{tattn,sattn,tnorm,snorm,mlp}.*, enc.norm.*, enc.head.{w,b}.
ParamSet<float> init_encoder(const ModelConfig& cfg, Rng& rng);

// Per-sample visible spatial indices (all of equal length); empty = all S.
using VisibleSets = std::vector<std::vector<std::size_t>>;

// Rows of P*P*3 pixels, ordered (sample, frame, visible index). Pixels within
// a patch are ordered (row, column, channel).
template <typename T>
Tensor<T> patchify(const std::vector<Frames>& clips, const ModelConfig& cfg, const VisibleSets& visible = {});

// Inverse of patchify over the full grid: [B*F*S, P*P*3] -> B clips.
std::vector<Frames> unpatchify(const Tensor<float>& patches, std::size_t batch, const ModelConfig& cfg);

// Token matrix of a batch: B classification rows first, then B*F*Sv patch
// rows ordered (sample, frame, visible index).
template <typename T>
struct TokenBatch {
  Var<T> tokens;
  std::size_t batch = 0;
  std::size_t visible = 0;  // Sv
};

template <typename T>
TokenBatch<T> patch_embed(const BoundParams<T>& p, const ModelConfig& cfg, const std::vector<Frames>& clips,
                          const VisibleSets& visible = {});

// Pre-norm residual block: temporal attention over frames at each spatial
// index (classification rows untouched), spatial attention over
// [cls, patches of frame f] per frame with the per-frame cls outputs averaged,
// then the MLP.
template <typename T>
TokenBatch<T> encode_block(const BoundParams<T>& p, const ModelConfig& cfg, const TokenBatch<T>& in,
                           std::size_t block);

template <typename T>
struct Encoded {
  Var<T> embeddings;  // [B, D], unit rows
  Var<T> tokens;      // final-normed token matrix, TokenBatch layout
  std::size_t batch = 0;
  std::size_t visible = 0;
};

// Full forward pass. Throws NumericError naming the block whose output is non-finite.
template <typename T>
Encoded<T> encode(const BoundParams<T>& p, const ModelConfig& cfg, const std::vector<Frames>& clips,
                  const VisibleSets& visible = {});

// Inference helper: embeds clips in chunks, returning [N, D].
Tensor<float> encode_clips(const ParamSet<float>& params, const ModelConfig& cfg, const std::vector<Frames>& clips,
                           std::size_t chunk = 64);

}  // namespace csl
