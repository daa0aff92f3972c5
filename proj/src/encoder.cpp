#include "csl/encoder.hpp"

#include <algorithm>

#include "csl/nn.hpp"

namespace csl {

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("model config: " + msg);
  };
  need(frames > 0 && image > 0 && patch > 0 && d_model > 0 && heads > 0 && depth > 0 && embed_dim > 0 &&
           mlp_ratio > 0,
       "sizes must be positive");
  need(image % patch == 0, "image " + std::to_string(image) + " not divisible by patch " + std::to_string(patch));
  need(d_model % heads == 0,
       "d_model " + std::to_string(d_model) + " not divisible by heads " + std::to_string(heads));
  if (variant == "small") need(embed_dim == 384, "the small variant has D = 384");
  if (variant == "base") need(embed_dim == 768, "the base variant has D = 768");
}

ModelConfig ModelConfig::toy() { return {}; }

ModelConfig ModelConfig::small() { return {"small", 8, 224, 16, 384, 6, 12, 384, 4}; }

ModelConfig ModelConfig::base() { return {"base", 8, 224, 16, 768, 12, 12, 768, 4}; }

ModelConfig ModelConfig::preset(const std::string& variant) {
  if (variant == "toy") return toy();
  if (variant == "small") return small();
  if (variant == "base") return base();
  throw ConfigError("unknown model variant '" + variant + "'");
}

ParamSet<float> init_encoder(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.d_model;
  ParamSet<float> ps;
  nn::add_linear(ps, "enc.patch", cfg.patch_dim(), d, rng);
  ps.add("enc.pos.spatial", trunc_normal<float>({cfg.spatial(), d}, nn::kInitStd, rng));
  ps.add("enc.pos.temporal", trunc_normal<float>({cfg.frames, d}, nn::kInitStd, rng));
  ps.add("enc.cls", trunc_normal<float>({1, d}, nn::kInitStd, rng));
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    const std::string b = "enc.block" + std::to_string(i);
    nn::add_norm(ps, b + ".tnorm", d);
    nn::add_attention(ps, b + ".tattn", d, rng);
    nn::add_norm(ps, b + ".snorm", d);
    nn::add_attention(ps, b + ".sattn", d, rng);
    nn::add_mlp(ps, b + ".mlp", d, cfg.mlp_ratio * d, rng);
  }
  nn::add_norm(ps, "enc.norm", d);
  nn::add_linear(ps, "enc.head", d, cfg.embed_dim, rng);
  return ps;
}

namespace {

std::size_t check_visible(const VisibleSets& visible, std::size_t batch, const ModelConfig& cfg) {
  if (visible.empty()) return cfg.spatial();
  if (visible.size() != batch) {
    throw ShapeError("visible sets: " + std::to_string(visible.size()) + " for batch of " + std::to_string(batch));
  }
  const std::size_t sv = visible[0].size();
  for (const auto& v : visible) {
    if (v.size() != sv) throw ShapeError("visible sets must have equal length");
    for (auto s : v) {
      if (s >= cfg.spatial()) throw ShapeError("visible index " + std::to_string(s) + " out of range");
    }
  }
  return sv;
}

std::size_t spatial_index(const VisibleSets& visible, std::size_t b, std::size_t j) {
  return visible.empty() ? j : visible[b][j];
}

void check_clips(const std::vector<Frames>& clips, const ModelConfig& cfg) {
  if (clips.empty()) throw ContractError("encoder: empty batch");
  for (const auto& c : clips) {
    if (c.rank() != 4 || c.dim(0) != cfg.frames || c.dim(1) != cfg.image || c.dim(2) != cfg.image ||
        c.dim(3) != 3) {
      throw ConfigError("encoder: clip " + shape_str(c.shape()) + " does not match config [" +
                        std::to_string(cfg.frames) + "x" + std::to_string(cfg.image) + "x" +
                        std::to_string(cfg.image) + "x3]");
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> patchify(const std::vector<Frames>& clips, const ModelConfig& cfg, const VisibleSets& visible) {
  check_clips(clips, cfg);
  const std::size_t B = clips.size(), F = cfg.frames, P = cfg.patch, G = cfg.grid(), W = cfg.image;
  const std::size_t sv = check_visible(visible, B, cfg);
  Tensor<T> out({B * F * sv, cfg.patch_dim()});
  T* dst = out.ptr();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t f = 0; f < F; ++f) {
      const float* frame = clips[b].ptr() + f * W * W * 3;
      for (std::size_t j = 0; j < sv; ++j) {
        const std::size_t s = spatial_index(visible, b, j);
        const std::size_t y0 = (s / G) * P, x0 = (s % G) * P;
        for (std::size_t y = 0; y < P; ++y) {
          const float* src = frame + ((y0 + y) * W + x0) * 3;
          for (std::size_t k = 0; k < P * 3; ++k) *dst++ = static_cast<T>(src[k]);
        }
      }
    }
  }
  return out;
}

std::vector<Frames> unpatchify(const Tensor<float>& patches, std::size_t batch, const ModelConfig& cfg) {
  const std::size_t F = cfg.frames, S = cfg.spatial(), P = cfg.patch, G = cfg.grid(), W = cfg.image;
  if (patches.rank() != 2 || patches.dim(0) != batch * F * S || patches.dim(1) != cfg.patch_dim()) {
    throw ShapeError("unpatchify: " + shape_str(patches.shape()) + " for batch " + std::to_string(batch));
  }
  std::vector<Frames> out;
  const float* src = patches.ptr();
  for (std::size_t b = 0; b < batch; ++b) {
    Frames clip({F, W, W, 3});
    for (std::size_t f = 0; f < F; ++f) {
      float* frame = clip.ptr() + f * W * W * 3;
      for (std::size_t s = 0; s < S; ++s) {
        const std::size_t y0 = (s / G) * P, x0 = (s % G) * P;
        for (std::size_t y = 0; y < P; ++y) {
          std::copy_n(src, P * 3, frame + ((y0 + y) * W + x0) * 3);
          src += P * 3;
        }
      }
    }
    out.push_back(std::move(clip));
  }
  return out;
}

template <typename T>
TokenBatch<T> patch_embed(const BoundParams<T>& p, const ModelConfig& cfg, const std::vector<Frames>& clips,
                          const VisibleSets& visible) {
  check_clips(clips, cfg);
  const std::size_t B = clips.size(), F = cfg.frames;
  const std::size_t sv = check_visible(visible, B, cfg);
  Tape<T>& tape = p["enc.cls"].tape();
  Var<T> cls = gather_rows(p["enc.cls"], std::vector<std::size_t>(B, 0));
  if (sv == 0) return {cls, B, 0};
  std::vector<std::size_t> s_idx, t_idx;
  s_idx.reserve(B * F * sv);
  t_idx.reserve(B * F * sv);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t j = 0; j < sv; ++j) {
        s_idx.push_back(spatial_index(visible, b, j));
        t_idx.push_back(f);
      }
    }
  }
  Var<T> x = nn::linear(p, "enc.patch", tape.constant(patchify<T>(clips, cfg, visible)));
  x = add(x, gather_rows(p["enc.pos.spatial"], std::move(s_idx)));
  x = add(x, gather_rows(p["enc.pos.temporal"], std::move(t_idx)));
  return {concat(std::vector<Var<T>>{cls, x}, 0), B, sv};
}

template <typename T>
TokenBatch<T> encode_block(const BoundParams<T>& p, const ModelConfig& cfg, const TokenBatch<T>& in,
                           std::size_t block) {
  const std::size_t B = in.batch, F = cfg.frames, sv = in.visible, d = cfg.d_model;
  const std::string pre = "enc.block" + std::to_string(block);
  Tape<T>& tape = in.tokens.tape();
  auto patch_row = [&](std::size_t b, std::size_t f, std::size_t j) { return B + (b * F + f) * sv + j; };
  Var<T> z = in.tokens;

  if (sv > 0) {
    // Temporal pass: sequences (b, j) over frames; cls rows get a zero update.
    std::vector<std::size_t> order(B * sv * F), back(B + B * F * sv);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t j = 0; j < sv; ++j) {
        for (std::size_t f = 0; f < F; ++f) {
          const std::size_t pos = (b * sv + j) * F + f;
          order[pos] = patch_row(b, f, j);
          back[patch_row(b, f, j)] = 1 + pos;
        }
      }
    }
    for (std::size_t b = 0; b < B; ++b) back[b] = 0;
    Var<T> seq = gather_rows(nn::norm(p, pre + ".tnorm", z), std::move(order));
    Var<T> upd = nn::self_attention(p, pre + ".tattn", seq, B * sv, F, cfg.heads);
    Var<T> padded = concat(std::vector<Var<T>>{tape.constant(Tensor<T>({1, d})), upd}, 0);
    z = add(z, gather_rows(padded, std::move(back)));
  }

  {
    // Spatial pass: sequences (b, f) of [cls_b, patches of frame f].
    const std::size_t len = sv + 1;
    std::vector<std::size_t> order(B * F * len), cls_rows(B * F), back(B + B * F * sv);
    for (std::size_t b = 0; b < B; ++b) {
      back[b] = b;
      for (std::size_t f = 0; f < F; ++f) {
        const std::size_t base = (b * F + f) * len;
        order[base] = b;
        cls_rows[b * F + f] = base;
        for (std::size_t j = 0; j < sv; ++j) {
          order[base + 1 + j] = patch_row(b, f, j);
          back[patch_row(b, f, j)] = B + base + 1 + j;
        }
      }
    }
    Var<T> seq = gather_rows(nn::norm(p, pre + ".snorm", z), std::move(order));
    Var<T> upd = nn::self_attention(p, pre + ".sattn", seq, B * F, len, cfg.heads);
    Var<T> cls_upd = mean(reshape(gather_rows(upd, std::move(cls_rows)), {B, F, d}), 1);
    z = add(z, gather_rows(concat(std::vector<Var<T>>{cls_upd, upd}, 0), std::move(back)));
  }

  z = nn::mlp_residual(p, pre + ".mlp", z);
  return {z, B, sv};
}

template <typename T>
Encoded<T> encode(const BoundParams<T>& p, const ModelConfig& cfg, const std::vector<Frames>& clips,
                  const VisibleSets& visible) {
  cfg.validate();
  TokenBatch<T> tb = patch_embed(p, cfg, clips, visible);
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    tb = encode_block(p, cfg, tb, i);
    if (!tb.tokens.value().all_finite()) {
      throw NumericError("encoder: non-finite activation after block " + std::to_string(i));
    }
  }
  Var<T> normed = nn::norm(p, "enc.norm", tb.tokens);
  Var<T> cls = tb.visible == 0 ? normed : slice(normed, 0, 0, tb.batch);
  Var<T> emb = l2_normalize(nn::linear(p, "enc.head", cls));
  if (!emb.value().all_finite()) throw NumericError("encoder: non-finite embedding from head");
  return {emb, normed, tb.batch, tb.visible};
}

Tensor<float> encode_clips(const ParamSet<float>& params, const ModelConfig& cfg, const std::vector<Frames>& clips,
                           std::size_t chunk) {
  if (clips.empty()) throw ContractError("encode_clips: no clips");
  std::vector<float> out;
  out.reserve(clips.size() * cfg.embed_dim);
  for (std::size_t start = 0; start < clips.size(); start += chunk) {
    const std::size_t end = std::min(clips.size(), start + chunk);
    std::vector<Frames> part(clips.begin() + static_cast<std::ptrdiff_t>(start),
                             clips.begin() + static_cast<std::ptrdiff_t>(end));
    Tape<float> tape;
    BoundParams<float> p(tape, params, false);
    const auto& e = encode(p, cfg, part).embeddings.value();
    out.insert(out.end(), e.vec().begin(), e.vec().end());
  }
  return Tensor<float>({clips.size(), cfg.embed_dim}, std::move(out));
}

#define CSL_INSTANTIATE(T)                                                                               \
  template Tensor<T> patchify(const std::vector<Frames>&, const ModelConfig&, const VisibleSets&);       \
  template TokenBatch<T> patch_embed(const BoundParams<T>&, const ModelConfig&, const std::vector<Frames>&, \
                                     const VisibleSets&);                                                \
  template TokenBatch<T> encode_block(const BoundParams<T>&, const ModelConfig&, const TokenBatch<T>&,   \
                                      std::size_t);                                                      \
  template Encoded<T> encode(const BoundParams<T>&, const ModelConfig&, const std::vector<Frames>&,      \
                             const VisibleSets&);

CSL_INSTANTIATE(float)
CSL_INSTANTIATE(double)

}  // namespace csl
