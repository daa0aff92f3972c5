#include "csl/predmae.hpp"

#include <cmath>
#include <sstream>

#include "csl/nn.hpp"

namespace csl {

void PredMaeConfig::validate(const ModelConfig& model) const {
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) throw ConfigError("predmae: mask ratio must lie in [0,1]");
  if (decoder_depth != 4) throw ConfigError("predmae: decoder depth is fixed at 4");
  if (decoder_width != 0 && decoder_width != model.d_model) {
    throw ConfigError("predmae: decoder width " + std::to_string(decoder_width) + " differs from encoder width " +
                      std::to_string(model.d_model));
  }
  if (decoder_heads == 0 || model.d_model % decoder_heads != 0) {
    throw ConfigError("predmae: decoder heads must divide the width");
  }
}

std::vector<std::size_t> TubeMask::visible_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < masked.size(); ++s) {
    if (!masked[s]) out.push_back(s);
  }
  return out;
}

std::vector<std::size_t> TubeMask::masked_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < masked.size(); ++s) {
    if (masked[s]) out.push_back(s);
  }
  return out;
}

std::size_t mask_count(std::size_t s, double ratio) {
  // nearbyint honours the default round-to-nearest-even mode.
  return static_cast<std::size_t>(std::nearbyint(ratio * static_cast<double>(s)));
}

TubeMask tube_mask(std::size_t s, double ratio, std::uint64_t seed) {
  if (s < 1) throw ContractError("tube_mask: need at least one spatial index");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ContractError("tube_mask: ratio must lie in [0,1]");
  TubeMask m{std::vector<bool>(s, false), ratio, seed};
  Rng rng(seed);
  for (auto i : rng.sample_indices(s, mask_count(s, ratio))) m.masked[i] = true;
  return m;
}

ParamSet<float> init_decoder(const ModelConfig& model, const PredMaeConfig& cfg, Rng& rng) {
  cfg.validate(model);
  const std::size_t d = model.d_model;
  ParamSet<float> ps;
  ps.add("dec.mask_token", trunc_normal<float>({1, d}, nn::kInitStd, rng));
  ps.add("dec.pos.future", trunc_normal<float>({model.frames, d}, nn::kInitStd, rng));
  for (std::size_t i = 0; i < cfg.decoder_depth; ++i) {
    const std::string b = "dec.block" + std::to_string(i);
    nn::add_norm(ps, b + ".norm", d);
    nn::add_attention(ps, b + ".attn", d, rng);
    nn::add_mlp(ps, b + ".mlp", d, model.mlp_ratio * d, rng);
  }
  nn::add_norm(ps, "dec.norm", d);
  nn::add_linear(ps, "dec.head", d, model.patch_dim(), rng);
  return ps;
}

ParamSet<float> init_predmae(const ModelConfig& model, const PredMaeConfig& cfg, Rng& rng) {
  Rng enc_rng = rng.split(1), dec_rng = rng.split(2);
  ParamSet<float> ps = init_encoder(model, enc_rng);
  ps.merge(init_decoder(model, cfg, dec_rng));
  return ps;
}

template <typename T>
Var<T> predict_future_patches(const BoundParams<T>& p, const ModelConfig& model, const PredMaeConfig& cfg,
                              const std::vector<Frames>& past, const std::vector<TubeMask>& masks) {
  cfg.validate(model);
  const std::size_t B = past.size(), F = model.frames, S = model.spatial();
  if (masks.size() != B) throw ShapeError("predict_future: one mask per sample required");
  VisibleSets visible;
  std::vector<std::vector<std::size_t>> hidden;
  for (const auto& m : masks) {
    if (m.size() != S) throw ShapeError("predict_future: mask covers " + std::to_string(m.size()) + " of " +
                                        std::to_string(S) + " spatial indices");
    visible.push_back(m.visible_indices());
    hidden.push_back(m.masked_indices());
  }
  const Encoded<T> enc = encode(p, model, past, visible);
  const std::size_t sv = enc.visible, sm = S - sv;

  std::vector<Var<T>> pool{enc.tokens};
  const std::size_t off_masked = B + B * F * sv;
  if (sm > 0) {
    std::vector<std::size_t> s_idx, t_idx;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t f = 0; f < F; ++f) {
        for (auto s : hidden[b]) {
          s_idx.push_back(s);
          t_idx.push_back(f);
        }
      }
    }
    const std::size_t n = s_idx.size();
    Var<T> m = gather_rows(p["dec.mask_token"], std::vector<std::size_t>(n, 0));
    m = add(m, gather_rows(p["enc.pos.spatial"], std::move(s_idx)));
    pool.push_back(add(m, gather_rows(p["enc.pos.temporal"], std::move(t_idx))));
  }
  const std::size_t off_future = off_masked + B * F * sm;
  {
    std::vector<std::size_t> s_idx, t_idx;
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t s = 0; s < S; ++s) {
        s_idx.push_back(s);
        t_idx.push_back(f);
      }
    }
    pool.push_back(add(gather_rows(p["dec.pos.future"], std::move(t_idx)),
                       gather_rows(p["enc.pos.spatial"], std::move(s_idx))));
  }

  // Per sample: [cls, past grid (f, s), future queries (f, s)].
  const std::size_t len = 1 + 2 * F * S;
  std::vector<std::size_t> order, future_rows;
  order.reserve(B * len);
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<std::size_t> slot(S);
    for (std::size_t j = 0; j < sv; ++j) slot[visible[b][j]] = j;
    for (std::size_t j = 0; j < sm; ++j) slot[hidden[b][j]] = j;
    order.push_back(b);
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t s = 0; s < S; ++s) {
        order.push_back(masks[b].masked[s] ? off_masked + (b * F + f) * sm + slot[s]
                                           : B + (b * F + f) * sv + slot[s]);
      }
    }
    for (std::size_t q = 0; q < F * S; ++q) {
      future_rows.push_back(order.size());
      order.push_back(off_future + q);
    }
  }
  Var<T> x = gather_rows(concat(pool, 0), std::move(order));
  for (std::size_t i = 0; i < cfg.decoder_depth; ++i) {
    const std::string pre = "dec.block" + std::to_string(i);
    x = add(x, nn::self_attention(p, pre + ".attn", nn::norm(p, pre + ".norm", x), B, len, cfg.decoder_heads));
    x = nn::mlp_residual(p, pre + ".mlp", x);
  }
  Var<T> fut = gather_rows(nn::norm(p, "dec.norm", x), std::move(future_rows));
  return nn::linear(p, "dec.head", fut);
}

std::vector<Frames> predict_future(const ParamSet<float>& params, const ModelConfig& model, const PredMaeConfig& cfg,
                                   const std::vector<Frames>& past, const std::vector<TubeMask>& masks) {
  Tape<float> tape;
  BoundParams<float> p(tape, params, false);
  auto out = predict_future_patches(p, model, cfg, past, masks).value();
  auto frames = unpatchify(out, past.size(), model);
  for (auto& f : frames) f = make_frames(std::move(f));
  return frames;
}

double predmae_loss(const Frames& pred, const Frames& gt) {
  if (pred.shape() != gt.shape()) {
    throw ShapeError("predmae_loss: " + shape_str(pred.shape()) + " vs " + shape_str(gt.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - gt[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.numel());
}

PredPair sample_pred_pair(const Frames& video, std::size_t f, Rng& rng) {
  const std::size_t t = frame_count(video);
  if (t < 2 * f) {
    throw SamplingError("video of " + std::to_string(t) + " frames is shorter than " + std::to_string(2 * f));
  }
  const std::size_t o = rng.below(t - 2 * f + 1);
  return {frame_window(video, o, f), frame_window(video, o + f, f)};
}

namespace {

struct PredBatch {
  std::vector<Frames> past;
  std::vector<Frames> future;
  std::vector<TubeMask> masks;
};

Var<float> batch_loss(const BoundParams<float>& p, const ModelConfig& model, const PredMaeConfig& cfg,
                      const PredBatch& batch) {
  Var<float> pred = predict_future_patches(p, model, cfg, batch.past, batch.masks);
  Var<float> target = pred.tape().constant(patchify<float>(batch.future, model));
  return mse(pred, target);
}

}  // namespace

PretrainResult pretrain_run(const std::vector<Frames>& videos, const ModelConfig& model, const PredMaeConfig& cfg,
                            const PretrainOptions& opts, const ParamSet<float>* init,
                            const std::function<void(std::size_t, double)>& on_step) {
  cfg.validate(model);
  if (opts.batch == 0) throw ConfigError("pretrain: batch must be positive");
  std::vector<const Frames*> usable;
  for (const auto& v : videos) {
    if (frame_count(v) >= 2 * model.frames) usable.push_back(&v);
  }
  if (opts.steps > 0 && usable.empty()) {
    throw SamplingError("pretrain: no video has the " + std::to_string(2 * model.frames) + " frames a pair needs");
  }
  Rng rng(opts.seed);
  Rng init_rng = rng.split(1);
  PretrainResult res{init ? *init : init_predmae(model, cfg, init_rng), {}};
  AdamW<float> opt({0.9, 0.999, 1e-8, opts.weight_decay});
  const double peak = scaled_lr(opts.base_lr, opts.batch);
  Rng data_rng = rng.split(2);
  for (std::size_t step = 0; step < opts.steps; ++step) {
    PredBatch batch;
    for (std::size_t i = 0; i < opts.batch; ++i) {
      PredPair pair = sample_pred_pair(*usable[data_rng.below(usable.size())], model.frames, data_rng);
      batch.past.push_back(std::move(pair.past));
      batch.future.push_back(std::move(pair.future));
      batch.masks.push_back(tube_mask(model.spatial(), cfg.mask_ratio, data_rng.next_u64()));
    }
    Tape<float> tape;
    BoundParams<float> p(tape, res.params);
    Var<float> loss = batch_loss(p, model, cfg, batch);
    const double value = loss.value().item();
    if (!std::isfinite(value)) throw TrainingError("pretrain: non-finite loss at step " + std::to_string(step));
    auto grads = p.gradients(backward(tape, loss));
    opt.step(res.params, grads, cosine_lr(step, opts.steps, peak));
    res.losses.push_back(value);
    if (on_step) on_step(step, value);
  }
  return res;
}

double predmae_eval(const ParamSet<float>& params, const ModelConfig& model, const PredMaeConfig& cfg,
                    const std::vector<PredPair>& pairs, const std::vector<TubeMask>& masks) {
  PredBatch batch;
  for (const auto& pr : pairs) {
    batch.past.push_back(pr.past);
    batch.future.push_back(pr.future);
  }
  batch.masks = masks;
  Tape<float> tape;
  BoundParams<float> p(tape, params, false);
  return batch_loss(p, model, cfg, batch).value().item();
}

std::string loss_curve_csv(const std::vector<double>& losses) {
  std::ostringstream os;
  os.precision(9);
  os << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) os << i << ',' << losses[i] << '\n';
  return os.str();
}

template Var<float> predict_future_patches(const BoundParams<float>&, const ModelConfig&, const PredMaeConfig&,
                                           const std::vector<Frames>&, const std::vector<TubeMask>&);
template Var<double> predict_future_patches(const BoundParams<double>&, const ModelConfig&, const PredMaeConfig&,
                                            const std::vector<Frames>&, const std::vector<TubeMask>&);

}  // namespace csl
