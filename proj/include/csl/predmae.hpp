#pragma once

#include <functional>
#include <string>
#include <vector>

#include "csl/encoder.hpp"
#include "csl/optim.hpp"

// Future-frame prediction pretraining: tube-mask the past F frames, encode the
// visible tubes, and predict the next F frames with a 4-block decoder.
namespace csl {

struct PredMaeConfig {
  double mask_ratio = 0.9;
  std::size_t decoder_depth = 4;
  std::size_t decoder_heads = 4;
  std::size_t decoder_width = 0;  // 0 = encoder width; any other value must equal it

  void validate(const ModelConfig& model) const;
};

struct TubeMask {
  std::vector<bool> masked;  // per spatial index, shared by every frame
  double ratio = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return masked.size(); }
  std::vector<std::size_t> visible_indices() const;
  std::vector<std::size_t> masked_indices() const;
};

// round(ratio * s) with ties to even.
std::size_t mask_count(std::size_t s, double ratio);

TubeMask tube_mask(std::size_t s, double ratio, std::uint64_t seed);

// Parameters dec.mask_token [1,d], dec.pos.future [F,d], dec.block{i}.{norm,attn,mlp}.*,
// dec.norm.*, dec.head.{w,b} (d -> P*P*3).
ParamSet<float> init_decoder(const ModelConfig& model, const PredMaeConfig& cfg, Rng& rng);

// Encoder and decoder parameters together, as stored in a pretraining checkpoint.
ParamSet<float> init_predmae(const ModelConfig& model, const PredMaeConfig& cfg, Rng& rng);

// Predicted future patches [B*F*S, P*P*3], rows ordered (sample, frame, s).
// `p` must hold both enc.* and dec.* parameters.
template <typename T>
Var<T> predict_future_patches(const BoundParams<T>& p, const ModelConfig& model, const PredMaeConfig& cfg,
                              const std::vector<Frames>& past, const std::vector<TubeMask>& masks);

// Forward-only prediction assembled into frames.
std::vector<Frames> predict_future(const ParamSet<float>& params, const ModelConfig& model, const PredMaeConfig& cfg,
                                   const std::vector<Frames>& past, const std::vector<TubeMask>& masks);

// Mean squared error over every element.
double predmae_loss(const Frames& pred, const Frames& gt);

struct PredPair {
  Frames past;
  Frames future;
};

// Contiguous windows [o, o+F) and [o+F, o+2F) for a random o with o + 2F <= T.
PredPair sample_pred_pair(const Frames& video, std::size_t f, Rng& rng);

struct PretrainOptions {
  std::size_t steps = 200;
  std::size_t batch = 8;
  double base_lr = 5e-4;  // scaled by batch/256
  double weight_decay = 0.05;
  std::uint64_t seed = 42;
};

struct PretrainResult {
  ParamSet<float> params;
  std::vector<double> losses;  // training loss per step, before that step's update
};

// Runs steps of mask -> encode visible -> predict -> MSE -> backward -> AdamW
// with cosine lr. Starts from `init` when given, else from the seed.
// Throws TrainingError naming the step on a non-finite loss.
PretrainResult pretrain_run(const std::vector<Frames>& videos, const ModelConfig& model, const PredMaeConfig& cfg,
                            const PretrainOptions& opts, const ParamSet<float>* init = nullptr,
                            const std::function<void(std::size_t, double)>& on_step = {});

// Mean MSE of the model over fixed (past, future, mask) triples.
double predmae_eval(const ParamSet<float>& params, const ModelConfig& model, const PredMaeConfig& cfg,
                    const std::vector<PredPair>& pairs, const std::vector<TubeMask>& masks);

// "step,loss"
std::string loss_curve_csv(const std::vector<double>& losses);

}  // namespace csl
