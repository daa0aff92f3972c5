#pragma once

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "csl/encoder.hpp"
#include "csl/optim.hpp"

// Self-supervised similarity learning: ShotMix positives, flipped positives,
// memory-bank negatives, MS loss with hard mining, and the flipped-clip (FCS)
// hinge loss.
namespace csl {

struct LossConfig {
  double alpha = 2.0;
  double beta = 50.0;
  double lambda = 1.0;
  double epsilon = 0.1;  // signed mining margin
  double gamma = 0.1;
  double w1 = 1.0;
  double w2 = 0.01;

  void validate() const;
};

// Anchor and positive windows of one video, plus the optional spliced cut.
struct ClipSampleSpec {
  enum class End { Begin, End };

  std::size_t video_frames = 0;
  std::size_t clip_frames = 0;
  std::size_t anchor_start = 0;
  std::size_t positive_start = 0;
  double overlap_ratio = 1.0;  // r
  std::size_t overlap = 0;     // ceil(r * F) shared frames
  std::size_t cut_start = 0;
  std::size_t cut_length = 0;
  End replaced = End::End;
};

// Draws r in (0.7, 1), places two windows sharing ceil(rF) frames, and a cut of
// length uniform on [0, floor((1-r)F)] starting anywhere in the video. With
// `mix` false the cut length is 0. Videos shorter than 2F get positive = anchor
// and no cut; shorter than F throws SamplingError.
ClipSampleSpec shotmix_sample(std::size_t video_frames, std::size_t f, Rng& rng, bool mix = true);

// Anchor window, and the positive window with its designated end replaced by
// the cut frames.
std::pair<Frames, Frames> apply_spec(const Frames& video, const ClipSampleSpec& spec);

enum class Role : std::uint8_t { Ignore, Positive, Negative };

struct MinedPairs {
  std::vector<std::size_t> positives;  // column indices
  std::vector<std::size_t> negatives;
};

// Negatives with S > min(S+) + eps and positives with S < max(S-) - eps.
// Empty when the row has no positive or no negative candidate.
template <typename T>
MinedPairs mine_pairs(std::span<const T> sims, std::span<const Role> roles, double epsilon);

template <typename T>
struct MsLoss {
  double value = 0.0;
  Tensor<T> grad;  // d value / d sims
};

// (1/M) sum_i [(1/a) log(1 + sum_P e^{-a(S-l)}) + (1/b) log(1 + sum_N e^{b(S-l)})]
template <typename T>
MsLoss<T> ms_loss(const Tensor<T>& sims, const std::vector<MinedPairs>& mined, const LossConfig& cfg, std::size_t m);

template <typename T>
struct FcsLoss {
  double value = 0.0;
  Tensor<T> grad_a, grad_p, grad_pf;
};

// (1/N) sum_i max(D(a,p) - D(a,pf) + gamma, 0), D = 1 - cosine. The
// subgradient is zero at the hinge.
template <typename T>
FcsLoss<T> fcs_loss(const Tensor<T>& xa, const Tensor<T>& xp, const Tensor<T>& xpf, double gamma);

double combined_loss(double ms, double fcs, double w1, double w2);

// FIFO ring of detached embeddings.
class MemoryBank {
 public:
  explicit MemoryBank(std::size_t capacity) : capacity_(capacity) {}

  void push(const Tensor<float>& rows);
  std::size_t size() const { return rows_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return rows_.empty(); }
  // Oldest first.
  Tensor<float> matrix() const;
  const std::vector<float>& row(std::size_t i) const { return rows_.at(i); }

 private:
  std::size_t capacity_;
  std::deque<std::vector<float>> rows_;
};

struct TrainConfig {
  std::size_t steps = 300;
  std::size_t batch = 8;
  double base_lr = 5e-4;  // scaled by batch/256, then cosine-annealed
  double weight_decay = 0.05;
  double shotmix_prob = 0.5;
  bool use_shotmix = true;
  bool use_fcs = true;
  bool augment = true;  // brightness/shift on the positive
  std::size_t bank_capacity = 4096;
  std::uint64_t seed = 42;
};

struct StepMetrics {
  std::size_t step = 0;
  double ms = 0.0;
  double fcs = 0.0;
  double total = 0.0;
  double lr = 0.0;
  std::size_t bank_size = 0;
};

class SimTrainer {
 public:
  // `params` must contain every enc.* parameter; other entries are dropped.
  SimTrainer(ModelConfig model, LossConfig loss, TrainConfig train, const ParamSet<float>& params);

  // One optimisation step on the given source videos (one anchor each).
  StepMetrics step(const std::vector<const Frames*>& videos);

  // train.steps steps, each on train.batch videos drawn from `pool`.
  std::vector<StepMetrics> run(const std::vector<Frames>& pool,
                               const std::function<void(const StepMetrics&)>& on_step = {});

  const ParamSet<float>& params() const { return params_; }
  const MemoryBank& bank() const { return bank_; }
  std::size_t steps_done() const { return step_; }

 private:
  ModelConfig model_;
  LossConfig loss_;
  TrainConfig train_;
  ParamSet<float> params_;
  AdamW<float> opt_;
  MemoryBank bank_;
  Rng rng_;
  std::size_t step_ = 0;
};

std::string metrics_csv(const std::vector<StepMetrics>& rows);

}  // namespace csl
