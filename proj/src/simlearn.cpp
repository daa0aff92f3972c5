#include "csl/simlearn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "csl/synth.hpp"

namespace csl {

void LossConfig::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("loss: alpha and beta must be positive");
  if (!(gamma >= 0.0)) throw ConfigError("loss: gamma must be non-negative");
  if (!(w1 >= 0.0) || !(w2 >= 0.0)) throw ConfigError("loss: weights must be non-negative");
  if (!std::isfinite(lambda) || !std::isfinite(epsilon)) throw ConfigError("loss: lambda and epsilon must be finite");
}

ClipSampleSpec shotmix_sample(std::size_t video_frames, std::size_t f, Rng& rng, bool mix) {
  if (f == 0) throw ContractError("shotmix: clip length must be positive");
  if (video_frames < f) {
    throw SamplingError("shotmix: video of " + std::to_string(video_frames) + " frames is shorter than one clip");
  }
  ClipSampleSpec s;
  s.video_frames = video_frames;
  s.clip_frames = f;
  if (video_frames < 2 * f) {
    s.anchor_start = s.positive_start = rng.below(video_frames - f + 1);
    s.overlap = f;
    return s;
  }
  do {
    s.overlap_ratio = rng.uniform(0.7, 1.0);
  } while (s.overlap_ratio <= 0.7);
  s.overlap = static_cast<std::size_t>(std::ceil(s.overlap_ratio * static_cast<double>(f)));
  const std::size_t offset = f - s.overlap;
  const std::size_t lo = rng.below(video_frames - f - offset + 1);
  if (rng.coin()) {
    s.anchor_start = lo;
    s.positive_start = lo + offset;
  } else {
    s.anchor_start = lo + offset;
    s.positive_start = lo;
  }
  if (mix) {
    const auto max_cut = static_cast<std::size_t>(std::floor((1.0 - s.overlap_ratio) * static_cast<double>(f)));
    s.cut_length = rng.below(max_cut + 1);
    s.cut_start = rng.below(video_frames - s.cut_length + 1);
    s.replaced = rng.coin() ? ClipSampleSpec::End::Begin : ClipSampleSpec::End::End;
  }
  return s;
}

std::pair<Frames, Frames> apply_spec(const Frames& video, const ClipSampleSpec& spec) {
  const std::size_t f = spec.clip_frames, t = frame_count(video);
  if (spec.video_frames != t) throw ContractError("apply_spec: spec was drawn for a different video length");
  if (spec.anchor_start + f > t || spec.positive_start + f > t || spec.cut_start + spec.cut_length > t ||
      spec.cut_length > f) {
    throw ContractError("apply_spec: window outside the video");
  }
  Frames anchor = frame_window(video, spec.anchor_start, f);
  Frames positive = frame_window(video, spec.positive_start, f);
  if (spec.cut_length > 0) {
    const Frames cut = frame_window(video, spec.cut_start, spec.cut_length);
    const std::size_t per = positive.numel() / f;
    const std::size_t at = spec.replaced == ClipSampleSpec::End::Begin ? 0 : f - spec.cut_length;
    std::copy(cut.vec().begin(), cut.vec().end(), positive.ptr() + at * per);
  }
  return {std::move(anchor), std::move(positive)};
}

template <typename T>
MinedPairs mine_pairs(std::span<const T> sims, std::span<const Role> roles, double epsilon) {
  if (sims.size() != roles.size()) throw ShapeError("mine_pairs: sims and roles differ in length");
  double min_pos = std::numeric_limits<double>::infinity(), max_neg = -std::numeric_limits<double>::infinity();
  bool any_pos = false, any_neg = false;
  for (std::size_t k = 0; k < sims.size(); ++k) {
    if (roles[k] == Role::Positive) {
      any_pos = true;
      min_pos = std::min(min_pos, static_cast<double>(sims[k]));
    } else if (roles[k] == Role::Negative) {
      any_neg = true;
      max_neg = std::max(max_neg, static_cast<double>(sims[k]));
    }
  }
  MinedPairs out;
  if (!any_pos || !any_neg) return out;
  for (std::size_t k = 0; k < sims.size(); ++k) {
    const double s = sims[k];
    if (roles[k] == Role::Positive && s < max_neg - epsilon) out.positives.push_back(k);
    if (roles[k] == Role::Negative && s > min_pos + epsilon) out.negatives.push_back(k);
  }
  return out;
}

namespace {

// log(1 + sum_k e^{z_k}) and the softmax weights e^{z_k} / (1 + sum e^z).
double log1p_sum_exp(const std::vector<double>& z, std::vector<double>& weights) {
  double top = 0.0;
  for (double v : z) top = std::max(top, v);
  double denom = std::exp(-top);
  for (double v : z) denom += std::exp(v - top);
  weights.resize(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) weights[k] = std::exp(z[k] - top) / denom;
  return top + std::log(denom);
}

double cosine(const double* a, const double* b, std::size_t d, double& na, double& nb) {
  double dot = 0.0, sa = 0.0, sb = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    dot += a[c] * b[c];
    sa += a[c] * a[c];
    sb += b[c] * b[c];
  }
  na = std::sqrt(sa);
  nb = std::sqrt(sb);
  return dot / (na * nb);
}

// d cos(a,b) / da, accumulated with weight w.
void cosine_grad(const double* a, const double* b, std::size_t d, double cos, double na, double nb, double w,
                 double* out) {
  for (std::size_t c = 0; c < d; ++c) out[c] += w * (b[c] / (na * nb) - cos * a[c] / (na * na));
}

}  // namespace

template <typename T>
MsLoss<T> ms_loss(const Tensor<T>& sims, const std::vector<MinedPairs>& mined, const LossConfig& cfg, std::size_t m) {
  cfg.validate();
  if (sims.rank() != 2 || mined.size() != sims.dim(0)) {
    throw ShapeError("ms_loss: " + std::to_string(mined.size()) + " mined rows for sims " + shape_str(sims.shape()));
  }
  if (m == 0) throw ContractError("ms_loss: M must be positive");
  const std::size_t cols = sims.dim(1);
  MsLoss<T> out{0.0, Tensor<T>(sims.shape())};
  const double inv_m = 1.0 / static_cast<double>(m);
  std::vector<double> z, w;
  for (std::size_t i = 0; i < mined.size(); ++i) {
    const T* row = sims.ptr() + i * cols;
    T* grow = out.grad.ptr() + i * cols;
    z.clear();
    for (auto k : mined[i].positives) z.push_back(-cfg.alpha * (row[k] - cfg.lambda));
    if (!z.empty()) {
      out.value += inv_m / cfg.alpha * log1p_sum_exp(z, w);
      for (std::size_t j = 0; j < z.size(); ++j) grow[mined[i].positives[j]] += static_cast<T>(-inv_m * w[j]);
    }
    z.clear();
    for (auto k : mined[i].negatives) z.push_back(cfg.beta * (row[k] - cfg.lambda));
    if (!z.empty()) {
      out.value += inv_m / cfg.beta * log1p_sum_exp(z, w);
      for (std::size_t j = 0; j < z.size(); ++j) grow[mined[i].negatives[j]] += static_cast<T>(inv_m * w[j]);
    }
  }
  return out;
}

template <typename T>
FcsLoss<T> fcs_loss(const Tensor<T>& xa, const Tensor<T>& xp, const Tensor<T>& xpf, double gamma) {
  if (xa.rank() != 2 || xa.shape() != xp.shape() || xa.shape() != xpf.shape()) {
    throw ShapeError("fcs_loss: batches " + shape_str(xa.shape()) + ", " + shape_str(xp.shape()) + ", " +
                     shape_str(xpf.shape()) + " differ");
  }
  const std::size_t n = xa.dim(0), d = xa.dim(1);
  const Tensor<double> a = xa.template cast<double>(), p = xp.template cast<double>(), pf = xpf.template cast<double>();
  Tensor<double> ga(xa.shape()), gp(xa.shape()), gpf(xa.shape());
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double *ai = a.ptr() + i * d, *pi = p.ptr() + i * d, *fi = pf.ptr() + i * d;
    double na, np, nf;
    const double cp = cosine(ai, pi, d, na, np);
    const double cf = cosine(ai, fi, d, na, nf);
    // D(a,p) - D(a,pf) = cos(a,pf) - cos(a,p)
    const double margin = cf - cp + gamma;
    if (margin <= 0.0) continue;
    total += margin;
    cosine_grad(ai, fi, d, cf, na, nf, inv_n, ga.ptr() + i * d);
    cosine_grad(ai, pi, d, cp, na, np, -inv_n, ga.ptr() + i * d);
    cosine_grad(fi, ai, d, cf, nf, na, inv_n, gpf.ptr() + i * d);
    cosine_grad(pi, ai, d, cp, np, na, -inv_n, gp.ptr() + i * d);
  }
  return {total * inv_n, ga.template cast<T>(), gp.template cast<T>(), gpf.template cast<T>()};
}

double combined_loss(double ms, double fcs, double w1, double w2) {
  if (w1 < 0.0 || w2 < 0.0) throw ConfigError("combined_loss: weights must be non-negative");
  return w1 * ms + w2 * fcs;
}

void MemoryBank::push(const Tensor<float>& rows) {
  if (rows.rank() != 2) throw ShapeError("memory bank: expected a matrix, got " + shape_str(rows.shape()));
  if (!rows_.empty() && rows.dim(1) != rows_.front().size()) throw ShapeError("memory bank: dimension changed");
  if (capacity_ == 0) return;
  const std::size_t d = rows.dim(1);
  for (std::size_t i = 0; i < rows.dim(0); ++i) {
    rows_.emplace_back(rows.ptr() + i * d, rows.ptr() + (i + 1) * d);
    if (rows_.size() > capacity_) rows_.pop_front();
  }
}

Tensor<float> MemoryBank::matrix() const {
  if (rows_.empty()) throw ContractError("memory bank is empty");
  std::vector<float> out;
  out.reserve(rows_.size() * rows_.front().size());
  for (const auto& r : rows_) out.insert(out.end(), r.begin(), r.end());
  return Tensor<float>({rows_.size(), rows_.front().size()}, std::move(out));
}

// ---- trainer -------------------------------------------------------------------

SimTrainer::SimTrainer(ModelConfig model, LossConfig loss, TrainConfig train, const ParamSet<float>& params)
    : model_(std::move(model)),
      loss_(loss),
      train_(train),
      params_(params.subset("enc.")),
      opt_({0.9, 0.999, 1e-8, train.weight_decay}),
      bank_(train.bank_capacity),
      rng_(train.seed) {
  model_.validate();
  loss_.validate();
  if (train_.batch == 0) throw ConfigError("train: batch must be positive");
  if (!(train_.shotmix_prob >= 0.0 && train_.shotmix_prob <= 1.0)) {
    throw ConfigError("train: shotmix probability must lie in [0,1]");
  }
  Rng probe(0);
  const ParamSet<float> ref = init_encoder(model_, probe);
  if (ref.size() != params_.size()) throw ConfigError("train: checkpoint does not match the encoder config");
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (!params_.contains(ref.name(i)) || params_.get(ref.name(i)).shape() != ref.at(i).shape()) {
      throw ConfigError("train: checkpoint parameter '" + ref.name(i) + "' missing or misshapen");
    }
  }
}

StepMetrics SimTrainer::step(const std::vector<const Frames*>& videos) {
  const std::size_t n = videos.size(), f = model_.frames;
  if (n == 0) throw ContractError("train_step: empty batch");
  std::vector<Frames> anchors, positives, flips;
  for (const Frames* v : videos) {
    const bool mix = train_.use_shotmix && rng_.uniform() < train_.shotmix_prob;
    const ClipSampleSpec spec = shotmix_sample(frame_count(*v), f, rng_, mix);
    auto [a, p] = apply_spec(*v, spec);
    if (train_.augment) {
      synth::Edit e;
      e.brightness = static_cast<float>(rng_.uniform(-0.15, 0.15));
      e.shift_x = static_cast<int>(rng_.between(-2, 2));
      e.shift_y = static_cast<int>(rng_.between(-2, 2));
      p = synth::apply_edit(p, e);
    }
    if (train_.use_fcs) flips.push_back(hflip(p));
    anchors.push_back(std::move(a));
    positives.push_back(std::move(p));
  }
  std::vector<Frames> clips = anchors;
  clips.insert(clips.end(), positives.begin(), positives.end());
  clips.insert(clips.end(), flips.begin(), flips.end());
  const std::size_t groups = train_.use_fcs ? 3 : 2;

  Tape<float> tape;
  BoundParams<float> p(tape, params_);
  Var<float> emb = encode(p, model_, clips).embeddings;
  Var<float> xa = slice(emb, 0, 0, n);
  Var<float> cand = bank_.empty() ? emb : concat(std::vector<Var<float>>{emb, tape.constant(bank_.matrix())}, 0);
  Var<float> sims = matmul(xa, transpose(cand));

  const std::size_t cols = cand.shape()[0];
  std::vector<MinedPairs> mined;
  std::vector<Role> roles(cols);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(roles.begin(), roles.end(), Role::Negative);
    roles[i] = Role::Ignore;
    for (std::size_t g = 1; g < groups; ++g) roles[g * n + i] = Role::Positive;
    const float* row = sims.value().ptr() + i * cols;
    mined.push_back(mine_pairs<float>(std::span<const float>(row, cols), roles, loss_.epsilon));
  }
  const MsLoss<float> ms = ms_loss(sims.value(), mined, loss_, n);
  Var<float> ms_var = custom_scalar<float>("ms_loss", {sims}, static_cast<float>(ms.value),
                                           [g = ms.grad](float go) {
                                             Tensor<float> out = g;
                                             for (auto& v : out.data()) v *= go;
                                             return std::vector<Tensor<float>>{out};
                                           });
  Var<float> total = scale(ms_var, static_cast<float>(loss_.w1));
  double fcs_value = 0.0;
  if (train_.use_fcs) {
    Var<float> xp = slice(emb, 0, n, 2 * n), xpf = slice(emb, 0, 2 * n, 3 * n);
    FcsLoss<float> fcs = fcs_loss(xa.value(), xp.value(), xpf.value(), loss_.gamma);
    fcs_value = fcs.value;
    Var<float> fcs_var = custom_scalar<float>(
        "fcs_loss", {xa, xp, xpf}, static_cast<float>(fcs.value), [fcs](float go) {
          std::vector<Tensor<float>> out{fcs.grad_a, fcs.grad_p, fcs.grad_pf};
          for (auto& t : out) {
            for (auto& v : t.data()) v *= go;
          }
          return out;
        });
    total = add(total, scale(fcs_var, static_cast<float>(loss_.w2)));
  }
  const double total_value = combined_loss(ms.value, fcs_value, loss_.w1, loss_.w2);
  if (!std::isfinite(total_value)) {
    throw TrainingError("train: non-finite loss at step " + std::to_string(step_) + " (ms " +
                        std::to_string(ms.value) + ", fcs " + std::to_string(fcs_value) + ")");
  }

  const double lr = cosine_lr(std::min(step_, train_.steps), std::max<std::size_t>(train_.steps, 1),
                              scaled_lr(train_.base_lr, train_.batch));
  auto grads = p.gradients(backward(tape, total));
  opt_.step(params_, grads, lr);
  bank_.push(xa.value());
  return {step_++, ms.value, fcs_value, total_value, lr, bank_.size()};
}

std::vector<StepMetrics> SimTrainer::run(const std::vector<Frames>& pool,
                                         const std::function<void(const StepMetrics&)>& on_step) {
  std::vector<const Frames*> usable;
  for (const auto& v : pool) {
    if (frame_count(v) >= model_.frames) usable.push_back(&v);
  }
  if (usable.empty()) throw SamplingError("train: no video has a full clip of frames");
  std::vector<StepMetrics> out;
  for (std::size_t s = 0; s < train_.steps; ++s) {
    std::vector<const Frames*> batch;
    for (auto i : rng_.sample_indices(usable.size(), train_.batch)) batch.push_back(usable[i]);
    out.push_back(step(batch));
    if (on_step) on_step(out.back());
  }
  return out;
}

std::string metrics_csv(const std::vector<StepMetrics>& rows) {
  std::ostringstream os;
  os.precision(9);
  os << "step,ms_loss,fcs_loss,total,lr,bank_size\n";
  for (const auto& r : rows) {
    os << r.step << ',' << r.ms << ',' << r.fcs << ',' << r.total << ',' << r.lr << ',' << r.bank_size << '\n';
  }
  return os.str();
}

#define CSL_INSTANTIATE(T)                                                                                   \
  template MinedPairs mine_pairs(std::span<const T>, std::span<const Role>, double);                         \
  template MsLoss<T> ms_loss(const Tensor<T>&, const std::vector<MinedPairs>&, const LossConfig&, std::size_t); \
  template FcsLoss<T> fcs_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);

CSL_INSTANTIATE(float)
CSL_INSTANTIATE(double)

}  // namespace csl
