#include "csl/checks/model_checks.hpp"

#include <algorithm>
#include <cmath>

namespace csl::checks {

Frames random_clip(const ModelConfig& cfg, Rng& rng) {
  Frames c({cfg.frames, cfg.image, cfg.image, 3});
  for (auto& x : c.data()) x = static_cast<float>(rng.uniform());
  return c;
}

SuiteResult encoder_gradient_check(std::uint64_t seed, std::size_t coords, double tolerance, const ModelConfig& cfg) {
  Rng rng(seed);
  Rng init = rng.split(1);
  ParamSet<double> params = init_encoder(cfg, init).cast<double>();
  // Larger-than-default weights so every block contributes measurably.
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.name(i).ends_with(".w") || params.name(i).starts_with("enc.pos") || params.name(i) == "enc.cls") {
      for (auto& v : params.at(i).data()) v *= 10.0;
    }
  }
  const std::vector<Frames> clips{random_clip(cfg, rng), random_clip(cfg, rng)};
  Tensor<double> proj({clips.size(), cfg.embed_dim});
  for (auto& v : proj.data()) v = rng.normal();

  auto loss_at = [&](const ParamSet<double>& ps, std::vector<Tensor<double>>* grads) {
    Tape<double> tape;
    BoundParams<double> p(tape, ps, grads != nullptr);
    Var<double> loss = sum(mul(encode(p, cfg, clips).embeddings, tape.constant(proj)));
    if (grads) *grads = p.gradients(backward(tape, loss));
    return loss.value().item();
  };

  std::vector<Tensor<double>> analytic;
  loss_at(params, &analytic);

  SuiteResult res{"encoder end-to-end gradients", coords, 0.0, true};
  const double h = 1e-5;
  for (std::size_t c = 0; c < coords; ++c) {
    const std::size_t pi = rng.below(params.size());
    const std::size_t ei = rng.below(params.at(pi).numel());
    ParamSet<double> plus = params, minus = params;
    plus.at(pi)[ei] += h;
    minus.at(pi)[ei] -= h;
    const double numeric = (loss_at(plus, nullptr) - loss_at(minus, nullptr)) / (2 * h);
    res.worst = std::max(res.worst, relative_error(analytic[pi][ei], numeric, 1e-6));
  }
  res.passed = res.worst <= tolerance;
  return res;
}

}  // namespace csl::checks
