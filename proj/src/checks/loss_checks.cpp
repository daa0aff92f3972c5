#include "csl/checks/loss_checks.hpp"

#include <algorithm>
#include <cmath>

namespace csl::checks {

double naive_ms_loss(const Tensor<double>& sims, const std::vector<MinedPairs>& mined, const LossConfig& cfg,
                     std::size_t m) {
  double total = 0.0;
  for (std::size_t i = 0; i < mined.size(); ++i) {
    double pos = 0.0, neg = 0.0;
    for (auto k : mined[i].positives) pos += std::exp(-cfg.alpha * (sims.at({i, k}) - cfg.lambda));
    for (auto k : mined[i].negatives) neg += std::exp(cfg.beta * (sims.at({i, k}) - cfg.lambda));
    total += std::log(1.0 + pos) / cfg.alpha + std::log(1.0 + neg) / cfg.beta;
  }
  return total / static_cast<double>(m);
}

namespace {

double cosine_distance(const Tensor<double>& a, const Tensor<double>& b, std::size_t row) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t c = 0; c < a.dim(1); ++c) {
    dot += a.at({row, c}) * b.at({row, c});
    na += a.at({row, c}) * a.at({row, c});
    nb += b.at({row, c}) * b.at({row, c});
  }
  return 1.0 - dot / std::sqrt(na * nb);
}

Tensor<double> random_matrix(std::size_t n, std::size_t d, Rng& rng) {
  Tensor<double> t({n, d});
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

}  // namespace

double naive_fcs_loss(const Tensor<double>& xa, const Tensor<double>& xp, const Tensor<double>& xpf, double gamma) {
  double total = 0.0;
  for (std::size_t i = 0; i < xa.dim(0); ++i) {
    total += std::max(cosine_distance(xa, xp, i) - cosine_distance(xa, xpf, i) + gamma, 0.0);
  }
  return total / static_cast<double>(xa.dim(0));
}

SuiteResult ms_loss_gradient_suite(std::uint64_t seed, std::size_t trials, double tolerance) {
  Rng rng(seed);
  SuiteResult res{"ms loss gradients", trials, 0.0, true};
  for (std::size_t t = 0; t < trials; ++t) {
    LossConfig cfg;
    cfg.alpha = rng.uniform(0.5, 4.0);
    cfg.beta = rng.uniform(5.0, 50.0);
    cfg.lambda = rng.uniform(0.3, 1.0);
    cfg.epsilon = rng.uniform(-0.2, 0.2);
    const std::size_t n = 1 + rng.below(4), cols = 3 + rng.below(10);
    Tensor<double> sims({n, cols});
    std::vector<MinedPairs> mined;
    std::size_t pairs = 0;
    do {
      mined.clear();
      pairs = 0;
      for (auto& v : sims.data()) v = rng.uniform(-1.0, 1.0);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<Role> roles(cols);
        for (auto& r : roles) r = static_cast<Role>(rng.below(3));
        mined.push_back(mine_pairs<double>(std::span<const double>(sims.ptr() + i * cols, cols), roles, cfg.epsilon));
        pairs += mined.back().positives.size() + mined.back().negatives.size();
      }
    } while (pairs == 0);
    const std::size_t m = n;
    ScalarFn f = [&](Tape<double>&, const std::vector<Var<double>>& in) {
      MsLoss<double> l = ms_loss(in[0].value(), mined, cfg, m);
      return custom_scalar<double>("ms_loss", in, l.value, [g = l.grad](double go) {
        Tensor<double> out = g;
        for (auto& v : out.data()) v *= go;
        return std::vector<Tensor<double>>{out};
      });
    };
    res.worst = std::max(res.worst, check_gradients(f, {sims}).max_rel_error);
    const double naive = naive_ms_loss(sims, mined, cfg, m);
    res.worst = std::max(res.worst, std::abs(ms_loss(sims, mined, cfg, m).value - naive) / std::max(1.0, naive));
  }
  res.passed = res.worst <= tolerance;
  return res;
}

SuiteResult fcs_loss_gradient_suite(std::uint64_t seed, std::size_t trials, double tolerance) {
  Rng rng(seed);
  SuiteResult res{"fcs loss gradients", trials, 0.0, true};
  for (std::size_t t = 0; t < trials; ++t) {
    const double gamma = rng.uniform(0.0, 0.5);
    const std::size_t n = 1 + rng.below(5), d = 2 + rng.below(7);
    Tensor<double> a, p, pf;
    bool clear = false;
    while (!clear) {
      a = random_matrix(n, d, rng);
      p = random_matrix(n, d, rng);
      pf = random_matrix(n, d, rng);
      clear = true;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = cosine_distance(a, p, i) - cosine_distance(a, pf, i) + gamma;
        if (std::abs(r) <= 1e-3) clear = false;
      }
    }
    ScalarFn f = [&](Tape<double>&, const std::vector<Var<double>>& in) {
      FcsLoss<double> l = fcs_loss(in[0].value(), in[1].value(), in[2].value(), gamma);
      return custom_scalar<double>("fcs_loss", in, l.value, [l](double go) {
        std::vector<Tensor<double>> out{l.grad_a, l.grad_p, l.grad_pf};
        for (auto& g : out) {
          for (auto& v : g.data()) v *= go;
        }
        return out;
      });
    };
    res.worst = std::max(res.worst, check_gradients(f, {a, p, pf}).max_rel_error);
    const double naive = naive_fcs_loss(a, p, pf, gamma);
    res.worst = std::max(res.worst, std::abs(fcs_loss(a, p, pf, gamma).value - naive) / std::max(1.0, naive));
  }
  res.passed = res.worst <= tolerance;
  return res;
}

}  // namespace csl::checks
