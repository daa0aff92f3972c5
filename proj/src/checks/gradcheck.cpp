#include "csl/checks/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace csl::checks {

namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor<double>>& inputs) {
  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t));
  return f(tape, vars).value().item();
}

std::vector<Tensor<double>> analytic(const ScalarFn& f, const std::vector<Tensor<double>>& inputs) {
  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t));
  const Var<double> out = f(tape, vars);
  const Gradients<double> g = backward(tape, out);
  std::vector<Tensor<double>> result;
  for (const auto& v : vars) result.push_back(g.of(v));
  return result;
}

double central_difference(const ScalarFn& f, std::vector<Tensor<double>>& inputs, std::size_t k,
                          std::size_t i, double h) {
  const double orig = inputs[k][i];
  inputs[k][i] = orig + h;
  const double up = evaluate(f, inputs);
  inputs[k][i] = orig - h;
  const double down = evaluate(f, inputs);
  inputs[k][i] = orig;
  return (up - down) / (2.0 * h);
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult check_gradients(const ScalarFn& f, const std::vector<Tensor<double>>& inputs, double h) {
  GradCheckResult result;
  const auto grads = analytic(f, inputs);
  std::vector<Tensor<double>> work = inputs;
  for (std::size_t k = 0; k < work.size(); ++k) {
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < work[k].numel(); ++i) {
      const double n = central_difference(f, work, k, i, h);
      result.evaluations += 2;
      const double a = grads[k][i];
      diff2 += (a - n) * (a - n);
      a2 += a * a;
      n2 += n * n;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-10});
    result.max_rel_error = std::max(result.max_rel_error, std::sqrt(diff2) / denom);
  }
  return result;
}

GradCheckResult check_coordinates(const ScalarFn& f, const std::vector<Tensor<double>>& inputs,
                                  const std::vector<Coordinate>& coords, double h) {
  GradCheckResult result;
  const auto grads = analytic(f, inputs);
  std::vector<Tensor<double>> work = inputs;
  for (const auto& c : coords) {
    const double n = central_difference(f, work, c.input, c.element, h);
    result.evaluations += 2;
    result.max_rel_error = std::max(result.max_rel_error, relative_error(grads[c.input][c.element], n));
  }
  return result;
}

// ---- op suite ------------------------------------------------------------------

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from `kink` by at least `gap`.
Tensor<double> random_away_from(Shape shape, Rng& rng, double kink, double gap) {
  Tensor<double> t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double mag = rng.uniform(gap, 1.0);
    t[i] = kink + (rng.coin() ? mag : -mag);
  }
  return t;
}

std::size_t dim(Rng& rng, std::size_t lo = 1, std::size_t hi = 4) {
  return static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

// Reduces a tensor-valued op to a scalar via a fixed random weighting so every
// output element contributes a distinct coefficient.
Var<double> weighted_sum(const Var<double>& y, const Tensor<double>& w) {
  Tape<double>& tape = y.tape();
  return sum(mul(y, tape.constant(w)));
}

struct Case {
  std::string name;
  std::function<std::pair<ScalarFn, std::vector<Tensor<double>>>(Rng&)> make;
};

template <typename Op>
Case unary_case(std::string name, Op op, std::function<Tensor<double>(Shape, Rng&)> gen = nullptr,
                std::size_t rank = 2) {
  return Case{std::move(name), [op, gen, rank](Rng& rng) {
                Shape s;
                for (std::size_t i = 0; i < rank; ++i) s.push_back(dim(rng));
                Tensor<double> x = gen ? gen(s, rng) : random_tensor(s, rng);
                Tape<double> probe;
                const Shape out_shape = op(probe.leaf(x)).shape();
                Tensor<double> w = random_tensor(out_shape, rng);
                ScalarFn f = [op, w](Tape<double>&, const std::vector<Var<double>>& v) {
                  return weighted_sum(op(v[0]), w);
                };
                return std::make_pair(f, std::vector<Tensor<double>>{x});
              }};
}

std::vector<Case> all_cases() {
  std::vector<Case> cases;
  cases.push_back(Case{"add", [](Rng& rng) {
                         Shape s{dim(rng), dim(rng)};
                         Tensor<double> w = random_tensor(s, rng);
                         ScalarFn f = [w](Tape<double>&, const std::vector<Var<double>>& v) {
                           return weighted_sum(add(v[0], v[1]), w);
                         };
                         return std::make_pair(f, std::vector{random_tensor(s, rng), random_tensor(s, rng)});
                       }});
  cases.push_back(Case{"sub", [](Rng& rng) {
                         Shape s{dim(rng), dim(rng)};
                         Tensor<double> w = random_tensor(s, rng);
                         ScalarFn f = [w](Tape<double>&, const std::vector<Var<double>>& v) {
                           return weighted_sum(sub(v[0], v[1]), w);
                         };
                         return std::make_pair(f, std::vector{random_tensor(s, rng), random_tensor(s, rng)});
                       }});
  cases.push_back(Case{"mul", [](Rng& rng) {
                         Shape s{dim(rng), dim(rng)};
                         Tensor<double> w = random_tensor(s, rng);
                         ScalarFn f = [w](Tape<double>&, const std::vector<Var<double>>& v) {
                           return weighted_sum(mul(v[0], v[1]), w);
                         };
                         return std::make_pair(f, std::vector{random_tensor(s, rng), random_tensor(s, rng)});
                       }});
  cases.push_back(unary_case("scale", [](const Var<double>& x) { return scale(x, -1.7); }));
  cases.push_back(Case{"add_bias", [](Rng& rng) {
                         const std::size_t r = dim(rng), d = dim(rng);
                         Tensor<double> w = random_tensor({r, d}, rng);
                         ScalarFn f = [w](Tape<double>&, const std::vector<Var<double>>& v) {
                           return weighted_sum(add_bias(v[0], v[1]), w);
                         };
                         return std::make_pair(f, std::vector{random_tensor({r, d}, rng), random_tensor({d}, rng)});
                       }});
  cases.push_back(Case{"matmul", [](Rng& rng) {
                         const std::size_t n = dim(rng), k = dim(rng), m = dim(rng);
                         Tensor<double> w = random_tensor({n, m}, rng);
                         ScalarFn f = [w](Tape<double>&, const std::vector<Var<double>>& v) {
                           return weighted_sum(matmul(v[0], v[1]), w);
                         };
                         return std::make_pair(f, std::vector{random_tensor({n, k}, rng), random_tensor({k, m}, rng)});
                       }});
  for (bool tb : {false, true}) {
    cases.push_back(Case{tb ? "bmm_nt" : "bmm", [tb](Rng& rng) {
                           const std::size_t g = dim(rng, 1, 3), n = dim(rng), k = dim(rng), m = dim(rng);
                           Tensor<double> w = random_tensor({g, n, m}, rng);
                           ScalarFn f = [w, tb](Tape<double>&, const std::vector<Var<double>>& v) {
                             return weighted_sum(bmm(v[0], v[1], tb), w);
                           };
                           Shape bs = tb ? Shape{g, m, k} : Shape{g, k, m};
                           return std::make_pair(f, std::vector{random_tensor({g, n, k}, rng), random_tensor(bs, rng)});
                         }});
  }
  cases.push_back(unary_case("transpose", [](const Var<double>& x) { return transpose(x); }));
  cases.push_back(unary_case("reshape", [](const Var<double>& x) {
    return reshape(x, Shape{x.value().numel()});
  }));
  cases.push_back(Case{"concat", [](Rng& rng) {
                         const std::size_t axis = rng.below(2);
                         Shape a{dim(rng), dim(rng)};
                         Shape b = a;
                         b[axis] = dim(rng);
                         Shape o = a;
                         o[axis] += b[axis];
                         Tensor<double> w = random_tensor(o, rng);
                         ScalarFn f = [w, axis](Tape<double>&, const std::vector<Var<double>>& v) {
                           return weighted_sum(concat(std::vector{v[0], v[1]}, axis), w);
                         };
                         return std::make_pair(f, std::vector{random_tensor(a, rng), random_tensor(b, rng)});
                       }});
  cases.push_back(Case{"slice", [](Rng& rng) {
                         const std::size_t axis = rng.below(2);
                         Shape s{dim(rng, 2, 5), dim(rng, 2, 5)};
                         const std::size_t begin = rng.below(s[axis] - 1);
                         const std::size_t end = begin + 1 + rng.below(s[axis] - begin);
                         Shape o = s;
                         o[axis] = end - begin;
                         Tensor<double> w = random_tensor(o, rng);
                         ScalarFn f = [w, axis, begin, end](Tape<double>&, const std::vector<Var<double>>& v) {
                           return weighted_sum(slice(v[0], axis, begin, end), w);
                         };
                         return std::make_pair(f, std::vector{random_tensor(s, rng)});
                       }});
  cases.push_back(Case{"gather_rows", [](Rng& rng) {
                         const std::size_t n = dim(rng), d = dim(rng), k = dim(rng, 1, 6);
                         std::vector<std::size_t> rows(k);
                         for (auto& r : rows) r = rng.below(n);
                         Tensor<double> w = random_tensor({k, d}, rng);
                         ScalarFn f = [w, rows](Tape<double>&, const std::vector<Var<double>>& v) {
                           return weighted_sum(gather_rows(v[0], rows), w);
                         };
                         return std::make_pair(f, std::vector{random_tensor({n, d}, rng)});
                       }});
  cases.push_back(Case{"sum", [](Rng& rng) {
                         ScalarFn f = [](Tape<double>&, const std::vector<Var<double>>& v) {
                           return scale(sum(v[0]), 0.37);
                         };
                         return std::make_pair(f, std::vector{random_tensor({dim(rng), dim(rng)}, rng)});
                       }});
  cases.push_back(Case{"mean", [](Rng& rng) {
                         ScalarFn f = [](Tape<double>&, const std::vector<Var<double>>& v) {
                           return mul(mean(v[0]), mean(v[0]));
                         };
                         return std::make_pair(f, std::vector{random_tensor({dim(rng), dim(rng)}, rng)});
                       }});
  for (std::size_t axis : {0u, 1u, 2u}) {
    const std::string suffix = "_axis" + std::to_string(axis);
    cases.push_back(unary_case("sum" + suffix, [axis](const Var<double>& x) { return sum(x, axis); },
                               nullptr, 3));
    cases.push_back(unary_case("mean" + suffix, [axis](const Var<double>& x) { return mean(x, axis); },
                               nullptr, 3));
    cases.push_back(unary_case("softmax" + suffix, [axis](const Var<double>& x) { return softmax(x, axis); },
                               [](Shape s, Rng& rng) { return random_tensor(std::move(s), rng, -3.0, 3.0); }, 3));
  }
  cases.push_back(Case{"layer_norm", [](Rng& rng) {
                         const std::size_t r = dim(rng), d = dim(rng, 3, 6);
                         Tensor<double> w = random_tensor({r, d}, rng);
                         ScalarFn f = [w](Tape<double>&, const std::vector<Var<double>>& v) {
                           return weighted_sum(layer_norm(v[0], v[1], v[2]), w);
                         };
                         return std::make_pair(f, std::vector{random_tensor({r, d}, rng), random_tensor({d}, rng),
                                                              random_tensor({d}, rng)});
                       }});
  cases.push_back(unary_case("gelu", [](const Var<double>& x) { return gelu(x); },
                             [](Shape s, Rng& rng) { return random_tensor(std::move(s), rng, -3.0, 3.0); }));
  // Rows of width 1 normalise to a constant, so widths start at 2.
  cases.push_back(unary_case("l2_normalize", [](const Var<double>& x) { return l2_normalize(reshape(x, {x.shape()[0] * x.shape()[1] / 2, 2})); },
                             [](Shape s, Rng& rng) {
                               s[1] = 2 * s[1];
                               return random_away_from(std::move(s), rng, 0.0, 0.2);
                             }));
  cases.push_back(Case{"mse", [](Rng& rng) {
                         Shape s{dim(rng), dim(rng)};
                         ScalarFn f = [](Tape<double>&, const std::vector<Var<double>>& v) {
                           return mse(v[0], v[1]);
                         };
                         return std::make_pair(f, std::vector{random_tensor(s, rng), random_tensor(s, rng)});
                       }});
  cases.push_back(unary_case("exp", [](const Var<double>& x) { return exp(x); }));
  cases.push_back(unary_case("log", [](const Var<double>& x) { return log(x); },
                             [](Shape s, Rng& rng) { return random_tensor(std::move(s), rng, 0.2, 2.0); }));
  cases.push_back(unary_case("relu", [](const Var<double>& x) { return relu(x); },
                             [](Shape s, Rng& rng) { return random_away_from(std::move(s), rng, 0.0, 1e-3); }));
  cases.push_back(unary_case("maximum", [](const Var<double>& x) { return maximum(x, 0.25); },
                             [](Shape s, Rng& rng) { return random_away_from(std::move(s), rng, 0.25, 1e-3); }));
  return cases;
}

}  // namespace

std::vector<SuiteResult> op_gradient_suite(std::uint64_t seed, std::size_t trials, double tolerance) {
  std::vector<SuiteResult> results;
  const Rng root(seed);
  std::uint64_t stream = 0;
  for (const auto& c : all_cases()) {
    Rng rng = root.split(stream++);
    SuiteResult r{c.name, trials, 0.0, true};
    for (std::size_t t = 0; t < trials; ++t) {
      auto [f, inputs] = c.make(rng);
      r.worst = std::max(r.worst, check_gradients(f, inputs).max_rel_error);
    }
    r.passed = r.worst <= tolerance;
    results.push_back(r);
  }
  return results;
}

}  // namespace csl::checks
