#include "csl/nn.hpp"

#include <cmath>

namespace csl::nn {

template <typename T>
Var<T> self_attention(const BoundParams<T>& p, const std::string& prefix, const Var<T>& x,
                      std::size_t groups, std::size_t len, std::size_t heads) {
  const std::size_t d = x.shape()[1];
  if (x.shape()[0] != groups * len) {
    throw ShapeError("self_attention: " + shape_str(x.shape()) + " is not " + std::to_string(groups) + " x " +
                     std::to_string(len) + " rows");
  }
  if (d % heads != 0) throw ConfigError("self_attention: width not divisible by heads");
  const std::size_t dh = d / heads;
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  Var<T> qkv = reshape(linear(p, prefix + ".qkv", x), {groups, len, 3 * d});
  std::vector<Var<T>> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var<T> q = slice(qkv, 2, h * dh, (h + 1) * dh);
    Var<T> k = slice(qkv, 2, d + h * dh, d + (h + 1) * dh);
    Var<T> v = slice(qkv, 2, 2 * d + h * dh, 2 * d + (h + 1) * dh);
    Var<T> att = softmax(scale(bmm(q, k, true), inv_sqrt), 2);
    outs.push_back(bmm(att, v));
  }
  Var<T> merged = heads == 1 ? outs[0] : concat(outs, 2);
  return linear(p, prefix + ".proj", reshape(merged, {groups * len, d}));
}

template <typename T>
Var<T> mlp_residual(const BoundParams<T>& p, const std::string& prefix, const Var<T>& x) {
  Var<T> h = gelu(linear(p, prefix + ".fc1", norm(p, prefix + ".norm", x)));
  return add(x, linear(p, prefix + ".fc2", h));
}

template Var<float> self_attention(const BoundParams<float>&, const std::string&, const Var<float>&,
                                   std::size_t, std::size_t, std::size_t);
template Var<double> self_attention(const BoundParams<double>&, const std::string&, const Var<double>&,
                                    std::size_t, std::size_t, std::size_t);
template Var<float> mlp_residual(const BoundParams<float>&, const std::string&, const Var<float>&);
template Var<double> mlp_residual(const BoundParams<double>&, const std::string&, const Var<double>&);

void add_linear(ParamSet<float>& ps, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  ps.add(prefix + ".w", trunc_normal<float>({in, out}, kInitStd, rng));
  ps.add(prefix + ".b", Tensor<float>({out}));
}

void add_norm(ParamSet<float>& ps, const std::string& prefix, std::size_t d) {
  ps.add(prefix + ".g", Tensor<float>::full({d}, 1.0f));
  ps.add(prefix + ".b", Tensor<float>({d}));
}

void add_attention(ParamSet<float>& ps, const std::string& prefix, std::size_t d, Rng& rng) {
  add_linear(ps, prefix + ".qkv", d, 3 * d, rng);
  add_linear(ps, prefix + ".proj", d, d, rng);
}

void add_mlp(ParamSet<float>& ps, const std::string& prefix, std::size_t d, std::size_t hidden, Rng& rng) {
  add_norm(ps, prefix + ".norm", d);
  add_linear(ps, prefix + ".fc1", d, hidden, rng);
  add_linear(ps, prefix + ".fc2", hidden, d, rng);
}

}  // namespace csl::nn
