#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "csl/autograd.hpp"
#include "csl/rng.hpp"
#include "csl/tensor.hpp"

namespace csl {

// Ordered collection of named parameter tensors. Insertion order is the
// checkpoint order and the optimizer-state order.
template <typename T>
class ParamSet {
 public:
  void add(const std::string& name, Tensor<T> value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t size() const { return entries_.size(); }

  std::size_t index_of(const std::string& name) const;
  const Tensor<T>& get(const std::string& name) const;
  Tensor<T>& get(const std::string& name);

  const std::string& name(std::size_t i) const { return entries_.at(i).first; }
  const Tensor<T>& at(std::size_t i) const { return entries_.at(i).second; }
  Tensor<T>& at(std::size_t i) { return entries_.at(i).second; }

  // Appends every entry of `other`; names must not collide.
  void merge(const ParamSet& other);

  // Entries whose name starts with `prefix`, in order.
  ParamSet subset(const std::string& prefix) const;

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& [n, t] : entries_) out.add(n, t.template cast<U>());
    return out;
  }

  std::size_t total_elements() const;

  friend bool operator==(const ParamSet& a, const ParamSet& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Tape leaves for every parameter, addressable by name.
template <typename T>
class BoundParams {
 public:
  BoundParams(Tape<T>& tape, const ParamSet<T>& params, bool requires_grad = true);

  const Var<T>& operator[](const std::string& name) const;
  const ParamSet<T>& params() const { return *params_; }

  // Gradient per parameter, in ParamSet order.
  std::vector<Tensor<T>> gradients(const Gradients<T>& grads) const;

 private:
  const ParamSet<T>* params_;
  std::vector<Var<T>> vars_;
};

// Initialisers shared by the models.
template <typename T>
Tensor<T> trunc_normal(Shape shape, double stddev, Rng& rng);

// Checkpoint ("CSLW") I/O. Values are stored as 32-bit floats, little-endian.
//   magic "CSLW" | version u32 | count u32 |
//   per parameter: name_len u16, name bytes, rank u8, dims u32 x rank, f32 x numel
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<char> encode_checkpoint(const ParamSet<float>& params);
ParamSet<float> decode_checkpoint(const std::vector<char>& bytes);
void save_checkpoint(const ParamSet<float>& params, const std::filesystem::path& path);
ParamSet<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace csl
