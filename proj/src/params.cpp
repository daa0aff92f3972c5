#include "csl/params.hpp"

#include <fstream>
#include <limits>

#include "csl/binio.hpp"

namespace csl {

template <typename T>
void ParamSet<T>::add(const std::string& name, Tensor<T> value) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, std::move(value));
}

template <typename T>
std::size_t ParamSet<T>::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw LookupError("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
const Tensor<T>& ParamSet<T>::get(const std::string& name) const {
  return entries_[index_of(name)].second;
}

template <typename T>
Tensor<T>& ParamSet<T>::get(const std::string& name) {
  return entries_[index_of(name)].second;
}

template <typename T>
void ParamSet<T>::merge(const ParamSet& other) {
  for (const auto& [n, t] : other.entries_) add(n, t);
}

template <typename T>
ParamSet<T> ParamSet<T>::subset(const std::string& prefix) const {
  ParamSet out;
  for (const auto& [n, t] : entries_) {
    if (n.compare(0, prefix.size(), prefix) == 0) out.add(n, t);
  }
  return out;
}

template <typename T>
std::size_t ParamSet<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

template <typename T>
BoundParams<T>::BoundParams(Tape<T>& tape, const ParamSet<T>& params, bool requires_grad)
    : params_(&params) {
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) vars_.push_back(tape.leaf(params.at(i), requires_grad));
}

template <typename T>
const Var<T>& BoundParams<T>::operator[](const std::string& name) const {
  return vars_[params_->index_of(name)];
}

template <typename T>
std::vector<Tensor<T>> BoundParams<T>::gradients(const Gradients<T>& grads) const {
  std::vector<Tensor<T>> out;
  out.reserve(vars_.size());
  for (const auto& v : vars_) out.push_back(grads.of(v));
  return out;
}

template <typename T>
Tensor<T> trunc_normal(Shape shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.truncated_normal(stddev));
  return t;
}

template class ParamSet<float>;
template class ParamSet<double>;
template class BoundParams<float>;
template class BoundParams<double>;
template Tensor<float> trunc_normal(Shape, double, Rng&);
template Tensor<double> trunc_normal(Shape, double, Rng&);

// ---- checkpoint ---------------------------------------------------------------

std::vector<char> encode_checkpoint(const ParamSet<float>& params) {
  binio::Writer w;
  w.magic("CSLW");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.name(i);
    const Tensor<float>& t = params.at(i);
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw ContractError("parameter name too long: " + name.substr(0, 32) + "...");
    }
    if (t.rank() > std::numeric_limits<std::uint8_t>::max()) throw ContractError("rank too large");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    w.f32s(t.ptr(), t.numel());
  }
  return w.take();
}

ParamSet<float> decode_checkpoint(const std::vector<char>& bytes) {
  binio::Reader r(bytes);
  r.expect_magic("CSLW", "checkpoint");
  const std::uint64_t version_at = r.offset();
  const std::uint32_t version = r.u32("checkpoint version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  }
  const std::uint32_t count = r.u32("parameter count");
  ParamSet<float> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t entry_at = r.offset();
    const std::uint16_t len = r.u16("parameter name length");
    std::string name = r.str(len, "parameter name");
    const std::uint8_t rank = r.u8("parameter rank");
    Shape shape;
    std::uint64_t n = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      const std::uint64_t dim_at = r.offset();
      const std::uint32_t d = r.u32("parameter dims");
      if (d == 0) throw FormatError("zero dimension in parameter '" + name + "'", dim_at);
      n *= d;
      if (n > r.remaining()) throw FormatError("truncated payload for '" + name + "'", r.offset());
      shape.push_back(d);
    }
    std::vector<float> data(n);
    r.f32s(data.data(), n, "parameter payload");
    if (out.contains(name)) throw FormatError("duplicate parameter '" + name + "'", entry_at);
    out.add(name, Tensor<float>(std::move(shape), std::move(data)));
  }
  r.expect_end("checkpoint");
  return out;
}

void save_checkpoint(const ParamSet<float>& params, const std::filesystem::path& path) {
  binio::write_file(path, encode_checkpoint(params));
}

ParamSet<float> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(binio::read_file(path));
}

// ---- file helpers ---------------------------------------------------------------

namespace binio {

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

}  // namespace binio

}  // namespace csl
