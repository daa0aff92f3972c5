#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "csl/predmae.hpp"
#include "csl/retrieval.hpp"
#include "csl/similarity.hpp"
#include "csl/simlearn.hpp"

namespace py = pybind11;
using namespace csl;

namespace {

using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <typename T, typename A>
Tensor<T> to_tensor(const A& arr) {
  Shape shape(arr.shape(), arr.shape() + arr.ndim());
  return Tensor<T>(std::move(shape), std::vector<T>(arr.data(), arr.data() + arr.size()));
}

template <typename T, typename A>
Tensor<T> to_matrix(const A& arr, const char* what) {
  if (arr.ndim() != 2) throw py::value_error(std::string(what) + " must be a 2-d array");
  return to_tensor<T>(arr);
}

template <typename T>
py::array_t<T> to_array(const Tensor<T>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<T> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

CorpusIndex index_from_dict(const std::map<std::string, F32>& videos) {
  CorpusIndex index;
  for (const auto& [id, arr] : videos) index.add(id, to_matrix<float>(arr, "clip matrix"));
  return index;
}

py::dict index_to_dict(const CorpusIndex& index) {
  py::dict out;
  for (const auto& [id, clips] : index.videos()) out[py::str(id)] = to_array(clips);
  return out;
}

std::vector<Role> parse_roles(const std::vector<std::string>& roles) {
  std::vector<Role> out;
  for (const auto& r : roles) {
    if (r == "+" || r == "positive") out.push_back(Role::Positive);
    else if (r == "-" || r == "negative") out.push_back(Role::Negative);
    else if (r == "." || r == "ignore") out.push_back(Role::Ignore);
    else throw py::value_error("role must be positive, negative or ignore, got '" + r + "'");
  }
  return out;
}

LossConfig loss_config(double alpha, double beta, double lambda, double epsilon, double gamma) {
  LossConfig cfg;
  cfg.alpha = alpha;
  cfg.beta = beta;
  cfg.lambda = lambda;
  cfg.epsilon = epsilon;
  cfg.gamma = gamma;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Clip-level video similarity: scoring, retrieval metrics, feature stores and training losses.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<IntegrityError>(m, "IntegrityError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<SamplingError>(m, "SamplingError", base.ptr());
  py::register_exception<MetricError>(m, "MetricError", base.ptr());
  py::register_exception<LookupError>(m, "LookupError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.attr("DEFAULT_TOPK") = kDefaultTopK;
  m.attr("CLIP_FRAMES") = kClipFrames;

  m.def(
      "sim_matrix", [](const F64& a, const F64& b) { return to_array(sim_matrix(to_matrix<double>(a, "a"), to_matrix<double>(b, "b"))); },
      py::arg("a"), py::arg("b"));
  m.def(
      "chamfer", [](const F64& a, const F64& b) { return chamfer(to_matrix<double>(a, "a"), to_matrix<double>(b, "b")); },
      py::arg("a"), py::arg("b"));
  m.def(
      "topk_cs",
      [](const F64& a, const F64& b, std::size_t k) {
        return topk_cs(to_matrix<double>(a, "a"), to_matrix<double>(b, "b"), k);
      },
      py::arg("a"), py::arg("b"), py::arg("k") = kDefaultTopK);
  m.def(
      "dot_count",
      [](const F64& a, const F64& b, std::size_t k) {
        DotCounter c;
        topk_cs(to_matrix<double>(a, "a"), to_matrix<double>(b, "b"), k, &c);
        return c.dots;
      },
      py::arg("a"), py::arg("b"), py::arg("k") = kDefaultTopK);

  m.def(
      "clip_boundaries",
      [](std::size_t frames, std::size_t f) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& w : clip_boundaries(frames, f)) out.emplace_back(w.start, w.end);
        return out;
      },
      py::arg("frames"), py::arg("f") = kClipFrames);

  m.def(
      "rank_query",
      [](const std::string& query, const std::map<std::string, F32>& videos, std::size_t k) {
        std::vector<std::pair<std::string, double>> out;
        for (const auto& r : rank_query(query, index_from_dict(videos), k)) out.emplace_back(r.id, r.score);
        return out;
      },
      py::arg("query"), py::arg("videos"), py::arg("k") = kDefaultTopK);
  m.def(
      "average_precision",
      [](const std::vector<std::string>& ranked, const std::set<std::string>& relevant) {
        RankedList list;
        for (const auto& id : ranked) list.push_back({id, 0.0});
        return average_precision(list, relevant);
      },
      py::arg("ranked"), py::arg("relevant"));
  m.def(
      "evaluate",
      [](const std::map<std::string, F32>& videos, const std::string& annotations_json, const std::string& task,
         std::size_t k) {
        const auto report = evaluate(index_from_dict(videos), parse_annotations(annotations_json), parse_task(task), k);
        std::map<std::string, double> per_query;
        for (const auto& q : report.per_query) per_query[q.query_id] = q.ap;
        return py::make_tuple(report.map, per_query);
      },
      py::arg("videos"), py::arg("annotations_json"), py::arg("task") = "DSVR", py::arg("k") = kDefaultTopK);

  m.def(
      "write_store",
      [](const std::map<std::string, F32>& videos, const std::filesystem::path& path) {
        write_store(index_from_dict(videos), path);
      },
      py::arg("videos"), py::arg("path"));
  m.def(
      "read_store", [](const std::filesystem::path& path) { return index_to_dict(read_store(path)); }, py::arg("path"));
  m.def(
      "encode_store",
      [](const std::map<std::string, F32>& videos) {
        const auto bytes = encode_store(index_from_dict(videos));
        return py::bytes(bytes.data(), bytes.size());
      },
      py::arg("videos"));
  m.def(
      "decode_store",
      [](const py::bytes& data) {
        const std::string s = data;
        return index_to_dict(decode_store(std::vector<char>(s.begin(), s.end())));
      },
      py::arg("data"));

  m.def(
      "tube_mask", [](std::size_t s, double ratio, std::uint64_t seed) { return tube_mask(s, ratio, seed).masked; },
      py::arg("spatial"), py::arg("ratio"), py::arg("seed"));

  m.def(
      "shotmix_sample",
      [](std::size_t frames, std::size_t f, std::uint64_t seed, bool mix) {
        Rng rng(seed);
        const auto s = shotmix_sample(frames, f, rng, mix);
        py::dict d;
        d["anchor_start"] = s.anchor_start;
        d["positive_start"] = s.positive_start;
        d["overlap_ratio"] = s.overlap_ratio;
        d["overlap"] = s.overlap;
        d["cut_start"] = s.cut_start;
        d["cut_length"] = s.cut_length;
        d["replaced"] = s.replaced == ClipSampleSpec::End::Begin ? "begin" : "end";
        return d;
      },
      py::arg("frames"), py::arg("f") = kClipFrames, py::arg("seed") = 0, py::arg("mix") = true);

  m.def(
      "ms_loss",
      [](const F64& sims, const std::vector<std::vector<std::string>>& roles, double alpha, double beta, double lambda,
         double epsilon) {
        const auto cfg = loss_config(alpha, beta, lambda, epsilon, 0.1);
        const Tensor<double> s = to_matrix<double>(sims, "sims");
        if (roles.size() != s.dim(0)) throw py::value_error("one role row per similarity row required");
        std::vector<MinedPairs> mined;
        for (std::size_t i = 0; i < roles.size(); ++i) {
          const auto r = parse_roles(roles[i]);
          if (r.size() != s.dim(1)) throw py::value_error("role row length differs from similarity columns");
          mined.push_back(mine_pairs<double>(std::span<const double>(s.data().data() + i * s.dim(1), s.dim(1)), r,
                                             epsilon));
        }
        const auto res = ms_loss(s, mined, cfg, s.dim(0));
        return py::make_tuple(res.value, to_array(res.grad));
      },
      py::arg("sims"), py::arg("roles"), py::arg("alpha") = 2.0, py::arg("beta") = 50.0, py::arg("lam") = 1.0,
      py::arg("epsilon") = 0.1);
  m.def(
      "fcs_loss",
      [](const F64& xa, const F64& xp, const F64& xpf, double gamma) {
        return fcs_loss(to_matrix<double>(xa, "xa"), to_matrix<double>(xp, "xp"), to_matrix<double>(xpf, "xpf"), gamma)
            .value;
      },
      py::arg("xa"), py::arg("xp"), py::arg("xpf"), py::arg("gamma") = 0.1);
}
