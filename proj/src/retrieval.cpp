#include "csl/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "csl/binio.hpp"

namespace csl {

std::vector<ClipWindow> clip_boundaries(std::size_t frame_count, std::size_t f) {
  if (frame_count == 0) throw ContractError("clip_boundaries: empty video");
  if (f == 0) throw ContractError("clip_boundaries: clip length must be positive");
  std::vector<ClipWindow> out;
  for (std::size_t s = 0; s < frame_count; s += f) out.push_back({s, std::min(s + f, frame_count)});
  return out;
}

std::vector<Frames> split_clips(const Frames& video, std::size_t f) {
  require_frames(video, "split_clips");
  std::vector<Frames> clips;
  for (const auto& w : clip_boundaries(video.dim(0), f)) {
    Frames clip = frame_window(video, w.start, w.end - w.start);
    if (w.padding(f) > 0) {
      std::vector<Frames> parts{clip};
      const Frames last = frame_window(video, w.end - 1, 1);
      for (std::size_t i = 0; i < w.padding(f); ++i) parts.push_back(last);
      clip = concat_frames(parts);
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

// ---- corpus ------------------------------------------------------------------

void CorpusIndex::add(const std::string& id, Tensor<float> clips) {
  if (clips.rank() != 2) throw ShapeError("corpus: clip matrix for '" + id + "' is " + shape_str(clips.shape()));
  if (videos_.empty()) {
    dim_ = clips.dim(1);
  } else if (clips.dim(1) != dim_) {
    throw ShapeError("corpus: '" + id + "' has D=" + std::to_string(clips.dim(1)) + ", index has D=" +
                     std::to_string(dim_));
  }
  if (!videos_.emplace(id, std::move(clips)).second) throw ContractError("corpus: duplicate id '" + id + "'");
}

const Tensor<float>& CorpusIndex::get(const std::string& id) const {
  auto it = videos_.find(id);
  if (it == videos_.end()) throw LookupError("unknown video id '" + id + "'");
  return it->second;
}

std::vector<std::string> CorpusIndex::ids() const {
  std::vector<std::string> out;
  out.reserve(videos_.size());
  for (const auto& [id, _] : videos_) out.push_back(id);
  return out;
}

std::size_t CorpusIndex::total_clips() const {
  std::size_t n = 0;
  for (const auto& [_, m] : videos_) n += m.dim(0);
  return n;
}

// ---- feature store -----------------------------------------------------------

std::vector<char> encode_store(const CorpusIndex& index) {
  if (index.empty()) throw ContractError("write_store: refusing to write an empty index");
  binio::Writer w;
  w.magic("CSF1");
  w.u32(kStoreVersion);
  w.u32(static_cast<std::uint32_t>(index.dim()));
  w.u64(index.size());
  for (const auto& [id, m] : index.videos()) {
    if (id.size() > std::numeric_limits<std::uint16_t>::max()) throw ContractError("video id too long");
    w.u16(static_cast<std::uint16_t>(id.size()));
    w.bytes(id.data(), id.size());
    w.u32(static_cast<std::uint32_t>(m.dim(0)));
    w.f32s(m.ptr(), m.numel());
  }
  return w.take();
}

CorpusIndex decode_store(const std::vector<char>& bytes) {
  binio::Reader r(bytes);
  r.expect_magic("CSF1", "feature store");
  const std::uint64_t version_at = r.offset();
  const std::uint32_t version = r.u32("store version");
  if (version != kStoreVersion) {
    throw FormatError("unsupported feature store version " + std::to_string(version), version_at);
  }
  const std::uint64_t dim_at = r.offset();
  const std::uint32_t dim = r.u32("store dim");
  if (dim == 0) throw FormatError("feature store dim is zero", dim_at);
  const std::uint64_t count = r.u64("video count");
  CorpusIndex index;
  for (std::uint64_t v = 0; v < count; ++v) {
    const std::uint64_t entry_at = r.offset();
    const std::string id = r.str(r.u16("id length"), "video id");
    const std::uint64_t clips_at = r.offset();
    const std::uint32_t clips = r.u32("clip count");
    if (clips == 0) throw FormatError("video '" + id + "' has no clips", clips_at);
    const std::uint64_t n = static_cast<std::uint64_t>(clips) * dim;
    std::vector<float> data(r.remaining() / sizeof(float) >= n ? n : 0);
    r.f32s(data.data(), n, "clip matrix");
    for (std::uint32_t i = 0; i < clips; ++i) {
      double sq = 0.0;
      for (std::uint32_t j = 0; j < dim; ++j) sq += static_cast<double>(data[i * dim + j]) * data[i * dim + j];
      if (!(std::abs(std::sqrt(sq) - 1.0) <= kUnitNormTolerance)) {
        throw IntegrityError("video '" + id + "' clip " + std::to_string(i) + " has norm " +
                             std::to_string(std::sqrt(sq)));
      }
    }
    if (index.contains(id)) throw FormatError("duplicate video id '" + id + "'", entry_at);
    index.add(id, Tensor<float>({clips, dim}, std::move(data)));
  }
  r.expect_end("feature store");
  return index;
}

void write_store(const CorpusIndex& index, const std::filesystem::path& path) {
  binio::write_file(path, encode_store(index));
}

CorpusIndex read_store(const std::filesystem::path& path) { return decode_store(binio::read_file(path)); }

// ---- ranking & metrics -------------------------------------------------------

RankedList rank_query(const std::string& query_id, const CorpusIndex& index, std::size_t k, DotCounter* counter) {
  const Tensor<float>& q = index.get(query_id);
  RankedList out;
  out.reserve(index.size() - 1);
  for (const auto& [id, m] : index.videos()) {
    if (id == query_id) continue;
    out.push_back({id, k == 0 ? chamfer(q, m, counter) : topk_cs(q, m, k, counter)});
  }
  // Ids already ascending, so a stable sort on score alone applies the tie rule.
  std::stable_sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  return out;
}

double average_precision(const RankedList& ranked, const std::set<std::string>& relevant) {
  if (relevant.empty()) throw MetricError("average precision is undefined without relevant items");
  double acc = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (relevant.count(ranked[r].id)) {
      ++hits;
      acc += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return acc / static_cast<double>(relevant.size());
}

Label parse_label(const std::string& s) {
  if (s == "ND") return Label::ND;
  if (s == "DS") return Label::DS;
  if (s == "CS") return Label::CS;
  if (s == "IS") return Label::IS;
  throw FormatError("unknown relevance label '" + s + "'", 0);
}

const char* label_name(Label l) {
  switch (l) {
    case Label::ND: return "ND";
    case Label::DS: return "DS";
    case Label::CS: return "CS";
    case Label::IS: return "IS";
  }
  return "?";
}

Task parse_task(const std::string& s) {
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "dsvr") return Task::DSVR;
  if (lower == "csvr") return Task::CSVR;
  if (lower == "isvr") return Task::ISVR;
  throw ConfigError("unknown task '" + s + "' (expected dsvr, csvr or isvr)");
}

const char* task_name(Task t) {
  switch (t) {
    case Task::DSVR: return "dsvr";
    case Task::CSVR: return "csvr";
    case Task::ISVR: return "isvr";
  }
  return "?";
}

std::set<Label> task_labels(Task t) {
  switch (t) {
    case Task::DSVR: return {Label::ND, Label::DS};
    case Task::CSVR: return {Label::ND, Label::DS, Label::CS};
    case Task::ISVR: return {Label::ND, Label::DS, Label::CS, Label::IS};
  }
  return {};
}

std::set<std::string> AnnotationSet::relevant(const std::string& query_id, Task task) const {
  auto it = queries.find(query_id);
  if (it == queries.end()) throw LookupError("no annotations for query '" + query_id + "'");
  const auto labels = task_labels(task);
  std::set<std::string> out;
  for (const auto& [vid, label] : it->second) {
    if (labels.count(label)) out.insert(vid);
  }
  return out;
}

AnnotationSet parse_annotations(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("annotations: ") + e.what(), e.byte);
  }
  if (!j.is_object() || !j.contains("queries") || !j["queries"].is_object()) {
    throw FormatError("annotations: expected {\"queries\": {...}}", 0);
  }
  AnnotationSet out;
  for (const auto& [qid, videos] : j["queries"].items()) {
    if (!videos.is_object()) throw FormatError("annotations: query '" + qid + "' is not an object", 0);
    auto& dst = out.queries[qid];
    for (const auto& [vid, label] : videos.items()) {
      if (!label.is_string()) throw FormatError("annotations: label for '" + vid + "' is not a string", 0);
      dst[vid] = parse_label(label.get<std::string>());
    }
  }
  return out;
}

std::string annotations_to_json(const AnnotationSet& a) {
  nlohmann::json q = nlohmann::json::object();
  for (const auto& [qid, videos] : a.queries) {
    nlohmann::json v = nlohmann::json::object();
    for (const auto& [vid, label] : videos) v[vid] = label_name(label);
    q[qid] = v;
  }
  return nlohmann::json{{"queries", q}}.dump(2) + "\n";
}

AnnotationSet read_annotations(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path);
  return parse_annotations(std::string(bytes.begin(), bytes.end()));
}

void write_annotations(const AnnotationSet& a, const std::filesystem::path& path) {
  const std::string s = annotations_to_json(a);
  binio::write_file(path, std::vector<char>(s.begin(), s.end()));
}

EvalReport evaluate(const CorpusIndex& index, const AnnotationSet& annotations, Task task, std::size_t k) {
  EvalReport report;
  report.task = task;
  double acc = 0.0;
  for (const auto& [qid, _] : annotations.queries) {
    if (!index.contains(qid)) throw LookupError("annotated query '" + qid + "' is not in the corpus");
    auto relevant = annotations.relevant(qid, task);
    relevant.erase(qid);
    if (relevant.empty()) {
      ++report.excluded;
      continue;
    }
    const double ap = average_precision(rank_query(qid, index, k), relevant);
    report.per_query.push_back({qid, ap});
    acc += ap;
  }
  if (report.per_query.empty()) {
    throw MetricError(std::string("no query has relevant videos under ") + task_name(task));
  }
  report.map = acc / static_cast<double>(report.per_query.size());
  return report;
}

std::string map_report_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os.precision(17);
  os << "task,query_id,ap\n";
  for (const auto& r : reports) {
    for (const auto& q : r.per_query) os << task_name(r.task) << ',' << q.query_id << ',' << q.ap << '\n';
  }
  for (const auto& r : reports) os << task_name(r.task) << ",mAP," << r.map << '\n';
  return os.str();
}

}  // namespace csl
