#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "csl/similarity.hpp"
#include "csl/video.hpp"

namespace csl {

inline constexpr std::size_t kClipFrames = 8;

// Clip window over the source frames. `end - start` real frames; the clip is
// padded to F by repeating frame end-1.
struct ClipWindow {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t padding(std::size_t f) const { return f - (end - start); }
  friend bool operator==(const ClipWindow&, const ClipWindow&) = default;
};

std::vector<ClipWindow> clip_boundaries(std::size_t frame_count, std::size_t f = kClipFrames);

// Materialises every clip of `video` per clip_boundaries.
std::vector<Frames> split_clips(const Frames& video, std::size_t f = kClipFrames);

// Unit-norm tolerance enforced by the store reader.
inline constexpr double kUnitNormTolerance = 1e-5;

// Video id -> clip matrix (n x D, float). Ids iterate in lexicographic order.
class CorpusIndex {
 public:
  void add(const std::string& id, Tensor<float> clips);
  bool contains(const std::string& id) const { return videos_.count(id) != 0; }
  const Tensor<float>& get(const std::string& id) const;
  std::size_t size() const { return videos_.size(); }
  bool empty() const { return videos_.empty(); }
  std::size_t dim() const { return dim_; }
  std::vector<std::string> ids() const;
  std::size_t total_clips() const;
  const std::map<std::string, Tensor<float>>& videos() const { return videos_; }

  friend bool operator==(const CorpusIndex& a, const CorpusIndex& b) {
    return a.dim_ == b.dim_ && a.videos_ == b.videos_;
  }

 private:
  std::size_t dim_ = 0;
  std::map<std::string, Tensor<float>> videos_;
};

// Feature store ("CSF1"): version u32 = 1, dim u32, count u64; per video
// id_len u16, id bytes, clip_count u32, clip_count * dim f32.
inline constexpr std::uint32_t kStoreVersion = 1;

std::vector<char> encode_store(const CorpusIndex& index);
CorpusIndex decode_store(const std::vector<char>& bytes);
void write_store(const CorpusIndex& index, const std::filesystem::path& path);
CorpusIndex read_store(const std::filesystem::path& path);

struct Ranked {
  std::string id;
  double score = 0.0;
};
using RankedList = std::vector<Ranked>;

// Scores every other video with topk_cs(query, candidate, k); descending score,
// ties by ascending id. k = 0 selects plain chamfer similarity.
RankedList rank_query(const std::string& query_id, const CorpusIndex& index, std::size_t k = kDefaultTopK,
                      DotCounter* counter = nullptr);

// (1/|relevant|) * sum of precision@r over the ranks r of relevant hits.
double average_precision(const RankedList& ranked, const std::set<std::string>& relevant);

enum class Label { ND, DS, CS, IS };
enum class Task { DSVR, CSVR, ISVR };

Label parse_label(const std::string& s);
const char* label_name(Label l);
Task parse_task(const std::string& s);
const char* task_name(Task t);
// DSVR -> {ND,DS}; CSVR adds CS; ISVR adds IS.
std::set<Label> task_labels(Task t);

// {"queries": {qid: {vid: "ND"|"DS"|"CS"|"IS"}}}
struct AnnotationSet {
  std::map<std::string, std::map<std::string, Label>> queries;

  std::set<std::string> relevant(const std::string& query_id, Task task) const;
};

AnnotationSet parse_annotations(const std::string& json_text);
std::string annotations_to_json(const AnnotationSet& a);
AnnotationSet read_annotations(const std::filesystem::path& path);
void write_annotations(const AnnotationSet& a, const std::filesystem::path& path);

struct QueryAp {
  std::string query_id;
  double ap = 0.0;
};

struct EvalReport {
  Task task = Task::DSVR;
  std::vector<QueryAp> per_query;  // in query-id order
  double map = 0.0;
  std::size_t excluded = 0;  // queries with no relevant video under the task
};

EvalReport evaluate(const CorpusIndex& index, const AnnotationSet& annotations, Task task,
                    std::size_t k = kDefaultTopK);

// "task,query_id,ap" rows, then one "task,mAP,<value>" summary row per report.
std::string map_report_csv(const std::vector<EvalReport>& reports);

}  // namespace csl
