#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "csl/retrieval.hpp"
#include "csl/rng.hpp"

// Procedural benchmark: videos of moving coloured rectangles cut into shots,
// with near-duplicate variants of each query labelled by edit severity.
namespace csl::synth {

using Color = std::array<float, 3>;

struct Rect {
  Color color{};
  float w = 0, h = 0;    // pixels
  float x = 0, y = 0;    // top-left at the first frame of the shot
  float vx = 0, vy = 0;  // pixels per frame, bouncing off the borders
};

struct Shot {
  Color background{};
  Color gradient{};  // added linearly from the left edge to the right edge
  std::vector<Rect> rects;
  std::size_t length = 0;
};

struct Script {
  std::vector<Shot> shots;
  std::size_t frames() const;
};

// Photometric/geometric edits applied while rendering.
struct Edit {
  float brightness = 0.0f;  // added to every channel
  int shift_x = 0;          // content translated right by this many pixels
  int shift_y = 0;
  bool flip = false;
  std::size_t trim_front = 0;
  std::size_t trim_back = 0;
};

Shot random_shot(Rng& rng, std::size_t image);
Script random_script(Rng& rng, std::size_t image, std::size_t min_shots, std::size_t max_shots);
Frames render(const Script& script, std::size_t image, const Edit& edit = {});

// Brightness shift and translation with edge replication; used both by the
// generator and as the base augmentation during similarity training.
Frames apply_edit(const Frames& video, const Edit& edit);

struct BenchmarkConfig {
  std::size_t videos = 200;  // corpus size including queries
  std::size_t queries = 20;
  std::size_t train_videos = 128;
  std::size_t image = 16;
};

struct Video {
  std::string id;
  Frames frames;
};

struct Benchmark {
  std::vector<Video> corpus;
  std::vector<Video> train;  // disjoint, unlabelled
  std::vector<std::string> queries;
  AnnotationSet annotations;
};

// Per query: 2 ND (full copy, trim/brightness/shift), 2 DS (subset of the
// query's shots spliced with new ones, optionally flipped), 1 CS (the query's
// objects with new backgrounds and motion), 1 IS (the query's backgrounds with
// new objects). The rest of the corpus is independent distractors.
Benchmark generate_benchmark(const BenchmarkConfig& cfg, std::uint64_t seed);

// Layout: corpus/<id>.cslc, train/<id>.cslc, manifest.json, annotations.json.
void write_benchmark(const Benchmark& b, const std::filesystem::path& dir);
Benchmark read_benchmark(const std::filesystem::path& dir);

// Unlabelled multi-shot moving-pattern videos for pretraining.
std::vector<Frames> moving_pattern_videos(std::size_t count, std::size_t image, std::uint64_t seed);

}  // namespace csl::synth
