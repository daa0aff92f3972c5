#include "csl/synth.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "csl/binio.hpp"

namespace csl::synth {

namespace {

Color random_color(Rng& rng) {
  return {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform())};
}

float bounce(float start, float v, std::size_t t, float span) {
  if (span <= 0.0f) return 0.0f;
  float p = std::fmod(start + v * static_cast<float>(t), 2.0f * span);
  if (p < 0.0f) p += 2.0f * span;
  return p > span ? 2.0f * span - p : p;
}

Rect random_rect(Rng& rng, std::size_t image) {
  const float side = static_cast<float>(image);
  Rect r;
  r.color = random_color(rng);
  r.w = static_cast<float>(rng.uniform(0.2, 0.5)) * side;
  r.h = static_cast<float>(rng.uniform(0.2, 0.5)) * side;
  r.x = static_cast<float>(rng.uniform(0.0, side - r.w));
  r.y = static_cast<float>(rng.uniform(0.0, side - r.h));
  r.vx = static_cast<float>(rng.uniform(-1.5, 1.5));
  r.vy = static_cast<float>(rng.uniform(-1.5, 1.5));
  return r;
}

// Same object, new placement and motion.
Rect moved(Rect r, Rng& rng, std::size_t image) {
  const float side = static_cast<float>(image);
  r.x = static_cast<float>(rng.uniform(0.0, side - r.w));
  r.y = static_cast<float>(rng.uniform(0.0, side - r.h));
  r.vx = static_cast<float>(rng.uniform(-1.5, 1.5));
  r.vy = static_cast<float>(rng.uniform(-1.5, 1.5));
  return r;
}

std::size_t shot_length(Rng& rng) { return static_cast<std::size_t>(rng.between(6, 14)); }

std::string numbered(const std::string& prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return prefix + buf;
}

}  // namespace

std::size_t Script::frames() const {
  std::size_t n = 0;
  for (const auto& s : shots) n += s.length;
  return n;
}

Shot random_shot(Rng& rng, std::size_t image) {
  Shot s;
  s.background = random_color(rng);
  for (auto& g : s.gradient) g = static_cast<float>(rng.uniform(-0.3, 0.3));
  for (std::int64_t n = rng.between(1, 3); n > 0; --n) s.rects.push_back(random_rect(rng, image));
  s.length = shot_length(rng);
  return s;
}

Script random_script(Rng& rng, std::size_t image, std::size_t min_shots, std::size_t max_shots) {
  Script sc;
  const auto n = rng.between(static_cast<std::int64_t>(min_shots), static_cast<std::int64_t>(max_shots));
  for (std::int64_t i = 0; i < n; ++i) sc.shots.push_back(random_shot(rng, image));
  return sc;
}

Frames apply_edit(const Frames& video, const Edit& edit) {
  require_frames(video, "apply_edit");
  const std::size_t t0 = edit.trim_front;
  if (edit.trim_front + edit.trim_back >= video.dim(0)) throw ContractError("apply_edit: trim removes every frame");
  const std::size_t frames = video.dim(0) - edit.trim_front - edit.trim_back;
  const std::size_t h = video.dim(1), w = video.dim(2);
  Frames out({frames, h, w, 3});
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t y = 0; y < h; ++y) {
      const auto sy = std::clamp<std::int64_t>(static_cast<std::int64_t>(y) - edit.shift_y, 0,
                                               static_cast<std::int64_t>(h) - 1);
      for (std::size_t x = 0; x < w; ++x) {
        const auto sx = std::clamp<std::int64_t>(static_cast<std::int64_t>(x) - edit.shift_x, 0,
                                                 static_cast<std::int64_t>(w) - 1);
        for (std::size_t c = 0; c < 3; ++c) {
          out.at({f, y, x, c}) = video.at({t0 + f, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), c}) +
                                 edit.brightness;
        }
      }
    }
  }
  out = make_frames(std::move(out));
  return edit.flip ? hflip(out) : out;
}

Frames render(const Script& script, std::size_t image, const Edit& edit) {
  const std::size_t total = script.frames();
  if (total == 0) throw ContractError("render: script has no frames");
  const float side = static_cast<float>(image);
  Frames raw({total, image, image, 3});
  std::size_t f = 0;
  for (const auto& shot : script.shots) {
    for (std::size_t t = 0; t < shot.length; ++t, ++f) {
      for (std::size_t y = 0; y < image; ++y) {
        for (std::size_t x = 0; x < image; ++x) {
          const float u = image > 1 ? static_cast<float>(x) / (side - 1.0f) : 0.0f;
          Color px;
          for (std::size_t c = 0; c < 3; ++c) px[c] = shot.background[c] + shot.gradient[c] * u;
          for (const auto& r : shot.rects) {
            const float rx = bounce(r.x, r.vx, t, side - r.w), ry = bounce(r.y, r.vy, t, side - r.h);
            const float cx = static_cast<float>(x) + 0.5f, cy = static_cast<float>(y) + 0.5f;
            if (cx >= rx && cx < rx + r.w && cy >= ry && cy < ry + r.h) px = r.color;
          }
          for (std::size_t c = 0; c < 3; ++c) raw.at({f, y, x, c}) = px[c];
        }
      }
    }
  }
  return apply_edit(make_frames(std::move(raw)), edit);
}

Benchmark generate_benchmark(const BenchmarkConfig& cfg, std::uint64_t seed) {
  constexpr std::size_t kVariants = 6;
  if (cfg.queries == 0 || cfg.videos == 0) throw ConfigError("synth: counts must be positive");
  if (cfg.queries * (1 + kVariants) > cfg.videos) {
    throw ConfigError("synth: " + std::to_string(cfg.queries) + " queries need at least " +
                      std::to_string(cfg.queries * (1 + kVariants)) + " corpus videos");
  }
  const std::size_t image = cfg.image;
  Rng root(seed);
  Benchmark b;
  for (std::size_t q = 0; q < cfg.queries; ++q) {
    Rng rng = root.split(q + 1);
    const std::string qid = numbered("q", q);
    const Script query = random_script(rng, image, 3, 6);
    b.queries.push_back(qid);
    b.corpus.push_back({qid, render(query, image)});
    auto& labels = b.annotations.queries[qid];

    for (std::size_t i = 0; i < 2; ++i) {
      Edit e;
      e.brightness = static_cast<float>(rng.uniform(-0.08, 0.08));
      e.shift_x = static_cast<int>(rng.between(-1, 1));
      e.shift_y = static_cast<int>(rng.between(-1, 1));
      e.trim_front = rng.below(4);
      e.trim_back = rng.below(4);
      const std::string id = qid + "_nd" + std::to_string(i);
      b.corpus.push_back({id, render(query, image, e)});
      labels[id] = Label::ND;
    }
    for (std::size_t i = 0; i < 2; ++i) {
      const std::size_t k = query.shots.size();
      const std::size_t keep = (k + 1) / 2 + rng.below(k - (k + 1) / 2);
      const std::size_t start = rng.below(k - keep + 1);
      Script ds;
      for (std::int64_t n = rng.between(1, 2); n > 0; --n) ds.shots.push_back(random_shot(rng, image));
      ds.shots.insert(ds.shots.begin() + static_cast<std::ptrdiff_t>(rng.below(ds.shots.size() + 1)),
                      query.shots.begin() + static_cast<std::ptrdiff_t>(start),
                      query.shots.begin() + static_cast<std::ptrdiff_t>(start + keep));
      Edit e;
      e.brightness = static_cast<float>(rng.uniform(-0.15, 0.15));
      e.shift_x = static_cast<int>(rng.between(-2, 2));
      e.shift_y = static_cast<int>(rng.between(-2, 2));
      e.flip = rng.coin();
      const std::string id = qid + "_ds" + std::to_string(i);
      b.corpus.push_back({id, render(ds, image, e)});
      labels[id] = Label::DS;
    }
    {
      Script cs;
      for (const auto& s : query.shots) {
        Shot n = s;
        n.background = random_color(rng);
        for (auto& g : n.gradient) g = static_cast<float>(rng.uniform(-0.3, 0.3));
        for (auto& r : n.rects) r = moved(r, rng, image);
        n.length = shot_length(rng);
        cs.shots.push_back(n);
      }
      const std::string id = qid + "_cs0";
      b.corpus.push_back({id, render(cs, image)});
      labels[id] = Label::CS;
    }
    {
      Script is;
      for (const auto& s : query.shots) {
        Shot n = random_shot(rng, image);
        n.background = s.background;
        n.gradient = s.gradient;
        is.shots.push_back(n);
      }
      const std::string id = qid + "_is0";
      b.corpus.push_back({id, render(is, image)});
      labels[id] = Label::IS;
    }
  }
  Rng distract = root.split(0xD15);
  for (std::size_t i = 0; b.corpus.size() < cfg.videos; ++i) {
    b.corpus.push_back({numbered("d", i), render(random_script(distract, image, 3, 6), image)});
  }
  Rng train = root.split(0x7A1);
  for (std::size_t i = 0; i < cfg.train_videos; ++i) {
    b.train.push_back({numbered("t", i), render(random_script(train, image, 3, 6), image)});
  }
  return b;
}

void write_benchmark(const Benchmark& b, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "corpus", ec);
  std::filesystem::create_directories(dir / "train", ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  nlohmann::json m;
  m["version"] = 1;
  m["image"] = b.corpus.empty() ? 0 : b.corpus.front().frames.dim(1);
  m["corpus"] = nlohmann::json::array();
  m["train"] = nlohmann::json::array();
  for (const auto& v : b.corpus) {
    write_clip_file(dir / "corpus" / (v.id + ".cslc"), v.frames);
    m["corpus"].push_back({{"id", v.id}, {"frames", v.frames.dim(0)}});
  }
  for (const auto& v : b.train) {
    write_clip_file(dir / "train" / (v.id + ".cslc"), v.frames);
    m["train"].push_back({{"id", v.id}, {"frames", v.frames.dim(0)}});
  }
  m["queries"] = b.queries;
  const std::string text = m.dump(2) + "\n";
  binio::write_file(dir / "manifest.json", std::vector<char>(text.begin(), text.end()));
  write_annotations(b.annotations, dir / "annotations.json");
}

Benchmark read_benchmark(const std::filesystem::path& dir) {
  const auto bytes = binio::read_file(dir / "manifest.json");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("manifest: ") + e.what(), e.byte);
  }
  Benchmark b;
  try {
    for (const auto& v : m.at("corpus")) {
      const std::string id = v.at("id").get<std::string>();
      b.corpus.push_back({id, read_clip_file(dir / "corpus" / (id + ".cslc"))});
    }
    for (const auto& v : m.at("train")) {
      const std::string id = v.at("id").get<std::string>();
      b.train.push_back({id, read_clip_file(dir / "train" / (id + ".cslc"))});
    }
    b.queries = m.at("queries").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what(), 0);
  }
  if (std::filesystem::exists(dir / "annotations.json")) b.annotations = read_annotations(dir / "annotations.json");
  return b;
}

std::vector<Frames> moving_pattern_videos(std::size_t count, std::size_t image, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Frames> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(render(random_script(rng, image, 3, 5), image));
  return out;
}

}  // namespace csl::synth
