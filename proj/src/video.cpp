#include "csl/video.hpp"

#include <algorithm>
#include <cmath>

#include "csl/binio.hpp"

namespace csl {

void require_frames(const Frames& v, const char* what) {
  if (v.rank() != 4 || v.dim(3) != 3) {
    throw ShapeError(std::string(what) + ": expected [frames,H,W,3], got " + shape_str(v.shape()));
  }
}

Frames make_frames(Tensor<float> raw) {
  require_frames(raw, "make_frames");
  for (auto& x : raw.data()) x = std::isnan(x) ? 0.0f : std::clamp(x, 0.0f, 1.0f);
  return raw;
}

Frames frame_window(const Frames& video, std::size_t start, std::size_t count) {
  require_frames(video, "frame_window");
  if (count == 0 || start + count > video.dim(0)) {
    throw ContractError("frame window [" + std::to_string(start) + "," + std::to_string(start + count) +
                        ") outside video of " + std::to_string(video.dim(0)) + " frames");
  }
  const std::size_t per = video.numel() / video.dim(0);
  std::vector<float> out(video.ptr() + start * per, video.ptr() + (start + count) * per);
  return Frames({count, video.dim(1), video.dim(2), 3}, std::move(out));
}

Frames concat_frames(const std::vector<Frames>& parts) {
  if (parts.empty()) throw ContractError("concat_frames: nothing to concatenate");
  std::vector<float> out;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_frames(p, "concat_frames");
    if (p.dim(1) != parts[0].dim(1) || p.dim(2) != parts[0].dim(2)) {
      throw ShapeError("concat_frames: " + shape_str(p.shape()) + " vs " + shape_str(parts[0].shape()));
    }
    out.insert(out.end(), p.vec().begin(), p.vec().end());
    total += p.dim(0);
  }
  return Frames({total, parts[0].dim(1), parts[0].dim(2), 3}, std::move(out));
}

Frames hflip(const Frames& clip) {
  require_frames(clip, "hflip");
  const std::size_t rows = clip.dim(0) * clip.dim(1), w = clip.dim(2);
  Frames out(clip.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const float* src = clip.ptr() + r * w * 3;
    float* dst = out.ptr() + r * w * 3;
    for (std::size_t x = 0; x < w; ++x) std::copy_n(src + (w - 1 - x) * 3, 3, dst + x * 3);
  }
  return out;
}

std::vector<char> encode_clip_file(const Frames& frames) {
  require_frames(frames, "clip file");
  binio::Writer w;
  w.magic("CSLC");
  for (std::size_t a = 0; a < 3; ++a) w.u32(static_cast<std::uint32_t>(frames.dim(a)));
  w.f32s(frames.ptr(), frames.numel());
  return w.take();
}

Frames decode_clip_file(const std::vector<char>& bytes) {
  binio::Reader r(bytes);
  r.expect_magic("CSLC", "clip file");
  std::size_t dims[3];
  for (auto& d : dims) {
    const std::uint64_t at = r.offset();
    d = r.u32("clip dims");
    if (d == 0) throw FormatError("zero dimension in clip file", at);
  }
  const std::uint64_t n = static_cast<std::uint64_t>(dims[0]) * dims[1] * dims[2] * 3;
  if (n * sizeof(float) != r.remaining()) {
    throw FormatError("clip payload has " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(n * sizeof(float)),
                      r.offset());
  }
  std::vector<float> data(n);
  r.f32s(data.data(), n, "clip payload");
  return make_frames(Frames({dims[0], dims[1], dims[2], 3}, std::move(data)));
}

void write_clip_file(const std::filesystem::path& path, const Frames& frames) {
  binio::write_file(path, encode_clip_file(frames));
}

Frames read_clip_file(const std::filesystem::path& path) { return decode_clip_file(binio::read_file(path)); }

}  // namespace csl
