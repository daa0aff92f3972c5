#pragma once

#include <filesystem>
#include <vector>

#include "csl/tensor.hpp"

// Videos and clips are float tensors of shape [frames, H, W, 3] with values in
// [0, 1]. A clip is simply a video window of exactly F frames.
namespace csl {

using Frames = Tensor<float>;

// Validates [T,H,W,3] and clamps every value into [0,1]. NaN becomes 0.
Frames make_frames(Tensor<float> raw);

void require_frames(const Frames& v, const char* what);

inline std::size_t frame_count(const Frames& v) { return v.dim(0); }

// frames[start, start + count)
Frames frame_window(const Frames& video, std::size_t start, std::size_t count);

// Concatenates along the frame axis; spatial sizes must agree.
Frames concat_frames(const std::vector<Frames>& parts);

// Mirrors the width axis of every frame.
Frames hflip(const Frames& clip);

// Raw clip file: "CSLC", F u32, H u32, W u32, then F*H*W*3 f32 little-endian.
std::vector<char> encode_clip_file(const Frames& frames);
Frames decode_clip_file(const std::vector<char>& bytes);
void write_clip_file(const std::filesystem::path& path, const Frames& frames);
Frames read_clip_file(const std::filesystem::path& path);

}  // namespace csl
