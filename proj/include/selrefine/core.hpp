// Copyright 2026 The selrefine Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace selrefine {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised for missing or inconsistent configuration (missing k-logic, bad
// config files). The CLI maps it to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StaleCacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kPatch = 8;
inline constexpr int kLatentChannels = kPatch * kPatch * 3;

// H x W x 3 image with values in [0,1], row-major, channels interleaved.
struct ImageFrame {
  int height = 0;
  int width = 0;
  std::vector<double> rgb;
  std::optional<std::vector<double>> opacity;

  ImageFrame() = default;
  ImageFrame(int h, int w, double fill = 0.0);

  double& at(int y, int x, int c) { return rgb[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return rgb[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  size_t pixels() const { return static_cast<size_t>(height) * width; }

  // Throws InvalidArgument if values are non-finite, out of [0,1], or the
  // dims are not multiples of the codec patch.
  void validate() const;
};

ImageFrame clamp01(const ImageFrame& f);
std::vector<double> luminance(const ImageFrame& f);

// Real-valued grid, used for opacity maps, blur maps and luminance planes.
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(int h, int w, double fill = 0.0) : height(h), width(w), v(static_cast<size_t>(h) * w, fill) {}
  double& at(int y, int x) { return v[static_cast<size_t>(y) * width + x]; }
  double at(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }
};

struct BinaryGrid {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> v;

  BinaryGrid() = default;
  BinaryGrid(int h, int w, uint8_t fill = 0) : height(h), width(w), v(static_cast<size_t>(h) * w, fill) {}
  uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }
  size_t count() const;
  bool operator==(const BinaryGrid&) const = default;
};

// N x h x w x c latent batch, channels innermost.
struct LatentTensor {
  int frames = 0;
  int lat_h = 0;
  int lat_w = 0;
  int channels = 0;
  std::vector<double> values;

  LatentTensor() = default;
  LatentTensor(int n, int h, int w, int c, double fill = 0.0);

  size_t frame_size() const { return static_cast<size_t>(lat_h) * lat_w * channels; }
  size_t pixel_offset(int n, int y, int x) const {
    return ((static_cast<size_t>(n) * lat_h + y) * lat_w + x) * channels;
  }
  double* frame(int n) { return values.data() + n * frame_size(); }
  const double* frame(int n) const { return values.data() + n * frame_size(); }
  double* pixel(int n, int y, int x) { return values.data() + pixel_offset(n, y, x); }
  const double* pixel(int n, int y, int x) const { return values.data() + pixel_offset(n, y, x); }
  bool same_shape(const LatentTensor& o) const {
    return frames == o.frames && lat_h == o.lat_h && lat_w == o.lat_w && channels == o.channels;
  }
};

enum class ScheduleKind { Cosine, Linear };

ScheduleKind parse_schedule_kind(const std::string& s);

struct NoiseSchedule {
  int total_steps = 0;
  std::vector<double> abar;
};

NoiseSchedule build_schedule(int S, ScheduleKind kind = ScheduleKind::Cosine);

// Space-to-depth by 8 followed by a fixed orthogonal 192x192 channel mix.
class Codec {
 public:
  static constexpr uint64_t kSeed = 0xC0DEC;

  static const Codec& instance();

  LatentTensor encode(const std::vector<ImageFrame>& batch) const;
  // No clamping: callers clamp with clamp01 at the image emission boundary.
  std::vector<ImageFrame> decode(const LatentTensor& z) const;

  // Row-major 192x192 orthogonal matrix; latent = Q * patch.
  const std::vector<double>& matrix() const { return q_; }

  // Patch vector index of (dy, dx, channel) inside an 8x8x3 block.
  static int patch_index(int dy, int dx, int c) { return (dy * kPatch + dx) * 3 + c; }

 private:
  Codec();
  std::vector<double> q_;
  std::vector<double> qt_;
};

inline LatentTensor encode(const std::vector<ImageFrame>& batch) { return Codec::instance().encode(batch); }
inline std::vector<ImageFrame> decode(const LatentTensor& z) { return Codec::instance().decode(z); }

// SPTX tensor container: magic, u8 rank, u32 LE dims, f32 LE payload.
struct TensorFile {
  std::vector<uint32_t> dims;
  std::vector<float> data;
};

std::vector<uint8_t> serialize_tensor(const TensorFile& t);
TensorFile parse_tensor(const std::vector<uint8_t>& bytes);
void write_tensor(const std::string& path, const TensorFile& t);
TensorFile read_tensor(const std::string& path);
TensorFile to_tensor_file(const LatentTensor& z);
LatentTensor from_tensor_file(const TensorFile& t);

// 8-bit PNG I/O. RGB frames are clamped and rounded on write.
void write_png(const std::string& path, const ImageFrame& f);
ImageFrame read_png(const std::string& path);
void write_gray_png(const std::string& path, const Grid& g);
void write_mask_png(const std::string& path, const BinaryGrid& m);
Grid read_gray_png(const std::string& path);
std::vector<uint8_t> encode_png(const ImageFrame& f);

}  // namespace selrefine
