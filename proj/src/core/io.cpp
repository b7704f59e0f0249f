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

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include "selrefine/core.hpp"

namespace selrefine {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'T', 'X'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) | (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

uint8_t to_u8(double v) { return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

std::vector<uint8_t> serialize_tensor(const TensorFile& t) {
  if (t.dims.size() > 255) throw InvalidArgument("tensor rank exceeds 255");
  size_t count = 1;
  for (uint32_t d : t.dims) count *= d;
  if (count != t.data.size()) throw InvalidArgument("tensor payload does not match dims");
  std::vector<uint8_t> out(kMagic, kMagic + 4);
  out.push_back(static_cast<uint8_t>(t.dims.size()));
  for (uint32_t d : t.dims) put_u32(out, d);
  for (float f : t.data) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  return out;
}

TensorFile parse_tensor(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw InvalidArgument("not an SPTX tensor");
  TensorFile t;
  const size_t rank = bytes[4];
  size_t pos = 5;
  if (bytes.size() < pos + 4 * rank) throw InvalidArgument("truncated SPTX header");
  size_t count = 1;
  for (size_t i = 0; i < rank; ++i, pos += 4) {
    t.dims.push_back(get_u32(bytes.data() + pos));
    count *= t.dims.back();
  }
  if (bytes.size() != pos + 4 * count) throw InvalidArgument("SPTX payload length mismatch");
  t.data.resize(count);
  for (size_t i = 0; i < count; ++i, pos += 4) {
    const uint32_t bits = get_u32(bytes.data() + pos);
    std::memcpy(&t.data[i], &bits, 4);
  }
  return t;
}

void write_tensor(const std::string& path, const TensorFile& t) {
  const auto bytes = serialize_tensor(t);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TensorFile read_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_tensor(bytes);
}

TensorFile to_tensor_file(const LatentTensor& z) {
  TensorFile t;
  t.dims = {static_cast<uint32_t>(z.frames), static_cast<uint32_t>(z.lat_h), static_cast<uint32_t>(z.lat_w),
            static_cast<uint32_t>(z.channels)};
  t.data.assign(z.values.begin(), z.values.end());
  return t;
}

LatentTensor from_tensor_file(const TensorFile& t) {
  if (t.dims.size() != 4) throw InvalidArgument("latent tensor must have rank 4");
  LatentTensor z(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]),
                 static_cast<int>(t.dims[3]));
  if (t.data.size() != z.values.size()) throw InvalidArgument("latent tensor payload does not match dims");
  std::copy(t.data.begin(), t.data.end(), z.values.begin());
  return z;
}

namespace {

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

void mem_write(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void mem_flush(png_structp) {}

// Writes rows with fixed compression settings so output bytes depend
// only on pixel data.
std::vector<uint8_t> encode_rows(int width, int height, int channels, const std::vector<uint8_t>& px,
                                 int bit_depth = 8) {
  std::vector<uint8_t> out;
  PngWriter w;
  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!w.png) throw std::runtime_error("png_create_write_struct failed");
  w.info = png_create_info_struct(w.png);
  if (!w.info) throw std::runtime_error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(w.png))) throw std::runtime_error("libpng write error");
  png_set_write_fn(w.png, &out, mem_write, mem_flush);
  png_set_IHDR(w.png, w.info, width, height, bit_depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(w.png, 6);
  png_write_info(w.png, w.info);
  if (bit_depth < 8) png_set_packing(w.png);
  for (int y = 0; y < height; ++y)
    png_write_row(w.png, const_cast<png_bytep>(px.data() + static_cast<size_t>(y) * width * channels));
  png_write_end(w.png, nullptr);
  return out;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Reads any 8/16-bit PNG as 8-bit gray or RGB.
std::vector<uint8_t> read_rows(const std::string& path, int want_channels, int& width, int& height) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("cannot open " + path);
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> guard(fp, &std::fclose);
  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) throw std::runtime_error("png_create_read_struct failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw std::runtime_error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error("libpng read error in " + path);
  png_init_io(r.png, fp);
  png_read_info(r.png, r.info);
  width = static_cast<int>(png_get_image_width(r.png, r.info));
  height = static_cast<int>(png_get_image_height(r.png, r.info));
  const int color = png_get_color_type(r.png, r.info);
  if (png_get_bit_depth(r.png, r.info) == 16) png_set_strip_16(r.png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(r.png, r.info) < 8) png_set_expand_gray_1_2_4_to_8(r.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  const bool is_gray = color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA;
  if (want_channels == 3 && is_gray) png_set_gray_to_rgb(r.png);
  if (want_channels == 1 && !is_gray) png_set_rgb_to_gray_fixed(r.png, 1, -1, -1);
  png_read_update_info(r.png, r.info);
  std::vector<uint8_t> px(static_cast<size_t>(width) * height * want_channels);
  for (int y = 0; y < height; ++y) png_read_row(r.png, px.data() + static_cast<size_t>(y) * width * want_channels, nullptr);
  png_read_end(r.png, nullptr);
  return px;
}

}  // namespace

std::vector<uint8_t> encode_png(const ImageFrame& f) {
  std::vector<uint8_t> px(f.rgb.size());
  for (size_t i = 0; i < px.size(); ++i) px[i] = to_u8(f.rgb[i]);
  return encode_rows(f.width, f.height, 3, px);
}

void write_png(const std::string& path, const ImageFrame& f) { write_file(path, encode_png(f)); }

ImageFrame read_png(const std::string& path) {
  int w = 0, h = 0;
  const auto px = read_rows(path, 3, w, h);
  ImageFrame f(h, w);
  for (size_t i = 0; i < px.size(); ++i) f.rgb[i] = px[i] / 255.0;
  return f;
}

void write_gray_png(const std::string& path, const Grid& g) {
  std::vector<uint8_t> px(g.v.size());
  for (size_t i = 0; i < px.size(); ++i) px[i] = to_u8(g.v[i]);
  write_file(path, encode_rows(g.width, g.height, 1, px));
}

void write_mask_png(const std::string& path, const BinaryGrid& m) {
  std::vector<uint8_t> px(m.v.size());
  for (size_t i = 0; i < px.size(); ++i) px[i] = m.v[i] ? 1 : 0;
  write_file(path, encode_rows(m.width, m.height, 1, px, 1));
}

Grid read_gray_png(const std::string& path) {
  int w = 0, h = 0;
  const auto px = read_rows(path, 1, w, h);
  Grid g(h, w);
  for (size_t i = 0; i < px.size(); ++i) g.v[i] = px[i] / 255.0;
  return g;
}

}  // namespace selrefine
