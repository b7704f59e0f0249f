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

#include "selrefine/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "selrefine/kernels.hpp"

namespace selrefine {

ImageFrame::ImageFrame(int h, int w, double fill)
    : height(h), width(w), rgb(static_cast<size_t>(h) * w * 3, fill) {}

void ImageFrame::validate() const {
  if (height <= 0 || width <= 0 || height % kPatch != 0 || width % kPatch != 0)
    throw InvalidArgument("frame dims must be positive multiples of 8, got " + std::to_string(height) + "x" +
                          std::to_string(width));
  if (rgb.size() != pixels() * 3) throw InvalidArgument("frame rgb buffer has wrong size");
  for (double v : rgb)
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw InvalidArgument("frame rgb value outside [0,1]");
  if (opacity) {
    if (opacity->size() != pixels()) throw InvalidArgument("opacity buffer has wrong size");
    for (double v : *opacity)
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw InvalidArgument("opacity value outside [0,1]");
  }
}

ImageFrame clamp01(const ImageFrame& f) {
  ImageFrame out = f;
  for (double& v : out.rgb) v = std::clamp(v, 0.0, 1.0);
  return out;
}

std::vector<double> luminance(const ImageFrame& f) {
  std::vector<double> y(f.pixels());
  for (size_t i = 0; i < y.size(); ++i)
    y[i] = 0.299 * f.rgb[3 * i] + 0.587 * f.rgb[3 * i + 1] + 0.114 * f.rgb[3 * i + 2];
  return y;
}

size_t BinaryGrid::count() const {
  size_t n = 0;
  for (uint8_t b : v) n += b != 0;
  return n;
}

LatentTensor::LatentTensor(int n, int h, int w, int c, double fill)
    : frames(n), lat_h(h), lat_w(w), channels(c), values(static_cast<size_t>(n) * h * w * c, fill) {}

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "cosine") return ScheduleKind::Cosine;
  if (s == "linear") return ScheduleKind::Linear;
  throw InvalidArgument("unknown schedule kind: " + s);
}

NoiseSchedule build_schedule(int S, ScheduleKind kind) {
  if (S < 2) throw InvalidArgument("schedule needs S >= 2");
  NoiseSchedule s;
  s.total_steps = S;
  s.abar.resize(S + 1);
  for (int u = 0; u <= S; ++u) {
    const double x = static_cast<double>(u) / S;
    if (kind == ScheduleKind::Cosine) {
      const double c = std::cos(std::numbers::pi / 2.0 * (1.0 - x) * 0.98);
      s.abar[u] = c * c;
    } else {
      s.abar[u] = 0.01 + 0.99 * x;
    }
  }
  const double end = s.abar[S];
  for (double& a : s.abar) a /= end;
  s.abar[S] = 1.0;
  return s;
}

Codec::Codec() : q_(kLatentChannels * kLatentChannels), qt_(kLatentChannels * kLatentChannels) {
  const int n = kLatentChannels;
  std::mt19937_64 rng(kSeed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (double& v : q_) v = nd(rng);
  // Modified Gram-Schmidt over rows, two passes for orthogonality to round-off.
  for (int i = 0; i < n; ++i) {
    double* ri = q_.data() + static_cast<size_t>(i) * n;
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j < i; ++j) {
        const double* rj = q_.data() + static_cast<size_t>(j) * n;
        double d = 0.0;
        for (int k = 0; k < n; ++k) d += ri[k] * rj[k];
        for (int k = 0; k < n; ++k) ri[k] -= d * rj[k];
      }
    }
    double norm = 0.0;
    for (int k = 0; k < n; ++k) norm += ri[k] * ri[k];
    norm = std::sqrt(norm);
    for (int k = 0; k < n; ++k) ri[k] /= norm;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) qt_[static_cast<size_t>(j) * n + i] = q_[static_cast<size_t>(i) * n + j];
}

const Codec& Codec::instance() {
  static const Codec codec;
  return codec;
}

LatentTensor Codec::encode(const std::vector<ImageFrame>& batch) const {
  if (batch.empty()) throw InvalidArgument("encode: empty batch");
  const int H = batch[0].height, W = batch[0].width;
  for (const auto& f : batch) {
    if (f.height != H || f.width != W) throw InvalidArgument("encode: frames differ in size");
    if (H <= 0 || W <= 0 || H % kPatch || W % kPatch)
      throw InvalidArgument("encode: dims must be multiples of 8");
    if (f.rgb.size() != f.pixels() * 3) throw InvalidArgument("encode: rgb buffer has wrong size");
  }
  LatentTensor z(static_cast<int>(batch.size()), H / kPatch, W / kPatch, kLatentChannels);
  std::vector<double> patch(kLatentChannels);
  for (int n = 0; n < z.frames; ++n) {
    const auto& f = batch[n];
    for (int by = 0; by < z.lat_h; ++by)
      for (int bx = 0; bx < z.lat_w; ++bx) {
        for (int dy = 0; dy < kPatch; ++dy)
          for (int dx = 0; dx < kPatch; ++dx)
            for (int c = 0; c < 3; ++c) patch[patch_index(dy, dx, c)] = f.at(by * kPatch + dy, bx * kPatch + dx, c);
        kernels::matvec(kLatentChannels, kLatentChannels, q_.data(), patch.data(), z.pixel(n, by, bx));
      }
  }
  return z;
}

std::vector<ImageFrame> Codec::decode(const LatentTensor& z) const {
  if (z.channels != kLatentChannels || z.lat_h <= 0 || z.lat_w <= 0 || z.frames <= 0 ||
      z.values.size() != static_cast<size_t>(z.frames) * z.frame_size())
    throw InvalidArgument("decode: latent shape does not match the codec");
  std::vector<ImageFrame> out;
  out.reserve(z.frames);
  std::vector<double> patch(kLatentChannels);
  for (int n = 0; n < z.frames; ++n) {
    ImageFrame f(z.lat_h * kPatch, z.lat_w * kPatch);
    for (int by = 0; by < z.lat_h; ++by)
      for (int bx = 0; bx < z.lat_w; ++bx) {
        kernels::matvec(kLatentChannels, kLatentChannels, qt_.data(), z.pixel(n, by, bx), patch.data());
        for (int dy = 0; dy < kPatch; ++dy)
          for (int dx = 0; dx < kPatch; ++dx)
            for (int c = 0; c < 3; ++c) f.at(by * kPatch + dy, bx * kPatch + dx, c) = patch[patch_index(dy, dx, c)];
      }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace selrefine
