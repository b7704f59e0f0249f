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

#include "selrefine/regression.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace selrefine::regression {

ImageFrame shift_frame(const ImageFrame& f, int dx, int dy) {
  ImageFrame out(f.height, f.width);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = f.at(std::clamp(y - dy, 0, f.height - 1), std::clamp(x - dx, 0, f.width - 1), c);
  return out;
}

namespace {

// Separable 1-D filter with edge replication along rows then columns.
ImageFrame separable(const ImageFrame& f, const std::vector<double>& k) {
  const int r = static_cast<int>(k.size() / 2);
  ImageFrame tmp(f.height, f.width), out(f.height, f.width);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int j = -r; j <= r; ++j) s += k[j + r] * f.at(std::clamp(y + j, 0, f.height - 1), x, c);
        tmp.at(y, x, c) = s;
      }
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int j = -r; j <= r; ++j) s += k[j + r] * tmp.at(y, std::clamp(x + j, 0, f.width - 1), c);
        out.at(y, x, c) = s;
      }
  return out;
}

}  // namespace

ImageFrame box_blur(const ImageFrame& f, int radius) {
  if (radius <= 0) return f;
  return separable(f, std::vector<double>(2 * radius + 1, 1.0 / (2 * radius + 1)));
}

ImageFrame gaussian_blur(const ImageFrame& f, double sigma) {
  if (sigma <= 1e-9) return f;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int j = -r; j <= r; ++j) sum += k[j + r] = std::exp(-0.5 * (j / sigma) * (j / sigma));
  for (double& v : k) v /= sum;
  return separable(f, k);
}

RegressionOutput toy_regress(const ImageFrame& i0, const ImageFrame& i1, const std::vector<double>& targets,
                             const ArtifactParams& p, uint64_t seed) {
  if (i0.height != i1.height || i0.width != i1.width) throw InvalidArgument("toy_regress: input dims differ");
  for (size_t i = 0; i < targets.size(); ++i) {
    if (!(targets[i] >= 0.0 && targets[i] <= 1.0)) throw InvalidArgument("toy_regress: target outside [0,1]");
    if (i > 0 && targets[i] < targets[i - 1]) throw InvalidArgument("toy_regress: targets not sorted");
  }
  const int H = i0.height, W = i0.width;
  const int dx = static_cast<int>(std::lround(p.disparity_x)), dy = static_cast<int>(std::lround(p.disparity_y));
  RegressionOutput out;
  for (size_t ti = 0; ti < targets.size(); ++ti) {
    const double t = targets[ti];
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(ti),
                      0x72656772u};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int s0x = static_cast<int>(std::lround(t * p.disparity_x));
    const int s0y = static_cast<int>(std::lround(t * p.disparity_y));
    const ImageFrame a = shift_frame(i0, s0x, s0y);
    const ImageFrame b = shift_frame(i1, s0x - dx, s0y - dy);
    ImageFrame x(H, W);
    for (size_t i = 0; i < x.rgb.size(); ++i) x.rgb[i] = (1.0 - t) * a.rgb[i] + t * b.rgb[i];

    const double m = std::min(t, 1.0 - t) / 0.5;
    x = gaussian_blur(x, p.blur_sigma_max * m);

    std::vector<double> opacity(static_cast<size_t>(H) * W);
    for (double& o : opacity) o = 0.8 + 0.2 * unit(rng);

    const int count = static_cast<int>(std::lround(p.count_min + (p.count_max - p.count_min) * m));
    const double area = p.area_min + (p.area_max - p.area_min) * m;
    BinaryGrid art(H, W);
    if (count > 0 && area > 0.0) {
      const double each = area * H * W / count;
      for (int e = 0; e < count; ++e) {
        const double aspect = 0.5 + 1.5 * unit(rng);
        const double ra = std::sqrt(each / std::numbers::pi * aspect);
        const double rb = std::sqrt(each / std::numbers::pi / aspect);
        const double cx = W * unit(rng), cy = H * unit(rng);
        for (int y = 0; y < H; ++y)
          for (int xx = 0; xx < W; ++xx) {
            const double u = (xx - cx) / ra, v = (y - cy) / rb;
            if (u * u + v * v <= 1.0) art.at(y, xx) = 1;
          }
      }
    }
    ImageFrame noise(H, W);
    for (double& v : noise.rgb) v = unit(rng);
    noise = box_blur(noise, 2);
    const ImageFrame smeared = box_blur(x, 3);
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        const size_t pi = static_cast<size_t>(y) * W + xx;
        if (!art.at(y, xx)) continue;
        for (int c = 0; c < 3; ++c) x.at(y, xx, c) = 0.5 * smeared.at(y, xx, c) + 0.5 * noise.at(y, xx, c);
        opacity[pi] = 0.4 * unit(rng);
      }
    for (double& v : x.rgb) v = std::clamp(v, 0.0, 1.0);
    x.opacity = std::move(opacity);
    out.frames.push_back(std::move(x));
    out.artifacts.push_back(std::move(art));
  }
  return out;
}

RegressionOutput ToyRegressor::regress(const ImageFrame& i0, const ImageFrame& i1, const std::vector<double>& targets,
                                       uint64_t seed) const {
  return toy_regress(i0, i1, targets, p_, seed);
}

}  // namespace selrefine::regression
