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

#include "selrefine/masks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <json.hpp>

namespace selrefine::masks {

namespace {

Grid box_filter(const Grid& g, int size) {
  const int r = size / 2;
  Grid out(g.height, g.width);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      double s = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          s += g.at(std::clamp(y + dy, 0, g.height - 1), std::clamp(x + dx, 0, g.width - 1));
      out.at(y, x) = s / (size * size);
    }
  return out;
}

}  // namespace

Grid laplacian_blur_map(const ImageFrame& frame, int window) {
  if (window < 3 || window % 2 == 0) throw InvalidArgument("blur window must be odd and >= 3");
  const int H = frame.height, W = frame.width;
  const auto lum = luminance(frame);
  auto L = [&](int y, int x) { return lum[static_cast<size_t>(std::clamp(y, 0, H - 1)) * W + std::clamp(x, 0, W - 1)]; };
  Grid lap(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) lap.at(y, x) = L(y - 1, x) + L(y + 1, x) + L(y, x - 1) + L(y, x + 1) - 4.0 * L(y, x);
  const int r = window / 2;
  const double n = static_cast<double>(window) * window;
  Grid out(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double mean = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) mean += lap.at(std::clamp(y + dy, 0, H - 1), std::clamp(x + dx, 0, W - 1));
      mean /= n;
      double var = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const double d = lap.at(std::clamp(y + dy, 0, H - 1), std::clamp(x + dx, 0, W - 1)) - mean;
          var += d * d;
        }
      out.at(y, x) = var / n;
    }
  return out;
}

double otsu_threshold(const std::vector<double>& values) {
  if (values.empty()) throw InvalidArgument("otsu_threshold: empty grid");
  constexpr int kBins = 256;
  // Each bin is split at its center so that class membership (v <= center)
  // is exact for every candidate threshold.
  std::array<double, 2 * kBins> cnt{}, sum{};
  double lo = values[0], hi = values[0];
  for (double v : values) {
    const double c = std::clamp(v, 0.0, 1.0);
    const int b = std::min(kBins - 1, static_cast<int>(c * kBins));
    const double center = (b + 0.5) / kBins;
    const int sub = 2 * b + (c <= center ? 0 : 1);
    cnt[sub] += 1.0;
    sum[sub] += c;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo == hi) return lo;
  const double n = static_cast<double>(values.size());
  double total = 0.0;
  for (double s : sum) total += s;
  double n0 = 0.0, s0 = 0.0, best = 0.0;
  int best_k = -1;
  for (int k = 0; k < kBins; ++k) {
    n0 += cnt[2 * k];
    s0 += sum[2 * k];
    const double n1 = n - n0;
    if (n0 > 0.0 && n1 > 0.0) {
      const double m0 = s0 / n0, m1 = (total - s0) / n1;
      const double var = (n0 / n) * (n1 / n) * (m0 - m1) * (m0 - m1);
      if (var > best) {
        best = var;
        best_k = k;
      }
    }
    n0 += cnt[2 * k + 1];
    s0 += sum[2 * k + 1];
  }
  if (best_k < 0) {
    double mean = 0.0;
    for (double v : values) mean += v;
    return mean / n;
  }
  return (best_k + 0.5) / kBins;
}

double otsu_threshold(const Grid& values) { return otsu_threshold(values.v); }

BinaryGrid blur_mask(const Grid& blur_map, int smooth_size) {
  Grid s = box_filter(blur_map, smooth_size);
  const auto [mn, mx] = std::minmax_element(s.v.begin(), s.v.end());
  const double lo = *mn, span = *mx - *mn;
  // Uniform sharpness (including a constant map): Otsu would only split off
  // the border band that edge replication weakens.
  if (!(lo * kMinBlurContrast < *mx)) return BinaryGrid(s.height, s.width);
  for (double& v : s.v) v = 1.0 - (v - lo) / span;
  const double t = otsu_threshold(s);
  BinaryGrid m(s.height, s.width);
  for (size_t i = 0; i < s.v.size(); ++i) m.v[i] = s.v[i] > t ? 1 : 0;
  return m;
}

BinaryGrid opacity_mask(const Grid& opacity, double tau_o) {
  if (!(tau_o >= 0.0 && tau_o <= 1.0)) throw InvalidArgument("opacity threshold outside [0,1]");
  BinaryGrid m(opacity.height, opacity.width);
  for (size_t i = 0; i < opacity.v.size(); ++i) m.v[i] = opacity.v[i] < tau_o ? 1 : 0;
  return m;
}

BinaryGrid downsample_mask(const BinaryGrid& mask, int factor) {
  if (factor < 1 || mask.height % factor || mask.width % factor)
    throw InvalidArgument("downsample_mask: factor must divide mask dims");
  BinaryGrid out(mask.height / factor, mask.width / factor);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(y, x)) out.at(y / factor, x / factor) = 1;
  return out;
}

const BinaryGrid& RefinementMask::level_for(int factor) const {
  for (size_t i = 0; i < factors.size(); ++i)
    if (factors[i] == factor) return levels[i];
  throw InvalidArgument("refinement mask has no level for factor " + std::to_string(factor));
}

RefinementMask make_refinement_mask(const BinaryGrid& combined) {
  RefinementMask m;
  m.full = combined;
  m.factors.push_back(1);
  m.levels.push_back(combined);
  for (int f = 2; f <= kPatch; f *= 2) {
    const BinaryGrid& prev = m.levels.back();
    if (prev.height % 2 || prev.width % 2) break;
    m.factors.push_back(f);
    m.levels.push_back(downsample_mask(prev, 2));
  }
  return m;
}

std::vector<RefinementMask> combine_masks(const std::vector<BinaryGrid>& blur, const std::vector<BinaryGrid>& opac) {
  if (blur.size() != opac.size()) throw InvalidArgument("combine_masks: frame counts differ");
  std::vector<RefinementMask> out;
  for (size_t i = 0; i < blur.size(); ++i) {
    if (blur[i].height != opac[i].height || blur[i].width != opac[i].width)
      throw InvalidArgument("combine_masks: mask shapes differ");
    BinaryGrid c(blur[i].height, blur[i].width);
    for (size_t j = 0; j < c.v.size(); ++j) c.v[j] = (blur[i].v[j] | opac[i].v[j]) ? 1 : 0;
    out.push_back(make_refinement_mask(c));
  }
  return out;
}

int BlockSet::blocks_per_frame() const { return grid_h * grid_w; }

BlockSet tile_blocks(const BinaryGrid& mask, int b, int halo, int frame) {
  if (b < 1) throw InvalidArgument("tile_blocks: block size must be >= 1");
  if (halo < 0) throw InvalidArgument("tile_blocks: halo must be >= 0");
  BlockSet s;
  s.block_size = b;
  s.halo = halo;
  s.grid_h = (mask.height + b - 1) / b;
  s.grid_w = (mask.width + b - 1) / b;
  for (int r = 0; r < s.grid_h; ++r)
    for (int c = 0; c < s.grid_w; ++c) {
      bool any = false;
      for (int y = r * b; y < std::min(mask.height, (r + 1) * b) && !any; ++y)
        for (int x = c * b; x < std::min(mask.width, (c + 1) * b); ++x)
          if (mask.at(y, x)) {
            any = true;
            break;
          }
      if (any) s.active.push_back({frame, r, c});
    }
  return s;
}

BlockSet tile_blocks(const std::vector<BinaryGrid>& masks, int b, int halo) {
  BlockSet all;
  all.block_size = b;
  all.halo = halo;
  for (size_t f = 0; f < masks.size(); ++f) {
    BlockSet one = tile_blocks(masks[f], b, halo, static_cast<int>(f));
    if (f == 0) {
      all.grid_h = one.grid_h;
      all.grid_w = one.grid_w;
    } else if (one.grid_h != all.grid_h || one.grid_w != all.grid_w) {
      throw InvalidArgument("tile_blocks: masks differ in shape");
    }
    all.active.insert(all.active.end(), one.active.begin(), one.active.end());
  }
  return all;
}

std::string blockset_to_json(const BlockSet& set) {
  nlohmann::json j;
  j["block_size"] = set.block_size;
  j["halo"] = set.halo;
  j["grid_h"] = set.grid_h;
  j["grid_w"] = set.grid_w;
  j["active"] = nlohmann::json::array();
  for (const auto& b : set.active) j["active"].push_back({b.frame, b.row, b.col});
  return j.dump();
}

BlockSet blockset_from_json(const std::string& text) {
  BlockSet s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.block_size = j.at("block_size").get<int>();
    s.halo = j.at("halo").get<int>();
    s.grid_h = j.at("grid_h").get<int>();
    s.grid_w = j.at("grid_w").get<int>();
    for (const auto& t : j.at("active")) s.active.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed block set JSON: ") + e.what());
  }
  return s;
}

Grid opacity_grid(const ImageFrame& frame) {
  Grid g(frame.height, frame.width, 1.0);
  if (frame.opacity) g.v = *frame.opacity;
  return g;
}

BinaryGrid frame_mask(const ImageFrame& frame, const MaskParams& p) {
  BinaryGrid m = opacity_mask(opacity_grid(frame), p.tau_o);
  if (p.blur_detection) {
    const BinaryGrid b = blur_mask(laplacian_blur_map(frame, p.blur_window), p.smooth_size);
    for (size_t i = 0; i < m.v.size(); ++i) m.v[i] |= b.v[i];
  }
  return m;
}

}  // namespace selrefine::masks
