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

#include <string>
#include <tuple>
#include <vector>

#include "selrefine/core.hpp"

namespace selrefine::masks {

struct MaskParams {
  int blur_window = 7;
  int smooth_size = 5;
  double tau_o = 0.5;
  bool blur_detection = true;
};

// Local variance of the 3x3 Laplacian of luminance over a window x window
// neighbourhood (edge replication on both stages).
Grid laplacian_blur_map(const ImageFrame& frame, int window = 7);

// 256-bin Otsu on values in [0,1]; returns the winning bin center.
double otsu_threshold(const Grid& values);
double otsu_threshold(const std::vector<double>& values);

// Empty unless the smoothed map spans at least this max/min ratio.
inline constexpr double kMinBlurContrast = 4.0;

BinaryGrid blur_mask(const Grid& blur_map, int smooth_size = 5);
BinaryGrid opacity_mask(const Grid& opacity, double tau_o = 0.5);

BinaryGrid downsample_mask(const BinaryGrid& mask, int factor);

struct RefinementMask {
  BinaryGrid full;
  // levels[i] is max-pooled by factors[i]; factors[0] == 1.
  std::vector<int> factors;
  std::vector<BinaryGrid> levels;

  const BinaryGrid& level_for(int factor) const;
};

std::vector<RefinementMask> combine_masks(const std::vector<BinaryGrid>& blur, const std::vector<BinaryGrid>& opac);
RefinementMask make_refinement_mask(const BinaryGrid& combined);

struct Block {
  int frame = 0;
  int row = 0;
  int col = 0;
  bool operator==(const Block&) const = default;
  auto operator<=>(const Block&) const = default;
};

struct BlockSet {
  int block_size = 4;
  int halo = 1;
  int grid_h = 0;
  int grid_w = 0;
  std::vector<Block> active;

  int blocks_per_frame() const;
};

// Blocks of one frame's latent-scale mask; frame index stamped into each block.
BlockSet tile_blocks(const BinaryGrid& mask, int b = 4, int halo = 1, int frame = 0);
BlockSet tile_blocks(const std::vector<BinaryGrid>& masks, int b = 4, int halo = 1);

std::string blockset_to_json(const BlockSet& set);
BlockSet blockset_from_json(const std::string& text);

Grid opacity_grid(const ImageFrame& frame);

// Opacity plus optional blur mask for one regression frame.
BinaryGrid frame_mask(const ImageFrame& frame, const MaskParams& p);

}  // namespace selrefine::masks
