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

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "selrefine/core.hpp"
#include "selrefine/masks.hpp"

namespace selrefine::diffusion {

// Standard-normal draws for one (seed, frame, step) substream.
void fill_noise(uint64_t seed, int frame, int step, double* out, size_t n);
// Noise shaped like `like`; frame i draws from substream (seed, i, step).
LatentTensor noise_like(const LatentTensor& like, uint64_t seed, int step);

LatentTensor add_noise(const LatentTensor& z0, int u, const LatentTensor& eps, const NoiseSchedule& s);

// Overwrites the listed frames of z with z0 noised to u_next from their own
// substreams.
void resample_inactive(const LatentTensor& z0, int u_next, const std::vector<int>& frames, uint64_t seed,
                       const NoiseSchedule& s, LatentTensor& z);

// Latent-scale mask and its active blocks for one frame.
struct FrameMask {
  BinaryGrid latent;
  std::vector<masks::Block> blocks;
};

struct StepMasks {
  int block_size = 4;
  int halo = 1;
  std::vector<FrameMask> frames;
};

StepMasks make_step_masks(const std::vector<BinaryGrid>& latent_masks, int block_size = 4, int halo = 1);

struct LatentCache {
  int step_of_record = -1;
  bool valid = false;
  // One slab per temporal layer holding every frame's layer output.
  std::vector<LatentTensor> temporal;
};

struct StepInput {
  const LatentTensor* z = nullptr;
  int u = 0;
  // One flag per frame.
  const std::vector<uint8_t>* active = nullptr;
  // Null means full masks.
  const StepMasks* masks = nullptr;
  const LatentCache* cache = nullptr;
};

class DenoiserBackend {
 public:
  virtual ~DenoiserBackend() = default;
  virtual std::string name() const = 0;
  virtual int temporal_layers() const = 0;
  // Fills x0 for active frames (at least every pixel of their active
  // blocks). When capture is non-null, stores this step's temporal-layer
  // outputs for all frames into it.
  virtual void predict_x0(const StepInput& in, const NoiseSchedule& s, LatentTensor& x0,
                          LatentCache* capture) const = 0;
};

// Returns the stored clean latents regardless of input.
class OracleBackend : public DenoiserBackend {
 public:
  explicit OracleBackend(LatentTensor clean) : clean_(std::move(clean)) {}
  std::string name() const override { return "oracle"; }
  int temporal_layers() const override { return 0; }
  void predict_x0(const StepInput& in, const NoiseSchedule& s, LatentTensor& x0, LatentCache* capture) const override;

 private:
  LatentTensor clean_;
};

struct SmoothingParams {
  double sigma_gray = 0.65;
  double sigma_chroma = 0.2;
  double feature_gain = 0.05;
  double self_weight = 0.8;
  double detail_keep = 0.85;
  uint64_t kernel_seed = 0x5EED5;
};

// Toy denoiser: two seeded depthwise 3x3 layers with a tanh, one temporal
// mixing layer, and a linear head that shrinks the deviation from a
// per-frame context latent with separate luminance and chroma gains.
class SmoothingBackend : public DenoiserBackend {
 public:
  SmoothingBackend(LatentTensor context, double texture_energy, SmoothingParams p = {});

  // Context latents from the nearest input view shifted by t * disparity.
  static SmoothingBackend from_views(const ImageFrame& i0, const ImageFrame& i1, const std::vector<double>& ts,
                                     double disparity_x, double disparity_y, SmoothingParams p = {});

  std::string name() const override { return "smoothing"; }
  int temporal_layers() const override { return 1; }
  void predict_x0(const StepInput& in, const NoiseSchedule& s, LatentTensor& x0, LatentCache* capture) const override;

  // Spatial layers for one frame. `feat` has frame_size() entries; the
  // block variant writes only pixels of the given blocks.
  void spatial_dense(const LatentTensor& z, int u, int frame, const NoiseSchedule& s, double* feat) const;
  void spatial_blocks(const LatentTensor& z, int u, int frame, const NoiseSchedule& s,
                      const std::vector<masks::Block>& blocks, int b, int halo, double* feat) const;

  const LatentTensor& context() const { return context_; }
  double texture_energy() const { return energy_; }
  const SmoothingParams& params() const { return p_; }

 private:
  void head(const double* d, const double* g, double gain_gray, double gain_chroma, double gain_feat, const double* mu,
            double* out) const;

  LatentTensor context_;
  double energy_;
  SmoothingParams p_;
  std::vector<double> w1_, w2_;
  // Orthonormal basis of the per-pixel luminance-direction subspace.
  std::vector<double> gray_t_;  // 64 x 192
  std::vector<double> gray_;    // 192 x 64
};

std::unique_ptr<DenoiserBackend> make_backend(const std::string& name, const ImageFrame& i0, const ImageFrame& i1,
                                              const std::vector<double>& ts, double dx, double dy,
                                              const LatentTensor& clean, const SmoothingParams& p = {});

// Deterministic DDIM update for one frame-pixel vector.
void ddim_update(int n, double abar, double abar_next, const double* z, const double* x0, double* out);

struct FullStepResult {
  LatentTensor z;
  LatentCache cache;
};

FullStepResult ddim_full_step(const LatentTensor& z, int u, const DenoiserBackend& backend, const NoiseSchedule& s);

// Active frames advance to u+1 (masked pixels by DDIM, others resampled from
// z0); inactive frames are copied unchanged.
LatentTensor ddim_partial_step(const LatentTensor& z, int u, const std::vector<uint8_t>& active, const StepMasks* masks,
                               const LatentCache& cache, int last_full_step, const DenoiserBackend& backend,
                               const NoiseSchedule& s, const LatentTensor& z0, uint64_t seed);

}  // namespace selrefine::diffusion
