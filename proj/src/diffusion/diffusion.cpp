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

#include "selrefine/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "selrefine/kernels.hpp"

namespace selrefine::diffusion {

void fill_noise(uint64_t seed, int frame, int step, double* out, size_t n) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(frame),
                    static_cast<uint32_t>(step), 0x6e6f6973u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (size_t i = 0; i < n; ++i) out[i] = nd(rng);
}

LatentTensor noise_like(const LatentTensor& like, uint64_t seed, int step) {
  LatentTensor eps(like.frames, like.lat_h, like.lat_w, like.channels);
  for (int f = 0; f < like.frames; ++f) fill_noise(seed, f, step, eps.frame(f), eps.frame_size());
  return eps;
}

namespace {

void check_step(int u, const NoiseSchedule& s) {
  if (u < 0 || u > s.total_steps) throw InvalidArgument("step index outside [0, S]");
}

}  // namespace

LatentTensor add_noise(const LatentTensor& z0, int u, const LatentTensor& eps, const NoiseSchedule& s) {
  check_step(u, s);
  if (!z0.same_shape(eps)) throw InvalidArgument("add_noise: noise shape mismatch");
  const double a = std::sqrt(s.abar[u]), b = std::sqrt(1.0 - s.abar[u]);
  LatentTensor z = eps;
  kernels::axpby(z.values.size(), a, z0.values.data(), b, z.values.data());
  return z;
}

void resample_inactive(const LatentTensor& z0, int u_next, const std::vector<int>& frames, uint64_t seed,
                       const NoiseSchedule& s, LatentTensor& z) {
  check_step(u_next, s);
  if (!z0.same_shape(z)) throw InvalidArgument("resample_inactive: shape mismatch");
  const double a = std::sqrt(s.abar[u_next]), b = std::sqrt(1.0 - s.abar[u_next]);
  for (int f : frames) {
    if (f < 0 || f >= z.frames) throw InvalidArgument("resample_inactive: frame index out of range");
    double* dst = z.frame(f);
    fill_noise(seed, f, u_next, dst, z.frame_size());
    kernels::axpby(z.frame_size(), a, z0.frame(f), b, dst);
  }
}

StepMasks make_step_masks(const std::vector<BinaryGrid>& latent_masks, int block_size, int halo) {
  StepMasks m;
  m.block_size = block_size;
  m.halo = halo;
  for (size_t f = 0; f < latent_masks.size(); ++f) {
    FrameMask fm;
    fm.latent = latent_masks[f];
    fm.blocks = masks::tile_blocks(latent_masks[f], block_size, halo, static_cast<int>(f)).active;
    m.frames.push_back(std::move(fm));
  }
  return m;
}

void OracleBackend::predict_x0(const StepInput& in, const NoiseSchedule&, LatentTensor& x0, LatentCache* capture) const {
  if (!in.z->same_shape(clean_)) throw InvalidArgument("oracle backend: latent shape mismatch");
  x0 = clean_;
  if (capture) {
    capture->temporal.clear();
    capture->step_of_record = in.u;
    capture->valid = true;
  }
}

namespace {

std::vector<double> seeded_kernel(std::mt19937_64& rng, int C) {
  static constexpr double kBinomial[9] = {1, 2, 1, 2, 4, 2, 1, 2, 1};
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  std::vector<double> w(9 * static_cast<size_t>(C));
  for (int c = 0; c < C; ++c) {
    double sum = 0.0;
    for (int j = 0; j < 9; ++j) {
      const double v = kBinomial[j] * (1.0 + jitter(rng));
      w[static_cast<size_t>(j) * C + c] = v;
      sum += v;
    }
    for (int j = 0; j < 9; ++j) w[static_cast<size_t>(j) * C + c] /= sum;
  }
  return w;
}

}  // namespace

SmoothingBackend::SmoothingBackend(LatentTensor context, double texture_energy, SmoothingParams p)
    : context_(std::move(context)), energy_(texture_energy), p_(p) {
  if (context_.channels != kLatentChannels) throw InvalidArgument("smoothing backend: context must use codec channels");
  std::mt19937_64 rng(p_.kernel_seed);
  w1_ = seeded_kernel(rng, kLatentChannels);
  w2_ = seeded_kernel(rng, kLatentChannels);
  const auto& q = Codec::instance().matrix();
  constexpr int kPix = kPatch * kPatch;
  gray_.assign(static_cast<size_t>(kLatentChannels) * kPix, 0.0);
  gray_t_.assign(static_cast<size_t>(kPix) * kLatentChannels, 0.0);
  const double inv = 1.0 / std::sqrt(3.0);
  for (int p = 0; p < kPix; ++p)
    for (int r = 0; r < kLatentChannels; ++r) {
      const double* row = q.data() + static_cast<size_t>(r) * kLatentChannels;
      const double g = (row[3 * p] + row[3 * p + 1] + row[3 * p + 2]) * inv;
      gray_[static_cast<size_t>(r) * kPix + p] = g;
      gray_t_[static_cast<size_t>(p) * kLatentChannels + r] = g;
    }
}

namespace {

// 3x3 binomial blur with edge replication on an RGB frame.
ImageFrame binomial(const ImageFrame& f) {
  static constexpr double k[3] = {0.25, 0.5, 0.25};
  ImageFrame out(f.height, f.width);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            s += k[dy + 1] * k[dx + 1] *
                 f.at(std::clamp(y + dy, 0, f.height - 1), std::clamp(x + dx, 0, f.width - 1), c);
        out.at(y, x, c) = s;
      }
  return out;
}

ImageFrame shifted(const ImageFrame& f, int dx, int dy) {
  ImageFrame out(f.height, f.width);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = f.at(std::clamp(y - dy, 0, f.height - 1), std::clamp(x - dx, 0, f.width - 1), c);
  return out;
}

double gray_detail_energy(const ImageFrame& f) {
  const ImageFrame lo = binomial(binomial(f));
  const double inv = 1.0 / std::sqrt(3.0);
  double acc = 0.0;
  for (size_t p = 0; p < f.pixels(); ++p) {
    double g = 0.0;
    for (int c = 0; c < 3; ++c) g += f.rgb[3 * p + c] - lo.rgb[3 * p + c];
    g *= inv;
    acc += g * g;
  }
  return acc / static_cast<double>(f.pixels());
}

}  // namespace

SmoothingBackend SmoothingBackend::from_views(const ImageFrame& i0, const ImageFrame& i1, const std::vector<double>& ts,
                                              double disparity_x, double disparity_y, SmoothingParams p) {
  if (i0.height != i1.height || i0.width != i1.width) throw InvalidArgument("input views differ in size");
  if (ts.empty()) throw InvalidArgument("smoothing backend: no target positions");
  std::vector<ImageFrame> ctx;
  for (double t : ts) {
    const int s0x = static_cast<int>(std::round(t * disparity_x)), s0y = static_cast<int>(std::round(t * disparity_y));
    const int s1x = s0x - static_cast<int>(std::round(disparity_x));
    const int s1y = s0y - static_cast<int>(std::round(disparity_y));
    const ImageFrame w = t < 0.5 ? shifted(i0, s0x, s0y) : shifted(i1, s1x, s1y);
    const ImageFrame lo = binomial(binomial(w));
    ImageFrame c(w.height, w.width);
    for (size_t i = 0; i < c.rgb.size(); ++i) c.rgb[i] = lo.rgb[i] + p.detail_keep * (w.rgb[i] - lo.rgb[i]);
    ctx.push_back(std::move(c));
  }
  const double energy = 0.5 * (gray_detail_energy(i0) + gray_detail_energy(i1));
  return SmoothingBackend(encode(ctx), energy, p);
}

void SmoothingBackend::head(const double* d, const double* g, double gain_gray, double gain_chroma, double gain_feat,
                            const double* mu, double* out) const {
  constexpr int C = kLatentChannels, kPix = kPatch * kPatch;
  double w[kPix], pd[C];
  kernels::matvec(kPix, C, gray_t_.data(), d, w);
  kernels::matvec(C, kPix, gray_.data(), w, pd);
  for (int c = 0; c < C; ++c) out[c] = mu[c] + gain_chroma * d[c] + (gain_gray - gain_chroma) * pd[c] + gain_feat * g[c];
}

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Scaled deviation from context for one latent pixel.
inline void deviation(const double* z, const double* mu, double inv_sqrt_abar, double* d) {
  for (int c = 0; c < kLatentChannels; ++c) d[c] = z[c] * inv_sqrt_abar - mu[c];
}

inline void tanh_inplace(double* v, int n) {
  for (int i = 0; i < n; ++i) v[i] = std::tanh(v[i]);
}

}  // namespace

void SmoothingBackend::spatial_dense(const LatentTensor& z, int u, int frame, const NoiseSchedule& s,
                                     double* feat) const {
  constexpr int C = kLatentChannels;
  const int H = z.lat_h, W = z.lat_w;
  const double inv = 1.0 / std::sqrt(s.abar[u]);
  std::vector<double> d(static_cast<size_t>(H) * W * C), h(d.size());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      deviation(z.pixel(frame, y, x), context_.pixel(frame, y, x), inv, d.data() + (static_cast<size_t>(y) * W + x) * C);
  const double* taps[9];
  auto conv = [&](const std::vector<double>& src, const std::vector<double>& w, int y, int x, double* out) {
    int j = 0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        taps[j++] = src.data() + (static_cast<size_t>(clampi(y + dy, 0, H - 1)) * W + clampi(x + dx, 0, W - 1)) * C;
    kernels::dwconv9(C, taps, w.data(), out);
  };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double* o = h.data() + (static_cast<size_t>(y) * W + x) * C;
      conv(d, w1_, y, x, o);
      tanh_inplace(o, C);
    }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) conv(h, w2_, y, x, feat + (static_cast<size_t>(y) * W + x) * C);
}

void SmoothingBackend::spatial_blocks(const LatentTensor& z, int u, int frame, const NoiseSchedule& s,
                                      const std::vector<masks::Block>& blocks, int b, int halo, double* feat) const {
  constexpr int C = kLatentChannels;
  const int H = z.lat_h, W = z.lat_w;
  const double inv = 1.0 / std::sqrt(s.abar[u]);
  // Two stacked 3x3 layers need one halo pixel per layer.
  const int hl = std::max(halo, 1);
  const int gather = 2 * hl;
  std::vector<double> dt, ht;
  const double* taps[9];
  for (const auto& blk : blocks) {
    const int y0 = blk.row * b, x0 = blk.col * b;
    const int y1 = std::min(H, y0 + b), x1 = std::min(W, x0 + b);
    // Gather: deviation tile over [y0-gather, y1+gather) with edge replication.
    const int th = (y1 - y0) + 2 * gather, tw = (x1 - x0) + 2 * gather;
    dt.assign(static_cast<size_t>(th) * tw * C, 0.0);
    for (int ty = 0; ty < th; ++ty)
      for (int tx = 0; tx < tw; ++tx) {
        const int y = clampi(y0 - gather + ty, 0, H - 1), x = clampi(x0 - gather + tx, 0, W - 1);
        deviation(z.pixel(frame, y, x), context_.pixel(frame, y, x), inv, dt.data() + (static_cast<size_t>(ty) * tw + tx) * C);
      }
    auto dtile = [&](int y, int x) {
      return dt.data() + (static_cast<size_t>(y - (y0 - gather)) * tw + (x - (x0 - gather))) * C;
    };
    // Layer 1 over the block plus halo; out-of-frame positions take the
    // value at their clamped position, matching the dense pass.
    const int hh = (y1 - y0) + 2 * hl, hw = (x1 - x0) + 2 * hl;
    ht.assign(static_cast<size_t>(hh) * hw * C, 0.0);
    for (int ty = 0; ty < hh; ++ty)
      for (int tx = 0; tx < hw; ++tx) {
        const int qy = clampi(y0 - hl + ty, 0, H - 1), qx = clampi(x0 - hl + tx, 0, W - 1);
        int j = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) taps[j++] = dtile(clampi(qy + dy, 0, H - 1), clampi(qx + dx, 0, W - 1));
        double* o = ht.data() + (static_cast<size_t>(ty) * hw + tx) * C;
        kernels::dwconv9(C, taps, w1_.data(), o);
        tanh_inplace(o, C);
      }
    // Layer 2 on the block itself, scattered into the frame's feature map.
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        int j = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int py = clampi(y + dy, 0, H - 1), px = clampi(x + dx, 0, W - 1);
            taps[j++] = ht.data() + (static_cast<size_t>(py - (y0 - hl)) * hw + (px - (x0 - hl))) * C;
          }
        kernels::dwconv9(C, taps, w2_.data(), feat + (static_cast<size_t>(y) * W + x) * C);
      }
  }
}

void SmoothingBackend::predict_x0(const StepInput& in, const NoiseSchedule& s, LatentTensor& x0,
                                  LatentCache* capture) const {
  const LatentTensor& z = *in.z;
  if (!z.same_shape(context_)) throw InvalidArgument("smoothing backend: latent shape does not match context");
  const int N = z.frames, H = z.lat_h, W = z.lat_w;
  constexpr int C = kLatentChannels;
  const size_t fs = z.frame_size();
  const int u = in.u;
  const bool full = in.masks == nullptr;
  auto is_active = [&](int f) { return in.active == nullptr || (*in.active)[f] != 0; };
  if (!capture && (!in.cache || !in.cache->valid || in.cache->temporal.size() != 1))
    throw StaleCacheError("smoothing backend: partial prediction needs a valid cache");

  // Spatial layers: fresh for active frames (active blocks only when masked),
  // cached full-step features elsewhere.
  LatentTensor feat(N, H, W, C);
  for (int f = 0; f < N; ++f) {
    double* dst = feat.frame(f);
    if (in.cache && in.cache->valid && !in.cache->temporal.empty())
      std::copy(in.cache->temporal[0].frame(f), in.cache->temporal[0].frame(f) + fs, dst);
    if (!is_active(f)) continue;
    if (full || in.masks->frames.empty())
      spatial_dense(z, u, f, s, dst);
    else
      spatial_blocks(z, u, f, s, in.masks->frames[f].blocks, in.masks->block_size, in.masks->halo, dst);
  }
  if (capture) {
    capture->temporal.assign(1, feat);
    capture->step_of_record = u;
    capture->valid = true;
  }

  // Temporal mixing: each frame blended with the mean over all frames.
  std::vector<double> mean(fs, 0.0);
  for (int f = 0; f < N; ++f) kernels::axpby(fs, 1.0, feat.frame(f), 1.0, mean.data());
  for (double& v : mean) v /= N;

  const double ab = s.abar[u];
  const double inv = 1.0 / std::sqrt(ab);
  auto gain = [&](double sigma) {
    const double var = sigma * sigma * energy_;
    return var * ab / (var * ab + 1.0 - ab);
  };
  const double gg = gain(p_.sigma_gray), gc = gain(p_.sigma_chroma);
  const double gf = p_.feature_gain * (1.0 - gg);
  if (!x0.same_shape(z)) x0 = LatentTensor(N, H, W, C);
  double d[C], g[C];
  for (int f = 0; f < N; ++f) {
    if (!is_active(f)) continue;
    const double* ff = feat.frame(f);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (!full && !in.masks->frames.empty() && !in.masks->frames[f].latent.at(y, x)) continue;
        const size_t off = (static_cast<size_t>(y) * W + x) * C;
        const double* mu = context_.pixel(f, y, x);
        deviation(z.pixel(f, y, x), mu, inv, d);
        for (int c = 0; c < C; ++c) g[c] = p_.self_weight * ff[off + c] + (1.0 - p_.self_weight) * mean[off + c];
        head(d, g, gg, gc, gf, mu, x0.pixel(f, y, x));
      }
  }
}

std::unique_ptr<DenoiserBackend> make_backend(const std::string& name, const ImageFrame& i0, const ImageFrame& i1,
                                              const std::vector<double>& ts, double dx, double dy,
                                              const LatentTensor& clean, const SmoothingParams& p) {
  if (name == "oracle") return std::make_unique<OracleBackend>(clean);
  if (name == "smoothing") return std::make_unique<SmoothingBackend>(SmoothingBackend::from_views(i0, i1, ts, dx, dy, p));
  throw ConfigError("unknown denoiser backend: " + name);
}

void ddim_update(int n, double abar, double abar_next, const double* z, const double* x0, double* out) {
  const double sa = std::sqrt(abar), sb = std::sqrt(1.0 - abar);
  const double sa1 = std::sqrt(abar_next), sb1 = std::sqrt(1.0 - abar_next);
  if (sb == 0.0) {
    std::copy(x0, x0 + n, out);
    return;
  }
  // eps = (z - sa*x0)/sb ; out = sa1*x0 + sb1*eps
  const double cz = sb1 / sb, cx = sa1 - sb1 * sa / sb;
  for (int i = 0; i < n; ++i) out[i] = z[i];
  kernels::axpby(static_cast<size_t>(n), cx, x0, cz, out);
}

FullStepResult ddim_full_step(const LatentTensor& z, int u, const DenoiserBackend& backend, const NoiseSchedule& s) {
  if (u < 0 || u >= s.total_steps) throw InvalidArgument("ddim_full_step: u outside [0, S)");
  FullStepResult r;
  std::vector<uint8_t> all(z.frames, 1);
  StepInput in;
  in.z = &z;
  in.u = u;
  in.active = &all;
  LatentTensor x0;
  backend.predict_x0(in, s, x0, &r.cache);
  r.cache.step_of_record = u;
  r.cache.valid = true;
  r.z = LatentTensor(z.frames, z.lat_h, z.lat_w, z.channels);
  ddim_update(static_cast<int>(z.values.size()), s.abar[u], s.abar[u + 1], z.values.data(), x0.values.data(),
              r.z.values.data());
  return r;
}

LatentTensor ddim_partial_step(const LatentTensor& z, int u, const std::vector<uint8_t>& active, const StepMasks* masks,
                               const LatentCache& cache, int last_full_step, const DenoiserBackend& backend,
                               const NoiseSchedule& s, const LatentTensor& z0, uint64_t seed) {
  if (u < 0 || u >= s.total_steps) throw InvalidArgument("ddim_partial_step: u outside [0, S)");
  if (static_cast<int>(active.size()) != z.frames) throw InvalidArgument("ddim_partial_step: active set size mismatch");
  if (std::none_of(active.begin(), active.end(), [](uint8_t a) { return a != 0; }))
    throw InvalidArgument("ddim_partial_step: empty active set");
  if (!cache.valid || cache.step_of_record != last_full_step || cache.step_of_record > u)
    throw StaleCacheError("ddim_partial_step: cache is not from the most recent full step");
  if (static_cast<int>(cache.temporal.size()) != backend.temporal_layers())
    throw StaleCacheError("ddim_partial_step: cache layer count does not match backend");
  if (masks && !masks->frames.empty() && static_cast<int>(masks->frames.size()) != z.frames)
    throw InvalidArgument("ddim_partial_step: mask count mismatch");

  StepInput in;
  in.z = &z;
  in.u = u;
  in.active = &active;
  in.masks = masks;
  in.cache = &cache;
  LatentTensor x0(z.frames, z.lat_h, z.lat_w, z.channels);
  backend.predict_x0(in, s, x0, nullptr);

  LatentTensor out = z;
  const int C = z.channels;
  const double a1 = std::sqrt(s.abar[u + 1]), b1 = std::sqrt(1.0 - s.abar[u + 1]);
  std::vector<double> eps;
  for (int f = 0; f < z.frames; ++f) {
    if (!active[f]) continue;
    const bool masked = masks && !masks->frames.empty();
    if (!masked) {
      ddim_update(static_cast<int>(z.frame_size()), s.abar[u], s.abar[u + 1], z.frame(f), x0.frame(f), out.frame(f));
      continue;
    }
    const BinaryGrid& m = masks->frames[f].latent;
    bool any_unmasked = false;
    for (uint8_t v : m.v) any_unmasked |= v == 0;
    if (any_unmasked) {
      eps.resize(z.frame_size());
      fill_noise(seed, f, u + 1, eps.data(), eps.size());
    }
    for (int y = 0; y < z.lat_h; ++y)
      for (int x = 0; x < z.lat_w; ++x) {
        double* o = out.pixel(f, y, x);
        if (m.at(y, x)) {
          ddim_update(C, s.abar[u], s.abar[u + 1], z.pixel(f, y, x), x0.pixel(f, y, x), o);
        } else {
          const size_t off = (static_cast<size_t>(y) * z.lat_w + x) * C;
          std::copy(eps.data() + off, eps.data() + off + C, o);
          kernels::axpby(static_cast<size_t>(C), a1, z0.pixel(f, y, x), b1, o);
        }
      }
  }
  return out;
}

}  // namespace selrefine::diffusion
