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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "selrefine/core.hpp"
#include "support.hpp"

using namespace selrefine;
using testsupport::random_frame;

TEST_CASE("cosine schedule ends at exactly one and rises strictly") {
  const auto s = build_schedule(50, ScheduleKind::Cosine);
  REQUIRE(s.abar.size() == 51);
  CHECK(s.abar[50] == 1.0);
  CHECK(s.abar[0] > 0.0);
  for (int u = 1; u <= 50; ++u) CHECK(s.abar[u] > s.abar[u - 1]);
}

TEST_CASE("cosine schedule matches the closed form") {
  const auto s = build_schedule(50, ScheduleKind::Cosine);
  for (int u = 0; u < 50; ++u) {
    const double c = std::cos(std::numbers::pi / 2.0 * (1.0 - u / 50.0) * 0.98);
    CHECK(s.abar[u] == doctest::Approx(c * c).epsilon(1e-14));
  }
}

TEST_CASE("linear schedule midpoint") {
  const auto s = build_schedule(50, ScheduleKind::Linear);
  CHECK(s.abar[0] == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(s.abar[25] == doctest::Approx(0.505).epsilon(1e-15));
  CHECK(s.abar[50] == 1.0);
}

TEST_CASE("schedule monotone for many lengths and both kinds") {
  for (auto kind : {ScheduleKind::Cosine, ScheduleKind::Linear})
    for (int S = 2; S <= 200; S += 7) {
      const auto s = build_schedule(S, kind);
      CHECK(s.abar[S] == 1.0);
      CHECK(s.abar[0] > 0.0);
      for (int u = 1; u <= S; ++u) CHECK(s.abar[u] > s.abar[u - 1]);
    }
}

TEST_CASE("schedule rejects short lengths and unknown kinds") {
  CHECK_THROWS_AS(build_schedule(1), InvalidArgument);
  CHECK_THROWS_AS(build_schedule(0, ScheduleKind::Linear), InvalidArgument);
  CHECK_THROWS_AS(parse_schedule_kind("quadratic"), InvalidArgument);
  CHECK(parse_schedule_kind("linear") == ScheduleKind::Linear);
}

TEST_CASE("frame validation") {
  ImageFrame ok(8, 16, 0.5);
  CHECK_NOTHROW(ok.validate());
  CHECK_THROWS_AS(ImageFrame(12, 8).validate(), InvalidArgument);
  ImageFrame bad(8, 8, 0.5);
  bad.rgb[3] = 1.5;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  ImageFrame op(8, 8, 0.5);
  op.opacity = std::vector<double>(64, 0.9);
  (*op.opacity)[7] = -0.1;
  CHECK_THROWS_AS(op.validate(), InvalidArgument);
}

TEST_CASE("codec matrix is orthogonal") {
  const auto& q = Codec::instance().matrix();
  REQUIRE(q.size() == static_cast<size_t>(kLatentChannels) * kLatentChannels);
  double worst = 0.0;
  for (int i = 0; i < kLatentChannels; ++i)
    for (int j = 0; j < kLatentChannels; ++j) {
      double d = 0.0;
      for (int k = 0; k < kLatentChannels; ++k) d += q[i * kLatentChannels + k] * q[j * kLatentChannels + k];
      worst = std::max(worst, std::abs(d - (i == j ? 1.0 : 0.0)));
    }
  CHECK(worst < 1e-12);
}

TEST_CASE("zero frame encodes to a zero latent") {
  const auto z = encode({ImageFrame(16, 16, 0.0)});
  CHECK(z.frames == 1);
  CHECK(z.lat_h == 2);
  CHECK(z.lat_w == 2);
  CHECK(z.channels == 192);
  for (double v : z.values) CHECK(v == 0.0);
  const auto frames = decode(z);
  for (double v : frames[0].rgb) CHECK(v == 0.0);
}

TEST_CASE("encode is space-to-depth followed by the mixing matrix") {
  // Independent oracle: build the 192-vector of each 8x8 patch by hand.
  const auto f = random_frame(16, 24, 3);
  const auto z = encode({f});
  const auto& q = Codec::instance().matrix();
  double worst = 0.0;
  for (int by = 0; by < 2; ++by)
    for (int bx = 0; bx < 3; ++bx) {
      std::vector<double> patch(kLatentChannels);
      for (int dy = 0; dy < 8; ++dy)
        for (int dx = 0; dx < 8; ++dx)
          for (int c = 0; c < 3; ++c) patch[(dy * 8 + dx) * 3 + c] = f.at(by * 8 + dy, bx * 8 + dx, c);
      for (int r = 0; r < kLatentChannels; ++r) {
        double s = 0.0;
        for (int k = 0; k < kLatentChannels; ++k) s += q[r * kLatentChannels + k] * patch[k];
        worst = std::max(worst, std::abs(s - z.pixel(0, by, bx)[r]));
      }
    }
  CHECK(worst < 1e-12);
}

TEST_CASE("codec round trip and norm preservation") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = random_frame(32, 16, seed), b = random_frame(32, 16, seed + 100);
    const auto z = encode({a, b});
    const auto back = decode(z);
    double err = 0.0, nx = 0.0, nz = 0.0;
    for (size_t i = 0; i < a.rgb.size(); ++i) {
      err = std::max(err, std::abs(back[0].rgb[i] - a.rgb[i]));
      err = std::max(err, std::abs(back[1].rgb[i] - b.rgb[i]));
      nx += a.rgb[i] * a.rgb[i] + b.rgb[i] * b.rgb[i];
    }
    for (double v : z.values) nz += v * v;
    CHECK(err < 1e-6);
    CHECK(std::abs(std::sqrt(nx) - std::sqrt(nz)) < 1e-5);
  }
}

TEST_CASE("encode of decode is identity on latents") {
  const auto z = testsupport::random_latent(2, 3, 2, kLatentChannels, 11);
  const auto back = encode(decode(z));
  double err = 0.0;
  for (size_t i = 0; i < z.values.size(); ++i) err = std::max(err, std::abs(back.values[i] - z.values[i]));
  CHECK(err < 1e-6);
}

TEST_CASE("codec rejects bad shapes") {
  CHECK_THROWS_AS(encode({ImageFrame(12, 16)}), InvalidArgument);
  CHECK_THROWS_AS(encode({ImageFrame(8, 8), ImageFrame(16, 8)}), InvalidArgument);
  CHECK_THROWS_AS(encode({}), InvalidArgument);
  CHECK_THROWS_AS(decode(LatentTensor(1, 2, 2, 64)), InvalidArgument);
}

TEST_CASE("tensor file round trip is bit exact") {
  TensorFile t;
  t.dims = {2, 3, 4};
  for (int i = 0; i < 24; ++i) t.data.push_back(static_cast<float>(i) * 0.37f - 3.0f);
  t.data[5] = -0.0f;
  const auto bytes = serialize_tensor(t);
  REQUIRE(bytes.size() == 4 + 1 + 3 * 4 + 24 * 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SPTX");
  CHECK(bytes[4] == 3);
  // Little-endian u32 dims.
  CHECK(bytes[5] == 2);
  CHECK(bytes[6] == 0);
  CHECK(bytes[9] == 3);
  const auto back = parse_tensor(bytes);
  CHECK(back.dims == t.dims);
  REQUIRE(back.data.size() == t.data.size());
  CHECK(std::memcmp(back.data.data(), t.data.data(), t.data.size() * 4) == 0);

  testsupport::TempDir dir("tensor");
  write_tensor(dir.str("t.sptx"), t);
  const auto disk = read_tensor(dir.str("t.sptx"));
  CHECK(disk.dims == t.dims);
  CHECK(std::memcmp(disk.data.data(), t.data.data(), t.data.size() * 4) == 0);
}

TEST_CASE("tensor file rejects malformed input") {
  TensorFile t;
  t.dims = {2, 2};
  t.data = {1, 2, 3};
  CHECK_THROWS_AS(serialize_tensor(t), InvalidArgument);
  t.data.push_back(4);
  auto bytes = serialize_tensor(t);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(parse_tensor(bad), InvalidArgument);
  bytes.pop_back();
  CHECK_THROWS_AS(parse_tensor(bytes), InvalidArgument);
}

TEST_CASE("latent tensor file conversion") {
  const auto z = testsupport::random_latent(2, 2, 3, 5, 4);
  const auto back = from_tensor_file(to_tensor_file(z));
  CHECK(back.same_shape(z));
  for (size_t i = 0; i < z.values.size(); ++i) CHECK(back.values[i] == static_cast<double>(static_cast<float>(z.values[i])));
}

TEST_CASE("png round trip at 8 bits") {
  testsupport::TempDir dir("png");
  auto f = random_frame(16, 8, 9);
  for (double& v : f.rgb) v = std::round(v * 255.0) / 255.0;
  write_png(dir.str("f.png"), f);
  const auto back = read_png(dir.str("f.png"));
  REQUIRE(back.height == 16);
  REQUIRE(back.width == 8);
  for (size_t i = 0; i < f.rgb.size(); ++i) CHECK(back.rgb[i] == f.rgb[i]);
}

TEST_CASE("mask png stores one bit per pixel") {
  testsupport::TempDir dir("mask");
  const auto m = testsupport::random_mask(16, 24, 0.3, 5);
  write_mask_png(dir.str("m.png"), m);
  const auto g = read_gray_png(dir.str("m.png"));
  REQUIRE(g.v.size() == m.v.size());
  for (size_t i = 0; i < m.v.size(); ++i) CHECK(g.v[i] == (m.v[i] ? 1.0 : 0.0));
  std::ifstream f(dir.str("m.png"), std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), {});
  // IHDR bit depth byte follows width and height.
  REQUIRE(bytes.size() > 25);
  CHECK(bytes[24] == 1);
}

TEST_CASE("gray png round trip") {
  testsupport::TempDir dir("gray");
  Grid g(8, 8);
  for (size_t i = 0; i < g.v.size(); ++i) g.v[i] = static_cast<double>(i * 4) / 255.0;
  write_gray_png(dir.str("g.png"), g);
  const auto back = read_gray_png(dir.str("g.png"));
  for (size_t i = 0; i < g.v.size(); ++i) CHECK(back.v[i] == g.v[i]);
}

TEST_CASE("clamp and luminance") {
  ImageFrame f(8, 8, 0.5);
  f.rgb[0] = 1.7;
  f.rgb[1] = -0.2;
  const auto c = clamp01(f);
  CHECK(c.rgb[0] == 1.0);
  CHECK(c.rgb[1] == 0.0);
  const auto lum = luminance(ImageFrame(8, 8, 0.25));
  for (double v : lum) CHECK(v == doctest::Approx(0.25));
}
