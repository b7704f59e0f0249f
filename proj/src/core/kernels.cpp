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

#include "selrefine/kernels.hpp"

#include <atomic>

namespace selrefine::kernels {

namespace {

Isa detect() {
#if defined(SELREFINE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  if (avx2::compiled() && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::Avx2;
#endif
  return Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

Isa detected_isa() {
  static const Isa isa = detect();
  return isa;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

bool set_isa(Isa isa) {
  if (isa == Isa::Avx2 && detected_isa() != Isa::Avx2) return false;
  current().store(isa, std::memory_order_relaxed);
  return true;
}

std::string isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

void axpby(size_t n, double a, const double* x, double b, double* y) {
  if (active_isa() == Isa::Avx2) return avx2::axpby(n, a, x, b, y);
  scalar::axpby(n, a, x, b, y);
}

void dwconv9(int C, const double* const* taps, const double* w, double* out) {
  if (active_isa() == Isa::Avx2) return avx2::dwconv9(C, taps, w, out);
  scalar::dwconv9(C, taps, w, out);
}

void matvec(int rows, int cols, const double* M, const double* x, double* y) {
  if (active_isa() == Isa::Avx2) return avx2::matvec(rows, cols, M, x, y);
  scalar::matvec(rows, cols, M, x, y);
}

void matvec_t(int rows, int cols, const double* M, const double* x, double* y) {
  if (active_isa() == Isa::Avx2) return avx2::matvec_t(rows, cols, M, x, y);
  scalar::matvec_t(rows, cols, M, x, y);
}

}  // namespace selrefine::kernels
