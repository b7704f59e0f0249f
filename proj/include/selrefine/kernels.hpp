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
#include <string>

// Hot loops with a scalar reference and an AVX2 variant. The variant is
// picked once at startup from CPUID; tests can force either path.
namespace selrefine::kernels {

enum class Isa { Scalar, Avx2 };

Isa detected_isa();
Isa active_isa();
// Returns false if the requested ISA is not available on this CPU.
bool set_isa(Isa isa);
std::string isa_name(Isa isa);

// y = a*x + b*y
void axpby(size_t n, double a, const double* x, double b, double* y);

// out[c] = sum_j w[j*C + c] * taps[j][c] for j in 0..8 (depthwise 3x3).
void dwconv9(int C, const double* const* taps, const double* w, double* out);

// y = M x, M is rows x cols row-major.
void matvec(int rows, int cols, const double* M, const double* x, double* y);

// y += a * M^T x restricted form used by the codec: y (cols) = M^T x (rows).
void matvec_t(int rows, int cols, const double* M, const double* x, double* y);

// Reference implementations, always available.
namespace scalar {
void axpby(size_t n, double a, const double* x, double b, double* y);
void dwconv9(int C, const double* const* taps, const double* w, double* out);
void matvec(int rows, int cols, const double* M, const double* x, double* y);
void matvec_t(int rows, int cols, const double* M, const double* x, double* y);
}  // namespace scalar

namespace avx2 {
bool compiled();
void axpby(size_t n, double a, const double* x, double b, double* y);
void dwconv9(int C, const double* const* taps, const double* w, double* out);
void matvec(int rows, int cols, const double* M, const double* x, double* y);
void matvec_t(int rows, int cols, const double* M, const double* x, double* y);
}  // namespace avx2

}  // namespace selrefine::kernels
