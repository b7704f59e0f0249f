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

namespace selrefine::kernels::scalar {

void axpby(size_t n, double a, const double* x, double b, double* y) {
  for (size_t i = 0; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

void dwconv9(int C, const double* const* taps, const double* w, double* out) {
  for (int c = 0; c < C; ++c) {
    double s = 0.0;
    for (int j = 0; j < 9; ++j) s += w[j * C + c] * taps[j][c];
    out[c] = s;
  }
}

void matvec(int rows, int cols, const double* M, const double* x, double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* m = M + static_cast<size_t>(r) * cols;
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += m[c] * x[c];
    y[r] = s;
  }
}

void matvec_t(int rows, int cols, const double* M, const double* x, double* y) {
  for (int c = 0; c < cols; ++c) y[c] = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double* m = M + static_cast<size_t>(r) * cols;
    const double xr = x[r];
    for (int c = 0; c < cols; ++c) y[c] += m[c] * xr;
  }
}

}  // namespace selrefine::kernels::scalar
