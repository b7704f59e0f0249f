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

#include <cmath>

#if defined(SELREFINE_HAVE_AVX2)
#include <immintrin.h>
#endif

namespace selrefine::kernels::avx2 {

#if defined(SELREFINE_HAVE_AVX2)

bool compiled() { return true; }

void axpby(size_t n, double a, const double* x, double b, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] = std::fma(a, x[i], b * y[i]);
}

void dwconv9(int C, const double* const* taps, const double* w, double* out) {
  int c = 0;
  for (; c + 4 <= C; c += 4) {
    __m256d s = _mm256_setzero_pd();
    for (int j = 0; j < 9; ++j)
      s = _mm256_fmadd_pd(_mm256_loadu_pd(w + j * C + c), _mm256_loadu_pd(taps[j] + c), s);
    _mm256_storeu_pd(out + c, s);
  }
  for (; c < C; ++c) {
    double s = 0.0;
    for (int j = 0; j < 9; ++j) s += w[j * C + c] * taps[j][c];
    out[c] = s;
  }
}

static inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void matvec(int rows, int cols, const double* M, const double* x, double* y) {
  int r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* m0 = M + static_cast<size_t>(r) * cols;
    const double* m1 = m0 + cols;
    const double* m2 = m1 + cols;
    const double* m3 = m2 + cols;
    __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
    __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
    int c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d vx = _mm256_loadu_pd(x + c);
      s0 = _mm256_fmadd_pd(_mm256_loadu_pd(m0 + c), vx, s0);
      s1 = _mm256_fmadd_pd(_mm256_loadu_pd(m1 + c), vx, s1);
      s2 = _mm256_fmadd_pd(_mm256_loadu_pd(m2 + c), vx, s2);
      s3 = _mm256_fmadd_pd(_mm256_loadu_pd(m3 + c), vx, s3);
    }
    double t0 = hsum(s0), t1 = hsum(s1), t2 = hsum(s2), t3 = hsum(s3);
    for (; c < cols; ++c) {
      t0 += m0[c] * x[c];
      t1 += m1[c] * x[c];
      t2 += m2[c] * x[c];
      t3 += m3[c] * x[c];
    }
    y[r] = t0;
    y[r + 1] = t1;
    y[r + 2] = t2;
    y[r + 3] = t3;
  }
  for (; r < rows; ++r) {
    const double* m = M + static_cast<size_t>(r) * cols;
    __m256d s = _mm256_setzero_pd();
    int c = 0;
    for (; c + 4 <= cols; c += 4) s = _mm256_fmadd_pd(_mm256_loadu_pd(m + c), _mm256_loadu_pd(x + c), s);
    double t = hsum(s);
    for (; c < cols; ++c) t += m[c] * x[c];
    y[r] = t;
  }
}

void matvec_t(int rows, int cols, const double* M, const double* x, double* y) {
  for (int c = 0; c < cols; ++c) y[c] = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double* m = M + static_cast<size_t>(r) * cols;
    const __m256d vx = _mm256_set1_pd(x[r]);
    int c = 0;
    for (; c + 4 <= cols; c += 4)
      _mm256_storeu_pd(y + c, _mm256_fmadd_pd(_mm256_loadu_pd(m + c), vx, _mm256_loadu_pd(y + c)));
    for (; c < cols; ++c) y[c] += m[c] * x[r];
  }
}

#else

bool compiled() { return false; }
void axpby(size_t n, double a, const double* x, double b, double* y) { scalar::axpby(n, a, x, b, y); }
void dwconv9(int C, const double* const* taps, const double* w, double* out) { scalar::dwconv9(C, taps, w, out); }
void matvec(int rows, int cols, const double* M, const double* x, double* y) { scalar::matvec(rows, cols, M, x, y); }
void matvec_t(int rows, int cols, const double* M, const double* x, double* y) { scalar::matvec_t(rows, cols, M, x, y); }

#endif

}  // namespace selrefine::kernels::avx2
