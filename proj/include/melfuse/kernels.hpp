// melfuse/kernels.hpp

// Copyright 2026 The melfuse authors
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

// Dense compute kernels. The parallel variants split work over *output*
// elements only; every output element is accumulated in the same fixed
// sequential order as the serial reference, so results are bit-identical
// for any thread count (including 1). kernels::reference holds the serial
// implementations kept for testing and for the bench_kernels target.

#ifndef MELFUSE_KERNELS_HPP_
#define MELFUSE_KERNELS_HPP_

#include <cstddef>
#include <vector>

namespace melfuse {
namespace kernels {

namespace detail {

// One output row of C = A*B: c_row[j] = sum_k a_row[k] * b[k][j].
// k ascends, j is the vector lane.
template <typename T>
inline void gemm_row(const T* a_row, const T* b, T* c_row, int n, int k) {
  for (int j = 0; j < n; ++j) c_row[j] = T(0);
  for (int kk = 0; kk < k; ++kk) {
    const T a = a_row[kk];
    const T* b_row = b + static_cast<size_t>(kk) * n;
    for (int j = 0; j < n; ++j) c_row[j] += a * b_row[j];
  }
}

template <typename T>
inline void softmax_row(const T* x, T* y, int n) {
  T m = x[0];
  for (int j = 1; j < n; ++j)
    if (x[j] > m) m = x[j];
  T s = T(0);
  for (int j = 0; j < n; ++j) {
    y[j] = std::exp(x[j] - m);
    s += y[j];
  }
  const T inv = T(1) / s;
  for (int j = 0; j < n; ++j) y[j] *= inv;
}

}  // namespace detail

namespace reference {

// C[m x n] = A[m x k] * B[k x n], row-major, serial.
template <typename T>
void gemm(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i)
    detail::gemm_row(a + static_cast<size_t>(i) * k, b,
                     c + static_cast<size_t>(i) * n, n, k);
}

}  // namespace reference

// C[m x n] = A[m x k] * B[k x n], row-major, rows split over threads.
template <typename T>
void gemm(int m, int n, int k, const T* a, const T* b, T* c) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    detail::gemm_row(a + static_cast<size_t>(i) * k, b,
                     c + static_cast<size_t>(i) * n, n, k);
}

// AT[n x m] = transpose of A[m x n].
template <typename T>
void transpose(int m, int n, const T* a, T* at) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      at[static_cast<size_t>(j) * m + i] = a[static_cast<size_t>(i) * n + j];
}

// Batched C[s] = A[s] * B[s]; A [nb x m x k], B [nb x k x n].
template <typename T>
void bmm_nn(int nb, int m, int n, int k, const T* a, const T* b, T* c) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int s = 0; s < nb; ++s)
    for (int i = 0; i < m; ++i) {
      const T* as = a + (static_cast<size_t>(s) * m + i) * k;
      const T* bs = b + static_cast<size_t>(s) * k * n;
      T* cs = c + (static_cast<size_t>(s) * m + i) * n;
      detail::gemm_row(as, bs, cs, n, k);
    }
}

// Batched C[s] = A[s] * B[s]^T; A [nb x m x k], B [nb x n x k].
template <typename T>
void bmm_nt(int nb, int m, int n, int k, const T* a, const T* b, T* c) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int s = 0; s < nb; ++s)
    for (int i = 0; i < m; ++i) {
      const T* ai = a + (static_cast<size_t>(s) * m + i) * k;
      const T* bs = b + static_cast<size_t>(s) * n * k;
      T* ci = c + (static_cast<size_t>(s) * m + i) * n;
      for (int j = 0; j < n; ++j) {
        const T* bj = bs + static_cast<size_t>(j) * k;
        T acc = T(0);
        for (int t = 0; t < k; ++t) acc += ai[t] * bj[t];
        ci[j] = acc;
      }
    }
}

// Batched C[s] = A[s]^T * B[s]; A [nb x k x m], B [nb x k x n].
template <typename T>
void bmm_tn(int nb, int m, int n, int k, const T* a, const T* b, T* c) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int s = 0; s < nb; ++s)
    for (int i = 0; i < m; ++i) {
      const T* as = a + static_cast<size_t>(s) * k * m;
      const T* bs = b + static_cast<size_t>(s) * k * n;
      T* ci = c + (static_cast<size_t>(s) * m + i) * n;
      for (int j = 0; j < n; ++j) ci[j] = T(0);
      for (int t = 0; t < k; ++t) {
        const T av = as[static_cast<size_t>(t) * m + i];
        const T* bt = bs + static_cast<size_t>(t) * n;
        for (int j = 0; j < n; ++j) ci[j] += av * bt[j];
      }
    }
}

// Row-wise stable softmax; x, y are [rows x n].
template <typename T>
void softmax_rows(int rows, int n, const T* x, T* y) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r)
    detail::softmax_row(x + static_cast<size_t>(r) * n,
                        y + static_cast<size_t>(r) * n, n);
}

// 3x3 convolution with padding 1; spatial dims map n -> ceil(n/stride).
inline int conv_out_dim(int n, int stride) { return (n - 1) / stride + 1; }

namespace detail {

// Gather one sample into column-matrix form: rows are output positions
// (to, fo), columns are (ci, kt, kf) in ascending order. Zero padding.
template <typename T>
void im2col(const T* x, int cin, int t, int f, int stride, bool parallel,
            T* xcol) {
  const int t2 = conv_out_dim(t, stride);
  const int f2 = conv_out_dim(f, stride);
  const int kdim = cin * 9;
#pragma omp parallel for schedule(static) if (parallel)
  for (int to = 0; to < t2; ++to) {
    for (int fo = 0; fo < f2; ++fo) {
      T* row = xcol + (static_cast<size_t>(to) * f2 + fo) * kdim;
      int idx = 0;
      for (int ci = 0; ci < cin; ++ci) {
        const T* xc = x + static_cast<size_t>(ci) * t * f;
        for (int kt = 0; kt < 3; ++kt) {
          const int ti = to * stride - 1 + kt;
          for (int kf = 0; kf < 3; ++kf) {
            const int fi = fo * stride - 1 + kf;
            row[idx++] = (ti >= 0 && ti < t && fi >= 0 && fi < f)
                             ? xc[static_cast<size_t>(ti) * f + fi]
                             : T(0);
          }
        }
      }
    }
  }
}

// Scatter-add of the column-matrix gradient back to sample layout.
template <typename T>
void col2im_add(const T* dxcol, int cin, int t, int f, int stride, T* dx) {
  const int t2 = conv_out_dim(t, stride);
  const int f2 = conv_out_dim(f, stride);
  const int kdim = cin * 9;
  for (int to = 0; to < t2; ++to)
    for (int fo = 0; fo < f2; ++fo) {
      const T* row = dxcol + (static_cast<size_t>(to) * f2 + fo) * kdim;
      int idx = 0;
      for (int ci = 0; ci < cin; ++ci) {
        T* xc = dx + static_cast<size_t>(ci) * t * f;
        for (int kt = 0; kt < 3; ++kt) {
          const int ti = to * stride - 1 + kt;
          for (int kf = 0; kf < 3; ++kf, ++idx) {
            const int fi = fo * stride - 1 + kf;
            if (ti >= 0 && ti < t && fi >= 0 && fi < f)
              xc[static_cast<size_t>(ti) * f + fi] += row[idx];
          }
        }
      }
    }
}

template <typename T>
void conv2d_forward_impl(int b, int cin, int t, int f, int cout, int stride,
                         const T* x, const T* w, T* y, bool parallel) {
  const int t2 = conv_out_dim(t, stride);
  const int f2 = conv_out_dim(f, stride);
  const int m = t2 * f2;
  const int kdim = cin * 9;
  // w is [cout x cin x 3 x 3]; gemm wants [kdim x cout].
  std::vector<T> wmat(static_cast<size_t>(kdim) * cout);
  for (int co = 0; co < cout; ++co)
    for (int kk = 0; kk < kdim; ++kk)
      wmat[static_cast<size_t>(kk) * cout + co] =
          w[static_cast<size_t>(co) * kdim + kk];
  std::vector<T> xcol(static_cast<size_t>(m) * kdim);
  std::vector<T> ymat(static_cast<size_t>(m) * cout);
  for (int s = 0; s < b; ++s) {
    const T* xs = x + static_cast<size_t>(s) * cin * t * f;
    im2col(xs, cin, t, f, stride, parallel, xcol.data());
    if (parallel)
      gemm(m, cout, kdim, xcol.data(), wmat.data(), ymat.data());
    else
      reference::gemm(m, cout, kdim, xcol.data(), wmat.data(), ymat.data());
    T* ys = y + static_cast<size_t>(s) * cout * t2 * f2;
#pragma omp parallel for schedule(static) if (parallel)
    for (int co = 0; co < cout; ++co)
      for (int p = 0; p < m; ++p)
        ys[static_cast<size_t>(co) * m + p] =
            ymat[static_cast<size_t>(p) * cout + co];
  }
}

}  // namespace detail

template <typename T>
void conv2d_forward(int b, int cin, int t, int f, int cout, int stride,
                    const T* x, const T* w, T* y) {
  detail::conv2d_forward_impl(b, cin, t, f, cout, stride, x, w, y, true);
}

namespace reference {

template <typename T>
void conv2d_forward(int b, int cin, int t, int f, int cout, int stride,
                    const T* x, const T* w, T* y) {
  kernels::detail::conv2d_forward_impl(b, cin, t, f, cout, stride, x, w, y,
                                       false);
}

}  // namespace reference

// Gradients of conv2d_forward. dx, dw are freshly written (not accumulated);
// the per-sample dw contributions are summed in ascending sample order.
template <typename T>
void conv2d_backward(int b, int cin, int t, int f, int cout, int stride,
                     const T* x, const T* w, const T* dy, T* dx, T* dw) {
  const int t2 = conv_out_dim(t, stride);
  const int f2 = conv_out_dim(f, stride);
  const int m = t2 * f2;
  const int kdim = cin * 9;
  std::fill(dx, dx + static_cast<size_t>(b) * cin * t * f, T(0));
  std::vector<T> dwmat(static_cast<size_t>(kdim) * cout, T(0));
  std::vector<T> xcol(static_cast<size_t>(m) * kdim);
  std::vector<T> xcolt(static_cast<size_t>(kdim) * m);
  std::vector<T> dymat(static_cast<size_t>(m) * cout);
  std::vector<T> dwpart(static_cast<size_t>(kdim) * cout);
  std::vector<T> dxcol(static_cast<size_t>(m) * kdim);
  for (int s = 0; s < b; ++s) {
    const T* xs = x + static_cast<size_t>(s) * cin * t * f;
    const T* dys = dy + static_cast<size_t>(s) * cout * t2 * f2;
    detail::im2col(xs, cin, t, f, stride, true, xcol.data());
#pragma omp parallel for schedule(static)
    for (int p = 0; p < m; ++p)
      for (int co = 0; co < cout; ++co)
        dymat[static_cast<size_t>(p) * cout + co] =
            dys[static_cast<size_t>(co) * m + p];
    // dW += Xcol^T * dY
    transpose(m, kdim, xcol.data(), xcolt.data());
    gemm(kdim, cout, m, xcolt.data(), dymat.data(), dwpart.data());
    for (size_t i = 0; i < dwmat.size(); ++i) dwmat[i] += dwpart[i];
    // dXcol = dY * W^T; w viewed as [cout x kdim] is exactly W^T.
    gemm(m, kdim, cout, dymat.data(), w, dxcol.data());
    detail::col2im_add(dxcol.data(), cin, t, f, stride,
                       dx + static_cast<size_t>(s) * cin * t * f);
  }
  for (int co = 0; co < cout; ++co)
    for (int kk = 0; kk < kdim; ++kk)
      dw[static_cast<size_t>(co) * kdim + kk] =
          dwmat[static_cast<size_t>(kk) * cout + co];
}

}  // namespace kernels
}  // namespace melfuse

#endif  // MELFUSE_KERNELS_HPP_
