#ifndef ECHONAV_NN_BLAS_HPP_
#define ECHONAV_NN_BLAS_HPP_

// Row-major GEMM dispatch to CBLAS, plus im2col / col2im for NCHW images.

#include <cblas.h>

#include <algorithm>
#include <cstddef>
#include <type_traits>

namespace echonav::nn::blas {

/// C[M,N] = alpha * op(A) * op(B) + beta * C.
template <class T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda, const T* b,
          int ldb, T beta, T* c, int ldc) {
  const auto ta = trans_a ? CblasTrans : CblasNoTrans;
  const auto tb = trans_b ? CblasTrans : CblasNoTrans;
  if constexpr (std::is_same_v<T, float>) {
    cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  } else {
    static_assert(std::is_same_v<T, double>, "gemm supports float and double");
    cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  }
}

struct ConvGeometry {
  int channels, height, width;
  int kernel, stride, padding;
  int out_h, out_w;

  int patch() const { return channels * kernel * kernel; }
  int positions() const { return out_h * out_w; }
};

/// Writes the patches of one image into columns [col0, col0 + out_h*out_w)
/// of a [C*k*k, ld] matrix.
template <class T>
void im2col(const T* img, const ConvGeometry& g, T* cols, std::size_t ld, std::size_t col0) {
  for (int c = 0; c < g.channels; ++c) {
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        T* row = cols + (static_cast<std::size_t>((c * g.kernel + ki) * g.kernel + kj)) * ld + col0;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ki;
          T* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = img + (static_cast<std::size_t>(c) * g.height + iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kj;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: accumulates columns back into the image.
template <class T>
void col2im(const T* cols, const ConvGeometry& g, std::size_t ld, std::size_t col0, T* img) {
  for (int c = 0; c < g.channels; ++c) {
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        const T* row = cols + (static_cast<std::size_t>((c * g.kernel + ki) * g.kernel + kj)) * ld + col0;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ki;
          if (iy < 0 || iy >= g.height) continue;
          const T* src = row + static_cast<std::size_t>(oy) * g.out_w;
          T* dst = img + (static_cast<std::size_t>(c) * g.height + iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kj;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace echonav::nn::blas

#endif  // ECHONAV_NN_BLAS_HPP_
