#include <algorithm>
#include <vector>

#include "tensor_internal.hpp"

// matmul / conv2d / pooling. Everything row-major; the gemm kernels keep the
// innermost loop contiguous so the compiler can vectorize them.

namespace sar {

namespace {

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      double av = arow[p];
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
void gemm_nt(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (int64_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
void gemm_tn(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c) {
  for (int64_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (int64_t i = 0; i < m; ++i) {
      double av = arow[i];
      double* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// Scatter x[b] (zero-padded view) into columns: col[Ci*kh*kw, Ho*Wo].
void im2col(const double* x, int64_t ci, int64_t h, int64_t w, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, int64_t ho, int64_t wo, double* col) {
  int64_t cols = ho * wo;
  for (int64_t c = 0; c < ci; ++c) {
    for (int64_t ky = 0; ky < kh; ++ky) {
      for (int64_t kx = 0; kx < kw; ++kx) {
        double* crow = col + ((c * kh + ky) * kw + kx) * cols;
        for (int64_t oy = 0; oy < ho; ++oy) {
          int64_t iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) {
            std::fill_n(crow + oy * wo, wo, 0.0);
            continue;
          }
          const double* xrow = x + (c * h + iy) * w;
          for (int64_t ox = 0; ox < wo; ++ox) {
            int64_t ix = ox * stride + kx - pad;
            crow[oy * wo + ox] = (ix >= 0 && ix < w) ? xrow[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Inverse of im2col: accumulate column gradients back into dx[b].
void col2im(const double* col, int64_t ci, int64_t h, int64_t w, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, int64_t ho, int64_t wo, double* dx) {
  int64_t cols = ho * wo;
  for (int64_t c = 0; c < ci; ++c) {
    for (int64_t ky = 0; ky < kh; ++ky) {
      for (int64_t kx = 0; kx < kw; ++kx) {
        const double* crow = col + ((c * kh + ky) * kw + kx) * cols;
        for (int64_t oy = 0; oy < ho; ++oy) {
          int64_t iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          double* xrow = dx + (c * h + iy) * w;
          for (int64_t ox = 0; ox < wo; ++ox) {
            int64_t ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < w) xrow[ix] += crow[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  auto an = a.node();
  auto bn = b.node();
  if (an->shape.size() != 2 || bn->shape.size() != 2)
    throw std::invalid_argument("matmul expects 2-D tensors, got " + shape_str(an->shape) +
                                " and " + shape_str(bn->shape));
  int64_t m = an->shape[0], k = an->shape[1], k2 = bn->shape[0], n = bn->shape[1];
  if (k != k2)
    throw std::invalid_argument("matmul inner dims differ: " + shape_str(an->shape) + " x " +
                                shape_str(bn->shape));
  std::vector<double> out(m * n, 0.0);
  gemm_nn(m, n, k, an->value.data(), bn->value.data(), out.data());
  auto on = detail::make_node({m, n}, std::move(out), detail::out_requires(an, bn));
  if (on->requires_grad) {
    detail::record([an, bn, on, m, n, k]() {
      if (on->grad.empty()) return;
      if (an->requires_grad) {
        an->ensure_grad();  // dA += dC * B^T
        gemm_nt(m, k, n, on->grad.data(), bn->value.data(), an->grad.data());
      }
      if (bn->requires_grad) {
        bn->ensure_grad();  // dB += A^T * dC
        gemm_tn(k, n, m, an->value.data(), on->grad.data(), bn->grad.data());
      }
    });
  }
  return Tensor::wrap(on);
}

Tensor conv2d(const Tensor& x, const Tensor& w, int64_t stride, int64_t padding) {
  auto xn = x.node();
  auto wn = w.node();
  if (xn->shape.size() != 4 || wn->shape.size() != 4)
    throw std::invalid_argument("conv2d expects x[B,Ci,H,W], w[Co,Ci,kh,kw], got " +
                                shape_str(xn->shape) + " and " + shape_str(wn->shape));
  if (stride < 1 || padding < 0) throw std::invalid_argument("conv2d: bad stride/padding");
  int64_t b = xn->shape[0], ci = xn->shape[1], h = xn->shape[2], wd = xn->shape[3];
  int64_t co = wn->shape[0], ci2 = wn->shape[1], kh = wn->shape[2], kw = wn->shape[3];
  if (ci != ci2)
    throw std::invalid_argument("conv2d channel mismatch: x " + shape_str(xn->shape) + " vs w " +
                                shape_str(wn->shape));
  if (kh > h + 2 * padding || kw > wd + 2 * padding)
    throw std::invalid_argument("conv2d kernel larger than padded input");
  int64_t ho = (h + 2 * padding - kh) / stride + 1;
  int64_t wo = (wd + 2 * padding - kw) / stride + 1;
  int64_t krows = ci * kh * kw;
  int64_t cols = ho * wo;

  std::vector<double> out(b * co * cols, 0.0);
  std::vector<double> col(krows * cols);
  for (int64_t i = 0; i < b; ++i) {
    im2col(xn->value.data() + i * ci * h * wd, ci, h, wd, kh, kw, stride, padding, ho, wo,
           col.data());
    gemm_nn(co, cols, krows, wn->value.data(), col.data(), out.data() + i * co * cols);
  }
  auto on = detail::make_node({b, co, ho, wo}, std::move(out), detail::out_requires(xn, wn));
  if (on->requires_grad) {
    detail::record([xn, wn, on, b, ci, h, wd, co, kh, kw, stride, padding, ho, wo]() {
      if (on->grad.empty()) return;
      int64_t krows = ci * kh * kw;
      int64_t cols = ho * wo;
      std::vector<double> col(krows * cols);
      std::vector<double> dcol;
      if (xn->requires_grad) {
        xn->ensure_grad();
        dcol.resize(krows * cols);
      }
      if (wn->requires_grad) wn->ensure_grad();
      for (int64_t i = 0; i < b; ++i) {
        const double* dy = on->grad.data() + i * co * cols;
        if (wn->requires_grad) {
          im2col(xn->value.data() + i * ci * h * wd, ci, h, wd, kh, kw, stride, padding, ho,
                 wo, col.data());
          // dW += dY * col^T
          gemm_nt(co, krows, cols, dy, col.data(), wn->grad.data());
        }
        if (xn->requires_grad) {
          // dcol = W^T * dY, then scatter back
          std::fill(dcol.begin(), dcol.end(), 0.0);
          gemm_tn(krows, cols, co, wn->value.data(), dy, dcol.data());
          col2im(dcol.data(), ci, h, wd, kh, kw, stride, padding, ho, wo,
                 xn->grad.data() + i * ci * h * wd);
        }
      }
    });
  }
  return Tensor::wrap(on);
}

Tensor avg_pool2x2(const Tensor& x) {
  auto xn = x.node();
  if (xn->shape.size() != 4)
    throw std::invalid_argument("avg_pool2x2 expects [B,C,H,W], got " + shape_str(xn->shape));
  int64_t b = xn->shape[0], c = xn->shape[1], h = xn->shape[2], w = xn->shape[3];
  if (h % 2 || w % 2)
    throw std::invalid_argument("avg_pool2x2 needs even H,W, got " + shape_str(xn->shape));
  int64_t ho = h / 2, wo = w / 2;
  std::vector<double> out(b * c * ho * wo);
  for (int64_t i = 0; i < b * c; ++i) {
    const double* xp = xn->value.data() + i * h * w;
    double* op = out.data() + i * ho * wo;
    for (int64_t y = 0; y < ho; ++y)
      for (int64_t z = 0; z < wo; ++z)
        op[y * wo + z] = 0.25 * (xp[(2 * y) * w + 2 * z] + xp[(2 * y) * w + 2 * z + 1] +
                                 xp[(2 * y + 1) * w + 2 * z] + xp[(2 * y + 1) * w + 2 * z + 1]);
  }
  auto on = detail::make_node({b, c, ho, wo}, std::move(out), detail::out_requires(xn));
  if (on->requires_grad) {
    detail::record([xn, on, b, c, h, w, ho, wo]() {
      if (on->grad.empty() || !xn->requires_grad) return;
      xn->ensure_grad();
      for (int64_t i = 0; i < b * c; ++i) {
        double* dx = xn->grad.data() + i * h * w;
        const double* dy = on->grad.data() + i * ho * wo;
        for (int64_t y = 0; y < ho; ++y)
          for (int64_t z = 0; z < wo; ++z) {
            double g = 0.25 * dy[y * wo + z];
            dx[(2 * y) * w + 2 * z] += g;
            dx[(2 * y) * w + 2 * z + 1] += g;
            dx[(2 * y + 1) * w + 2 * z] += g;
            dx[(2 * y + 1) * w + 2 * z + 1] += g;
          }
      }
    });
  }
  return Tensor::wrap(on);
}

}  // namespace sar
