// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "attnocr/autodiff/tape.hpp"

namespace attnocr {

namespace detail {

inline void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape) fail(ErrorKind::shape, std::string(op) + ": operands live on different records");
}

inline void require_same_shape(Var a, Var b, const char* op) {
  require_same_tape(a, b, op);
  if (a.shape() != b.shape())
    fail(ErrorKind::shape, std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                               shape_str(b.shape()));
}

inline void require_rank(Var a, std::size_t r, const char* op) {
  if (a.shape().size() != r)
    fail(ErrorKind::shape, std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                               shape_str(a.shape()));
}

/// Applies f pointwise; df maps (input, output) to the local derivative.
template <class F, class DF>
Var unary(Var x, F f, DF df) {
  Tape& t = *x.tape;
  const std::size_t xi = x.id;
  return t.op(
      x.shape(), {xi},
      [xi, f](Tape& tp, Tape::Node& self) {
        const auto& in = tp.out(xi).values;
        for (std::size_t k = 0; k < in.size(); ++k) self.out.values[k] = f(in[k]);
      },
      [xi, df](Tape& tp, Tape::Node& self) {
        double* gx = tp.grad_of(xi);
        if (!gx) return;
        const auto& in = tp.out(xi).values;
        for (std::size_t k = 0; k < in.size(); ++k)
          gx[k] += self.out.grad[k] * df(in[k], self.out.values[k]);
      });
}

}  // namespace detail

/// C = A * B for A [m x k], B [k x n].
inline Var matmul(Var a, Var b) {
  detail::require_same_tape(a, b, "matmul");
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k)
    fail(ErrorKind::shape, "matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                               shape_str(b.shape()));
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->op(
      {m, n}, {ai, bi},
      [=](Tape& tp, Tape::Node& self) {
        const double* A = tp.out(ai).values.data();
        const double* B = tp.out(bi).values.data();
        double* C = self.out.values.data();
        std::fill(C, C + m * n, 0.0);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            if (av == 0.0) continue;
            const double* brow = B + p * n;
            double* crow = C + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
          }
      },
      [=](Tape& tp, Tape::Node& self) {
        const double* A = tp.out(ai).values.data();
        const double* B = tp.out(bi).values.data();
        const double* dC = self.out.grad.data();
        // dA = dC * B^T
        if (double* dA = tp.grad_of(ai)) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double* brow = B + p * n;
              const double* crow = dC + i * n;
              double s = 0.0;
              for (std::size_t j = 0; j < n; ++j) s += crow[j] * brow[j];
              dA[i * k + p] += s;
            }
        }
        // dB = A^T * dC
        if (double* dB = tp.grad_of(bi)) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double av = A[i * k + p];
              if (av == 0.0) continue;
              const double* crow = dC + i * n;
              double* brow = dB + p * n;
              for (std::size_t j = 0; j < n; ++j) brow[j] += av * crow[j];
            }
        }
      });
}

enum class Padding { same, valid };

/// Output length and leading pad along one axis.
struct ConvAxis {
  std::size_t out;
  std::size_t pad_before;
};

/// Standard stride/padding arithmetic. `same` gives ceil(in / stride) with the
/// extra pad placed after, `valid` gives floor((in - k) / stride) + 1.
inline ConvAxis conv_axis(std::size_t in, std::size_t k, std::size_t stride, Padding pad) {
  if (pad == Padding::valid) {
    if (k > in) return {0, 0};
    return {(in - k) / stride + 1, 0};
  }
  const std::size_t out = (in + stride - 1) / stride;
  const std::size_t needed = (out - 1) * stride + k;
  const std::size_t total = needed > in ? needed - in : 0;
  return {out, total / 2};
}

/// Cross-correlation of input [h x w x c_in] with kernel [kh x kw x c_in x c_out].
/// Kernels need not be square (1 x n and n x 1 are the interesting cases).
inline Var conv2d(Var input, Var kernel, std::size_t stride, Padding padding) {
  detail::require_same_tape(input, kernel, "conv2d");
  detail::require_rank(input, 3, "conv2d");
  detail::require_rank(kernel, 4, "conv2d");
  if (stride == 0) fail(ErrorKind::shape, "conv2d: stride must be positive");
  const Shape is = input.shape();
  const Shape ks = kernel.shape();
  const std::size_t H = is[0], W = is[1], C = is[2];
  const std::size_t KH = ks[0], KW = ks[1], CO = ks[3];
  if (ks[2] != C)
    fail(ErrorKind::shape, "conv2d: kernel " + shape_str(ks) + " expects " + std::to_string(ks[2]) +
                               " input channels, input " + shape_str(is) + " has " + std::to_string(C));
  const ConvAxis ay = conv_axis(H, KH, stride, padding);
  const ConvAxis ax = conv_axis(W, KW, stride, padding);
  const std::size_t padded_h = padding == Padding::same ? std::max(H, (ay.out - 1) * stride + KH) : H;
  const std::size_t padded_w = padding == Padding::same ? std::max(W, (ax.out - 1) * stride + KW) : W;
  if (KH > padded_h || KW > padded_w || ay.out == 0 || ax.out == 0)
    fail(ErrorKind::shape, "conv2d: kernel " + shape_str(ks) + " larger than padded input " +
                               shape_str(is));
  const std::size_t OH = ay.out, OW = ax.out;
  const long py = static_cast<long>(ay.pad_before), px = static_cast<long>(ax.pad_before);
  const std::size_t ii = input.id, ki = kernel.id;

  return input.tape->op(
      {OH, OW, CO}, {ii, ki},
      [=](Tape& tp, Tape::Node& self) {
        const double* X = tp.out(ii).values.data();
        const double* K = tp.out(ki).values.data();
        double* Y = self.out.values.data();
        std::fill(Y, Y + OH * OW * CO, 0.0);
        for (std::size_t oy = 0; oy < OH; ++oy)
          for (std::size_t ox = 0; ox < OW; ++ox) {
            double* yrow = Y + (oy * OW + ox) * CO;
            for (std::size_t ky = 0; ky < KH; ++ky) {
              const long iy = static_cast<long>(oy * stride + ky) - py;
              if (iy < 0 || iy >= static_cast<long>(H)) continue;
              for (std::size_t kx = 0; kx < KW; ++kx) {
                const long ix = static_cast<long>(ox * stride + kx) - px;
                if (ix < 0 || ix >= static_cast<long>(W)) continue;
                const double* xpix = X + (static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * C;
                const double* kblk = K + (ky * KW + kx) * C * CO;
                for (std::size_t c = 0; c < C; ++c) {
                  const double xv = xpix[c];
                  if (xv == 0.0) continue;
                  const double* krow = kblk + c * CO;
                  for (std::size_t o = 0; o < CO; ++o) yrow[o] += xv * krow[o];
                }
              }
            }
          }
      },
      [=](Tape& tp, Tape::Node& self) {
        const double* X = tp.out(ii).values.data();
        const double* K = tp.out(ki).values.data();
        const double* dY = self.out.grad.data();
        double* dX = tp.grad_of(ii);
        double* dK = tp.grad_of(ki);
        for (std::size_t oy = 0; oy < OH; ++oy)
          for (std::size_t ox = 0; ox < OW; ++ox) {
            const double* gy = dY + (oy * OW + ox) * CO;
            for (std::size_t ky = 0; ky < KH; ++ky) {
              const long iy = static_cast<long>(oy * stride + ky) - py;
              if (iy < 0 || iy >= static_cast<long>(H)) continue;
              for (std::size_t kx = 0; kx < KW; ++kx) {
                const long ix = static_cast<long>(ox * stride + kx) - px;
                if (ix < 0 || ix >= static_cast<long>(W)) continue;
                const std::size_t pix = (static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * C;
                const std::size_t blk = (ky * KW + kx) * C * CO;
                for (std::size_t c = 0; c < C; ++c) {
                  const double* krow = K + blk + c * CO;
                  if (dX) {
                    double s = 0.0;
                    for (std::size_t o = 0; o < CO; ++o) s += gy[o] * krow[o];
                    dX[pix + c] += s;
                  }
                  if (dK) {
                    const double xv = X[pix + c];
                    if (xv == 0.0) continue;
                    double* gk = dK + blk + c * CO;
                    for (std::size_t o = 0; o < CO; ++o) gk[o] += xv * gy[o];
                  }
                }
              }
            }
          }
      });
}

inline Var tanh(Var x) {
  return detail::unary(x, [](double v) { return std::tanh(v); },
                       [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(Var x) {
  return detail::unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var exp(Var x) {
  return detail::unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Var scale(Var x, double s) {
  return detail::unary(x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

inline Var add(Var a, Var b) {
  detail::require_same_shape(a, b, "add");
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->op(
      a.shape(), {ai, bi},
      [=](Tape& tp, Tape::Node& self) {
        const auto& x = tp.out(ai).values;
        const auto& y = tp.out(bi).values;
        for (std::size_t k = 0; k < x.size(); ++k) self.out.values[k] = x[k] + y[k];
      },
      [=](Tape& tp, Tape::Node& self) {
        const auto& g = self.out.grad;
        if (double* ga = tp.grad_of(ai))
          for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
        if (double* gb = tp.grad_of(bi))
          for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k];
      });
}

inline Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

inline Var mul(Var a, Var b) {
  detail::require_same_shape(a, b, "mul");
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->op(
      a.shape(), {ai, bi},
      [=](Tape& tp, Tape::Node& self) {
        const auto& x = tp.out(ai).values;
        const auto& y = tp.out(bi).values;
        for (std::size_t k = 0; k < x.size(); ++k) self.out.values[k] = x[k] * y[k];
      },
      [=](Tape& tp, Tape::Node& self) {
        const auto& g = self.out.grad;
        const auto& x = tp.out(ai).values;
        const auto& y = tp.out(bi).values;
        if (double* ga = tp.grad_of(ai))
          for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * y[k];
        if (double* gb = tp.grad_of(bi))
          for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * x[k];
      });
}

/// Softmax over every entry of x (flattened), max-subtracted.
inline Var softmax(Var x) {
  if (x.size() == 0) fail(ErrorKind::shape, "softmax: empty input");
  const std::size_t xi = x.id;
  return x.tape->op(
      x.shape(), {xi},
      [xi](Tape& tp, Tape::Node& self) {
        const auto& z = tp.out(xi).values;
        auto& y = self.out.values;
        const double mx = *std::max_element(z.begin(), z.end());
        double total = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) total += (y[k] = std::exp(z[k] - mx));
        for (double& v : y) v /= total;
      },
      [xi](Tape& tp, Tape::Node& self) {
        double* gx = tp.grad_of(xi);
        if (!gx) return;
        const auto& y = self.out.values;
        const auto& g = self.out.grad;
        double dot = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) dot += g[k] * y[k];
        for (std::size_t k = 0; k < y.size(); ++k) gx[k] += y[k] * (g[k] - dot);
      });
}

/// Same values, new shape of equal element count.
inline Var reshape(Var x, Shape shape) {
  if (shape_size(shape) != x.size())
    fail(ErrorKind::shape, "reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  const std::size_t xi = x.id;
  return x.tape->op(
      std::move(shape), {xi},
      [xi](Tape& tp, Tape::Node& self) { self.out.values = tp.out(xi).values; },
      [xi](Tape& tp, Tape::Node& self) {
        if (double* gx = tp.grad_of(xi))
          for (std::size_t k = 0; k < self.out.grad.size(); ++k) gx[k] += self.out.grad[k];
      });
}

/// Flattens and joins the inputs into one row vector [1 x total].
inline Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) fail(ErrorKind::shape, "concat: no inputs");
  std::vector<std::size_t> ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    detail::require_same_tape(parts.front(), p, "concat");
    ids.push_back(p.id);
    total += p.size();
  }
  return parts.front().tape->op(
      {1, total}, ids,
      [ids](Tape& tp, Tape::Node& self) {
        std::size_t off = 0;
        for (std::size_t id : ids) {
          const auto& v = tp.out(id).values;
          std::copy(v.begin(), v.end(), self.out.values.begin() + static_cast<std::ptrdiff_t>(off));
          off += v.size();
        }
      },
      [ids](Tape& tp, Tape::Node& self) {
        std::size_t off = 0;
        for (std::size_t id : ids) {
          const std::size_t n = tp.out(id).size();
          if (double* g = tp.grad_of(id))
            for (std::size_t k = 0; k < n; ++k) g[k] += self.out.grad[off + k];
          off += n;
        }
      });
}

/// Contiguous run [offset, offset + len) of the flattened input, as [1 x len].
inline Var slice(Var x, std::size_t offset, std::size_t len) {
  if (len == 0 || offset + len > x.size())
    fail(ErrorKind::shape, "slice: range [" + std::to_string(offset) + ", " + std::to_string(offset + len) +
                               ") outside " + shape_str(x.shape()));
  const std::size_t xi = x.id;
  return x.tape->op(
      {1, len}, {xi},
      [=](Tape& tp, Tape::Node& self) {
        const auto& v = tp.out(xi).values;
        std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(offset), len, self.out.values.begin());
      },
      [=](Tape& tp, Tape::Node& self) {
        if (double* g = tp.grad_of(xi))
          for (std::size_t k = 0; k < len; ++k) g[offset + k] += self.out.grad[k];
      });
}

/// Rows of table [n x m] selected by ids, as [len(ids) x m]. The gradient
/// scatters back into the selected rows only.
inline Var gather_rows(Var table, std::vector<std::size_t> ids) {
  detail::require_rank(table, 2, "gather_rows");
  const std::size_t n = table.shape()[0], m = table.shape()[1];
  if (ids.empty()) fail(ErrorKind::shape, "gather_rows: no ids");
  for (std::size_t id : ids)
    if (id >= n)
      fail(ErrorKind::shape, "gather_rows: index " + std::to_string(id) + " out of range for " +
                                 std::to_string(n) + " rows");
  const std::size_t ti = table.id;
  const std::size_t rows = ids.size();
  return table.tape->op(
      {rows, m}, {ti},
      [=](Tape& tp, Tape::Node& self) {
        const double* T = tp.out(ti).values.data();
        for (std::size_t r = 0; r < rows; ++r)
          std::copy_n(T + ids[r] * m, m, self.out.values.data() + r * m);
      },
      [=](Tape& tp, Tape::Node& self) {
        double* g = tp.grad_of(ti);
        if (!g) return;
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t k = 0; k < m; ++k) g[ids[r] * m + k] += self.out.grad[r * m + k];
      });
}

/// Column means of x [r x c], as [1 x c].
inline Var mean_rows(Var x) {
  detail::require_rank(x, 2, "mean_rows");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  const std::size_t xi = x.id;
  return x.tape->op(
      {1, c}, {xi},
      [=](Tape& tp, Tape::Node& self) {
        const double* X = tp.out(xi).values.data();
        auto& y = self.out.values;
        std::fill(y.begin(), y.end(), 0.0);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) y[j] += X[i * c + j];
        for (double& v : y) v /= static_cast<double>(r);
      },
      [=](Tape& tp, Tape::Node& self) {
        double* g = tp.grad_of(xi);
        if (!g) return;
        const double inv = 1.0 / static_cast<double>(r);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.out.grad[j] * inv;
      });
}

/// Sum of all entries, as a scalar [1].
inline Var sum(Var x) {
  const std::size_t xi = x.id;
  return x.tape->op(
      {1}, {xi},
      [xi](Tape& tp, Tape::Node& self) {
        double s = 0.0;
        for (double v : tp.out(xi).values) s += v;
        self.out.values[0] = s;
      },
      [xi](Tape& tp, Tape::Node& self) {
        if (double* g = tp.grad_of(xi))
          for (std::size_t k = 0; k < tp.out(xi).size(); ++k) g[k] += self.out.grad[0];
      });
}

/// x [m x n] plus the row b [1 x n] on every row. Realized as
/// x + ones[m x 1] * b so no broadcasting rule is involved.
inline Var add_bias(Var x, Var b) {
  detail::require_rank(x, 2, "add_bias");
  const std::size_t m = x.shape()[0];
  if (m == 1) return add(x, reshape(b, x.shape()));
  Var ones = x.tape->constant(Tensor({m, 1}, 1.0));
  return add(x, matmul(ones, reshape(b, {1, b.size()})));
}

}  // namespace attnocr
