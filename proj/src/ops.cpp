#include "bcnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <utility>

#include "bcnet/errors.hpp"

namespace bcnet::ops {

namespace {

template <typename T>
using Node = typename BasicTensor<T>::Node;

template <typename T, typename Fn>
BasicTensor<T> make_result(Shape shape, std::vector<T> data, std::initializer_list<BasicTensor<T>> parents,
                           const char* op, Fn&& backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool track = false;
  if (grad_enabled()) {
    for (const auto& p : parents) track = track || p.requires_grad();
  }
  if (track) {
    node->requires_grad = true;
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::forward<Fn>(backward);
  }
  return BasicTensor<T>::from_node(std::move(node));
}

// Grad buffer of parent `i`, or nullptr when that parent is not tracked.
template <typename N>
auto* parent_grad(N& self, std::size_t i) {
  using T = typename decltype(self.data)::value_type;
  auto& p = *self.parents[i];
  return p.requires_grad ? p.grad_buffer().data() : static_cast<T*>(nullptr);
}

template <typename N>
const auto& parent_data(const N& self, std::size_t i) {
  return self.parents[i]->data;
}

template <typename T>
void require_rank(const BasicTensor<T>& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_to_string(t.shape()));
  }
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

}  // namespace

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n, T(0));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    T* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = pa[i * k + p];
      const T* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_result<T>({m, n}, std::move(out), {a, b}, "matmul", [m, k, n](Node<T>& self) {
    const T* g = self.grad.data();
    const auto& av = parent_data(self, 0);
    const auto& bv = parent_data(self, 1);
    if (T* da = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          T acc = 0;
          const T* grow = g + i * n;
          const T* brow = bv.data() + p * n;
#pragma omp simd reduction(+ : acc)
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          da[i * k + p] += acc;
        }
      }
    }
    if (T* db = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = av[i * k + p];
          T* drow = db + p * n;
          for (std::size_t j = 0; j < n; ++j) drow[j] += aip * grow[j];
        }
      }
    }
  });
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<T> out(m * n);
  const T* pa = a.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = pa[i * n + j];
  return make_result<T>({n, m}, std::move(out), {a}, "transpose", [m, n](Node<T>& self) {
    if (T* da = parent_grad(self, 0)) {
      const T* g = self.grad.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) da[i * n + j] += g[j * m + i];
    }
  });
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, "add", [](Node<T>& self) {
    const auto& g = self.grad;
    for (std::size_t p = 0; p < 2; ++p) {
      if (T* d = parent_grad(self, p)) {
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
    }
  });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, "mul", [](Node<T>& self) {
    const auto& g = self.grad;
    const auto& av = parent_data(self, 0);
    const auto& bv = parent_data(self, 1);
    if (T* da = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
    }
    if (T* db = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
    }
  });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return make_result<T>(a.shape(), std::move(out), {a}, "scale", [factor](Node<T>& self) {
    if (T* d = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * factor;
    }
  });
}

template <typename T>
BasicTensor<T> add_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias) {
  const std::size_t c = bias.numel();
  if (x.shape().back() != c) {
    throw DimensionError("add_bias: bias " + shape_to_string(bias.shape()) + " does not match last dim of " +
                         shape_to_string(x.shape()));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  const T* pb = bias.data().data();
  for (std::size_t i = 0; i < out.size(); i += c)
    for (std::size_t j = 0; j < c; ++j) out[i + j] += pb[j];
  return make_result<T>(x.shape(), std::move(out), {x, bias}, "add_bias", [c](Node<T>& self) {
    const auto& g = self.grad;
    if (T* dx = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
    }
    if (T* db = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < g.size(); i += c)
        for (std::size_t j = 0; j < c; ++j) db[j] += g[i + j];
    }
  });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return make_result<T>(x.shape(), std::move(out), {x}, "relu", [](Node<T>& self) {
    if (T* d = parent_grad(self, 0)) {
      const auto& xv = parent_data(self, 0);
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (xv[i] > T(0)) d[i] += self.grad[i];
      }
    }
  });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-x[i]));
  return make_result<T>(x.shape(), std::move(out), {x}, "sigmoid", [](Node<T>& self) {
    if (T* d = parent_grad(self, 0)) {
      const auto& y = self.data;
      for (std::size_t i = 0; i < y.size(); ++i) d[i] += self.grad[i] * y[i] * (T(1) - y[i]);
    }
  });
}

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, double eps) {
  require_rank(x, 2, "layer_norm");
  if (!(eps > 0)) throw UsageError("layer_norm: eps must be positive");
  const std::size_t n = x.dim(0), k = x.dim(1);
  std::vector<T> out(x.numel());
  std::vector<T> rstd(n);
  const T* px = x.data().data();
  for (std::size_t r = 0; r < n; ++r) {
    const T* row = px + r * k;
    double mu = 0;
    for (std::size_t j = 0; j < k; ++j) mu += row[j];
    mu /= static_cast<double>(k);
    double var = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double d = row[j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(k);
    const double inv = 1.0 / std::sqrt(var + eps);
    rstd[r] = static_cast<T>(inv);
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] = static_cast<T>((row[j] - mu) * inv);
  }
  return make_result<T>(x.shape(), std::move(out), {x}, "layer_norm",
                        [n, k, rstd = std::move(rstd)](Node<T>& self) {
                          T* d = parent_grad(self, 0);
                          if (!d) return;
                          const T* y = self.data.data();
                          const T* g = self.grad.data();
                          for (std::size_t r = 0; r < n; ++r) {
                            double mg = 0, mgy = 0;
                            for (std::size_t j = 0; j < k; ++j) {
                              mg += g[r * k + j];
                              mgy += static_cast<double>(g[r * k + j]) * y[r * k + j];
                            }
                            mg /= static_cast<double>(k);
                            mgy /= static_cast<double>(k);
                            for (std::size_t j = 0; j < k; ++j) {
                              const std::size_t i = r * k + j;
                              d[i] += static_cast<T>(rstd[r] * (g[i] - mg - y[i] * mgy));
                            }
                          }
                        });
}

template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t n = x.dim(0), m = x.dim(1);
  std::vector<T> out(x.numel());
  const T* px = x.data().data();
  for (std::size_t r = 0; r < n; ++r) {
    const T* row = px + r * m;
    T mx = row[0];
    for (std::size_t j = 0; j < m; ++j) {
      if (std::isnan(row[j])) throw NumericError("softmax_rows: NaN in row " + std::to_string(r));
      mx = std::max(mx, row[j]);
    }
    double total = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const T e = std::exp(row[j] - mx);
      out[r * m + j] = e;
      total += e;
    }
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < m; ++j) out[r * m + j] = static_cast<T>(out[r * m + j] * inv);
  }
  return make_result<T>(x.shape(), std::move(out), {x}, "softmax_rows", [n, m](Node<T>& self) {
    T* d = parent_grad(self, 0);
    if (!d) return;
    const T* y = self.data.data();
    const T* g = self.grad.data();
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0;
      for (std::size_t j = 0; j < m; ++j) dot += static_cast<double>(g[r * m + j]) * y[r * m + j];
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t i = r * m + j;
        d[i] += static_cast<T>(y[i] * (g[i] - dot));
      }
    }
  });
}

namespace {

// o[co] += sum_ci x[ci] * w[ci, co]
template <typename T>
void axpy_rows(T* __restrict__ o, const T* __restrict__ x, const T* __restrict__ w, int cin, int cout) {
  for (int ci = 0; ci < cin; ++ci) {
    const T xv = x[ci];
    const T* __restrict__ wrow = w + static_cast<std::size_t>(ci) * cout;
#pragma omp simd
    for (int co = 0; co < cout; ++co) o[co] += xv * wrow[co];
  }
}

// dx[ci] += sum_co w[ci, co] * g[co]
template <typename T>
void dot_rows(T* __restrict__ dx, const T* __restrict__ w, const T* __restrict__ g, int cin, int cout) {
  for (int ci = 0; ci < cin; ++ci) {
    const T* __restrict__ wrow = w + static_cast<std::size_t>(ci) * cout;
    T acc = 0;
#pragma omp simd reduction(+ : acc)
    for (int co = 0; co < cout; ++co) acc += wrow[co] * g[co];
    dx[ci] += acc;
  }
}

// dw[ci, co] += x[ci] * g[co]
template <typename T>
void outer_add(T* __restrict__ dw, const T* __restrict__ x, const T* __restrict__ g, int cin, int cout) {
  for (int ci = 0; ci < cin; ++ci) {
    const T xv = x[ci];
    T* __restrict__ drow = dw + static_cast<std::size_t>(ci) * cout;
#pragma omp simd
    for (int co = 0; co < cout; ++co) drow[co] += xv * g[co];
  }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b, int stride,
                      int pad) {
  require_rank(x, 3, "conv2d input");
  require_rank(w, 4, "conv2d kernel");
  if (w.dim(0) != w.dim(1)) throw DimensionError("conv2d: kernel must be square, got " + shape_to_string(w.shape()));
  if (w.dim(2) != x.dim(2)) {
    throw DimensionError("conv2d: input channels " + shape_to_string(x.shape()) + " do not match kernel " +
                         shape_to_string(w.shape()));
  }
  if (b.numel() != w.dim(3)) {
    throw DimensionError("conv2d: bias " + shape_to_string(b.shape()) + " does not match kernel " +
                         shape_to_string(w.shape()));
  }
  if (stride < 1 || pad < 0) throw UsageError("conv2d: stride must be >= 1 and pad >= 0");
  const int h = static_cast<int>(x.dim(0)), wd = static_cast<int>(x.dim(1));
  const int cin = static_cast<int>(x.dim(2)), cout = static_cast<int>(w.dim(3));
  const int k = static_cast<int>(w.dim(0));
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (wd + 2 * pad - k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw DimensionError("conv2d: kernel larger than padded input");

  std::vector<T> out(static_cast<std::size_t>(ho) * wo * cout);
  const T* px = x.data().data();
  const T* pw = w.data().data();
  const T* pb = b.data().data();
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      T* o = out.data() + (static_cast<std::size_t>(oy) * wo + ox) * cout;
      for (int co = 0; co < cout; ++co) o[co] = pb[co];
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= wd) continue;
          const T* xin = px + (static_cast<std::size_t>(iy) * wd + ix) * cin;
          const T* wk = pw + static_cast<std::size_t>(ky * k + kx) * cin * cout;
          axpy_rows(o, xin, wk, cin, cout);
        }
      }
    }
  }
  Shape shape{static_cast<std::size_t>(ho), static_cast<std::size_t>(wo), static_cast<std::size_t>(cout)};
  return make_result<T>(std::move(shape), std::move(out), {x, w, b}, "conv2d",
                        [=](Node<T>& self) {
                          const T* g = self.grad.data();
                          const T* xv = parent_data(self, 0).data();
                          const T* wv = parent_data(self, 1).data();
                          T* dx = parent_grad(self, 0);
                          T* dw = parent_grad(self, 1);
                          if (T* db = parent_grad(self, 2)) {
                            for (int p = 0; p < ho * wo; ++p)
                              for (int co = 0; co < cout; ++co) db[co] += g[static_cast<std::size_t>(p) * cout + co];
                          }
                          if (!dx && !dw) return;
                          for (int oy = 0; oy < ho; ++oy) {
                            for (int ox = 0; ox < wo; ++ox) {
                              const T* go = g + (static_cast<std::size_t>(oy) * wo + ox) * cout;
                              for (int ky = 0; ky < k; ++ky) {
                                const int iy = oy * stride - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < k; ++kx) {
                                  const int ix = ox * stride - pad + kx;
                                  if (ix < 0 || ix >= wd) continue;
                                  const std::size_t xoff = (static_cast<std::size_t>(iy) * wd + ix) * cin;
                                  const std::size_t woff = static_cast<std::size_t>(ky * k + kx) * cin * cout;
                                  if (dx) dot_rows(dx + xoff, wv + woff, go, cin, cout);
                                  if (dw) outer_add(dw + woff, xv + xoff, go, cin, cout);
                                }
                              }
                            }
                          }
                        });
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double w_hi;  // weight of `hi`; `lo` gets 1 - w_hi
};

// Source taps for doubling one axis with half-pixel centers, clamped at the edges.
std::vector<Tap> upsample_taps(std::size_t in) {
  std::vector<Tap> taps(2 * in);
  for (std::size_t o = 0; o < 2 * in; ++o) {
    double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    if (src < 0) src = 0;
    auto lo = static_cast<std::size_t>(src);
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

template <typename T>
BasicTensor<T> bilinear_upsample2x(const BasicTensor<T>& x) {
  require_rank(x, 3, "bilinear_upsample2x");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  auto ty = upsample_taps(h);
  auto tx = upsample_taps(w);
  const std::size_t ho = 2 * h, wo = 2 * w;
  std::vector<T> out(ho * wo * c);
  const T* px = x.data().data();
  for (std::size_t oy = 0; oy < ho; ++oy) {
    const auto& a = ty[oy];
    for (std::size_t ox = 0; ox < wo; ++ox) {
      const auto& b = tx[ox];
      const T w00 = static_cast<T>((1 - a.w_hi) * (1 - b.w_hi)), w01 = static_cast<T>((1 - a.w_hi) * b.w_hi);
      const T w10 = static_cast<T>(a.w_hi * (1 - b.w_hi)), w11 = static_cast<T>(a.w_hi * b.w_hi);
      const T* p00 = px + (a.lo * w + b.lo) * c;
      const T* p01 = px + (a.lo * w + b.hi) * c;
      const T* p10 = px + (a.hi * w + b.lo) * c;
      const T* p11 = px + (a.hi * w + b.hi) * c;
      T* o = out.data() + (oy * wo + ox) * c;
      for (std::size_t ch = 0; ch < c; ++ch) o[ch] = w00 * p00[ch] + w01 * p01[ch] + w10 * p10[ch] + w11 * p11[ch];
    }
  }
  return make_result<T>({ho, wo, c}, std::move(out), {x}, "bilinear_upsample2x",
                        [=, ty = std::move(ty), tx = std::move(tx)](Node<T>& self) {
                          T* d = parent_grad(self, 0);
                          if (!d) return;
                          const T* g = self.grad.data();
                          for (std::size_t oy = 0; oy < ho; ++oy) {
                            const auto& a = ty[oy];
                            for (std::size_t ox = 0; ox < wo; ++ox) {
                              const auto& b = tx[ox];
                              const T w00 = static_cast<T>((1 - a.w_hi) * (1 - b.w_hi));
                              const T w01 = static_cast<T>((1 - a.w_hi) * b.w_hi);
                              const T w10 = static_cast<T>(a.w_hi * (1 - b.w_hi));
                              const T w11 = static_cast<T>(a.w_hi * b.w_hi);
                              const T* go = g + (oy * wo + ox) * c;
                              T* d00 = d + (a.lo * w + b.lo) * c;
                              T* d01 = d + (a.lo * w + b.hi) * c;
                              T* d10 = d + (a.hi * w + b.lo) * c;
                              T* d11 = d + (a.hi * w + b.hi) * c;
                              for (std::size_t ch = 0; ch < c; ++ch) {
                                d00[ch] += w00 * go[ch];
                                d01[ch] += w01 * go[ch];
                                d10[ch] += w10 * go[ch];
                                d11[ch] += w11 * go[ch];
                              }
                            }
                          }
                        });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " + shape_to_string(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>(std::move(shape), std::move(out), {x}, "reshape", [](Node<T>& self) {
    if (T* d = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> flatten_spatial(const BasicTensor<T>& x) {
  require_rank(x, 3, "flatten_spatial");
  return reshape(x, {x.dim(0) * x.dim(1), x.dim(2)});
}

template <typename T>
BasicTensor<T> unflatten_spatial(const BasicTensor<T>& x, std::size_t height, std::size_t width) {
  require_rank(x, 2, "unflatten_spatial");
  if (x.dim(0) != height * width) {
    throw DimensionError("unflatten_spatial: " + shape_to_string(x.shape()) + " has no " + std::to_string(height) +
                         "x" + std::to_string(width) + " layout");
  }
  return reshape(x, {height, width, x.dim(1)});
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  double acc = 0;
  for (T v : x.data()) acc += v;
  return make_result<T>({1}, {static_cast<T>(acc)}, {x}, "sum", [](Node<T>& self) {
    if (T* d = parent_grad(self, 0)) {
      const T g = self.grad[0];
      const std::size_t n = self.parents[0]->data.size();
      for (std::size_t i = 0; i < n; ++i) d[i] += g;
    }
  });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  double acc = 0;
  for (T v : x.data()) acc += v;
  const double n = static_cast<double>(x.numel());
  return make_result<T>({1}, {static_cast<T>(acc / n)}, {x}, "mean", [](Node<T>& self) {
    if (T* d = parent_grad(self, 0)) {
      const std::size_t n = self.parents[0]->data.size();
      const T g = static_cast<T>(self.grad[0] / static_cast<double>(n));
      for (std::size_t i = 0; i < n; ++i) d[i] += g;
    }
  });
}

template <typename T>
BasicTensor<T> bce_with_logits(const BasicTensor<T>& logits, const BasicTensor<T>& target) {
  require_same_shape(logits, target, "bce_with_logits");
  double acc = 0;
  const std::size_t n = logits.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits[i], t = target[i];
    if (std::isnan(z)) throw NumericError("bce_with_logits: NaN logit at index " + std::to_string(i));
    acc += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  std::vector<T> tv(target.data().begin(), target.data().end());
  return make_result<T>({1}, {static_cast<T>(acc / static_cast<double>(n))}, {logits}, "bce_with_logits",
                        [tv = std::move(tv)](Node<T>& self) {
                          T* d = parent_grad(self, 0);
                          if (!d) return;
                          const auto& z = parent_data(self, 0);
                          const double g = static_cast<double>(self.grad[0]) / static_cast<double>(z.size());
                          for (std::size_t i = 0; i < z.size(); ++i) {
                            const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(z[i])));
                            d[i] += static_cast<T>(g * (s - tv[i]));
                          }
                        });
}

#define BCNET_INSTANTIATE_OPS(T)                                                                          \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> transpose(const BasicTensor<T>&);                                               \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                              \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                              \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                                                \
  template BasicTensor<T> add_bias(const BasicTensor<T>&, const BasicTensor<T>&);                         \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                                    \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                                 \
  template BasicTensor<T> layer_norm(const BasicTensor<T>&, double);                                      \
  template BasicTensor<T> softmax_rows(const BasicTensor<T>&);                                            \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, int, \
                                 int);                                                                    \
  template BasicTensor<T> bilinear_upsample2x(const BasicTensor<T>&);                                     \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                          \
  template BasicTensor<T> flatten_spatial(const BasicTensor<T>&);                                         \
  template BasicTensor<T> unflatten_spatial(const BasicTensor<T>&, std::size_t, std::size_t);             \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                                     \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                                    \
  template BasicTensor<T> bce_with_logits(const BasicTensor<T>&, const BasicTensor<T>&);

BCNET_INSTANTIATE_OPS(float)
BCNET_INSTANTIATE_OPS(double)

#undef BCNET_INSTANTIATE_OPS

}  // namespace bcnet::ops
