#include "autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "util/error.hpp"

namespace cellclip::ad {

namespace {

template <class T>
using Backward = std::function<void(Node<T>&)>;

template <class T>
Var<T> make_op(const char* op, Shape shape, std::vector<T> value,
               std::vector<std::shared_ptr<Node<T>>> inputs, Backward<T> bw) {
  for (T v : value) {
    if (!std::isfinite(v)) fail(Errc::numeric, "non-finite value produced by {}", op);
  }
  auto node = std::make_shared<Node<T>>();
  node->id = next_node_id();
  node->shape = shape;
  node->value = std::move(value);
  node->op = op;
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const auto& n) { return n->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(bw);
  }
  return Var<T>(std::move(node));
}

// Grad buffer of input i, or nullptr when it does not need one.
template <class T>
T* grad_of(Node<T>& n, std::size_t i) {
  auto& in = *n.inputs[i];
  if (!in.requires_grad) return nullptr;
  in.ensure_grad();
  return in.grad.data();
}

void check_same(const Shape& a, const Shape& b, const char* op) {
  if (!(a == b)) {
    fail(Errc::shape, "{}: shape mismatch {}x{} vs {}x{}", op, a.rows, a.cols, b.rows, b.cols);
  }
}

// out[m×n] = a[m×k] · b[k×n], optionally transposing either operand, with
// double accumulation in a fixed (i, k, j) order.
template <class T>
void gemm(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n,
          bool trans_a, bool trans_b, bool accumulate) {
  std::vector<double> acc(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = trans_a ? a[p * m + i] : a[i * k + p];
      if (av == 0.0) continue;
      if (trans_b) {
        for (std::size_t j = 0; j < n; ++j) acc[j] += av * b[j * k + p];
      } else {
        const T* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
      }
    }
    T* orow = out + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      orow[j] = accumulate ? static_cast<T>(orow[j] + acc[j]) : static_cast<T>(acc[j]);
    }
  }
}

template <class T, class F, class D>
Var<T> unary(const char* op, const Var<T>& x, F forward, D derivative) {
  std::vector<T> y(x.size());
  const auto xv = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<T>(forward(static_cast<double>(xv[i])));
  return make_op<T>(op, x.shape(), std::move(y), {x.node()}, [derivative](Node<T>& n) {
    T* gx = grad_of(n, 0);
    if (!gx) return;
    const auto& xin = n.inputs[0]->value;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      gx[i] += static_cast<T>(n.grad[i] * derivative(static_cast<double>(xin[i]),
                                                     static_cast<double>(n.value[i])));
    }
  });
}

}  // namespace

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a.cols() != b.rows()) {
    fail(Errc::shape, "matmul: inner dimensions differ ({}x{} · {}x{})", a.rows(), a.cols(),
         b.rows(), b.cols());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<T> out(m * n);
  gemm(a.value().data(), b.value().data(), out.data(), m, k, n, false, false, false);
  return make_op<T>("matmul", {m, n}, std::move(out), {a.node(), b.node()},
                    [m, k, n](Node<T>& node) {
                      const T* av = node.inputs[0]->value.data();
                      const T* bv = node.inputs[1]->value.data();
                      if (T* ga = grad_of(node, 0)) gemm(node.grad.data(), bv, ga, m, n, k, false, true, true);
                      if (T* gb = grad_of(node, 1)) gemm(av, node.grad.data(), gb, k, m, n, true, false, true);
                    });
}

template <class T>
Var<T> transpose(const Var<T>& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<T> out(m * n);
  const auto av = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_op<T>("transpose", {n, m}, std::move(out), {a.node()}, [m, n](Node<T>& node) {
    T* ga = grad_of(node, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += node.grad[j * m + i];
  });
}

template <class T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  if (shape.size() != a.size() || shape.size() == 0) {
    fail(Errc::shape, "reshape: {}x{} cannot become {}x{}", a.rows(), a.cols(), shape.rows, shape.cols);
  }
  std::vector<T> out(a.value().begin(), a.value().end());
  return make_op<T>("reshape", shape, std::move(out), {a.node()}, [](Node<T>& node) {
    if (T* g = grad_of(node, 0))
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
  });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  check_same(a.shape(), b.shape(), "add");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_op<T>("add", a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& node) {
    for (std::size_t s = 0; s < 2; ++s) {
      if (T* g = grad_of(node, s))
        for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
    }
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  check_same(a.shape(), b.shape(), "sub");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_op<T>("sub", a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& node) {
    if (T* g = grad_of(node, 0))
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
    if (T* g = grad_of(node, 1))
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] -= node.grad[i];
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  check_same(a.shape(), b.shape(), "mul");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_op<T>("mul", a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& node) {
    const auto& av = node.inputs[0]->value;
    const auto& bv = node.inputs[1]->value;
    if (T* g = grad_of(node, 0))
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i] * bv[i];
    if (T* g = grad_of(node, 1))
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i] * av[i];
  });
}

template <class T>
Var<T> add_row(const Var<T>& x, const Var<T>& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    fail(Errc::shape, "add_row: bias must be 1x{}, got {}x{}", x.cols(), bias.rows(), bias.cols());
  }
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x.value()[i * n + j] + bias.value()[j];
  return make_op<T>("add_row", x.shape(), std::move(out), {x.node(), bias.node()},
                    [m, n](Node<T>& node) {
                      if (T* g = grad_of(node, 0))
                        for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
                      if (T* g = grad_of(node, 1)) {
                        for (std::size_t j = 0; j < n; ++j) {
                          double acc = 0.0;
                          for (std::size_t i = 0; i < m; ++i) acc += node.grad[i * n + j];
                          g[j] += static_cast<T>(acc);
                        }
                      }
                    });
}

template <class T>
Var<T> mul_col(const Var<T>& x, const Var<T>& c) {
  if (c.cols() != 1 || c.rows() != x.rows()) {
    fail(Errc::shape, "mul_col: factor must be {}x1, got {}x{}", x.rows(), c.rows(), c.cols());
  }
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x.value()[i * n + j] * c.value()[i];
  return make_op<T>("mul_col", x.shape(), std::move(out), {x.node(), c.node()},
                    [m, n](Node<T>& node) {
                      const auto& xv = node.inputs[0]->value;
                      const auto& cv = node.inputs[1]->value;
                      if (T* g = grad_of(node, 0))
                        for (std::size_t i = 0; i < m; ++i)
                          for (std::size_t j = 0; j < n; ++j) g[i * n + j] += node.grad[i * n + j] * cv[i];
                      if (T* g = grad_of(node, 1)) {
                        for (std::size_t i = 0; i < m; ++i) {
                          double acc = 0.0;
                          for (std::size_t j = 0; j < n; ++j) acc += double(node.grad[i * n + j]) * xv[i * n + j];
                          g[i] += static_cast<T>(acc);
                        }
                      }
                    });
}

template <class T>
Var<T> scale(const Var<T>& x, double c) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(x.value()[i] * c);
  return make_op<T>("scale", x.shape(), std::move(out), {x.node()}, [c](Node<T>& node) {
    if (T* g = grad_of(node, 0))
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += static_cast<T>(node.grad[i] * c);
  });
}

template <class T>
Var<T> mul_scalar(const Var<T>& x, const Var<T>& s) {
  if (s.size() != 1) fail(Errc::shape, "mul_scalar: factor must be 1x1");
  const T sv = s.item();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * sv;
  return make_op<T>("mul_scalar", x.shape(), std::move(out), {x.node(), s.node()},
                    [](Node<T>& node) {
                      const auto& xv = node.inputs[0]->value;
                      const T sv = node.inputs[1]->value[0];
                      if (T* g = grad_of(node, 0))
                        for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i] * sv;
                      if (T* g = grad_of(node, 1)) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < node.grad.size(); ++i) acc += double(node.grad[i]) * xv[i];
                        g[0] += static_cast<T>(acc);
                      }
                    });
}

template <class T>
Var<T> add_scalar(const Var<T>& x, const Var<T>& s) {
  if (s.size() != 1) fail(Errc::shape, "add_scalar: addend must be 1x1");
  const T sv = s.item();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] + sv;
  return make_op<T>("add_scalar", x.shape(), std::move(out), {x.node(), s.node()},
                    [](Node<T>& node) {
                      if (T* g = grad_of(node, 0))
                        for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
                      if (T* g = grad_of(node, 1)) {
                        double acc = 0.0;
                        for (T v : node.grad) acc += v;
                        g[0] += static_cast<T>(acc);
                      }
                    });
}

template <class T>
Var<T> exp(const Var<T>& x) {
  return unary<T>("exp", x, [](double v) { return std::exp(v); },
                  [](double, double y) { return y; });
}

template <class T>
Var<T> tanh(const Var<T>& x) {
  return unary<T>("tanh", x, [](double v) { return std::tanh(v); },
                  [](double, double y) { return 1.0 - y * y; });
}

namespace {
double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}
}  // namespace

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>("sigmoid", x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

template <class T>
Var<T> log_sigmoid(const Var<T>& x) {
  return unary<T>(
      "log_sigmoid", x,
      [](double v) { return std::min(v, 0.0) - std::log1p(std::exp(-std::abs(v))); },
      [](double v, double) { return stable_sigmoid(-v); });
}

template <class T>
Var<T> gelu(const Var<T>& x) {
  static constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  static constexpr double c = 0.044715;
  return unary<T>(
      "gelu", x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(k * (v + c * v * v * v))); },
      [](double v, double) {
        const double t = std::tanh(k * (v + c * v * v * v));
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * k * (1.0 + 3.0 * c * v * v);
      });
}

template <class T>
Var<T> clamp_max(const Var<T>& x, double hi) {
  return unary<T>(
      "clamp_max", x, [hi](double v) { return std::min(v, hi); },
      [hi](double v, double) { return v < hi ? 1.0 : 0.0; });
}

template <class T>
Var<T> softmax_rows(const Var<T>& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(x.size());
  const auto xv = x.value();
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = xv.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = static_cast<T>(std::exp(row[j] - mx) / z);
  }
  return make_op<T>("softmax_rows", x.shape(), std::move(out), {x.node()}, [m, n](Node<T>& node) {
    T* g = grad_of(node, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i) {
      const T* y = node.value.data() + i * n;
      const T* dy = node.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += double(dy[j]) * y[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += static_cast<T>(y[j] * (dy[j] - dot));
    }
  });
}

template <class T>
Var<T> log_softmax_rows(const Var<T>& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(x.size());
  const auto xv = x.value();
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = xv.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = static_cast<T>(row[j] - lse);
  }
  return make_op<T>("log_softmax_rows", x.shape(), std::move(out), {x.node()},
                    [m, n](Node<T>& node) {
                      T* g = grad_of(node, 0);
                      if (!g) return;
                      for (std::size_t i = 0; i < m; ++i) {
                        const T* y = node.value.data() + i * n;
                        const T* dy = node.grad.data() + i * n;
                        double total = 0.0;
                        for (std::size_t j = 0; j < n; ++j) total += dy[j];
                        for (std::size_t j = 0; j < n; ++j)
                          g[i * n + j] += static_cast<T>(dy[j] - std::exp(double(y[j])) * total);
                      }
                    });
}

template <class T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, double eps) {
  const std::size_t m = x.rows(), d = x.cols();
  if (gain.rows() != 1 || gain.cols() != d || !(bias.shape() == gain.shape())) {
    fail(Errc::shape, "layer_norm: gain and bias must be 1x{}", d);
  }
  std::vector<T> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(m);
  const auto xv = x.value();
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = xv.data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (row[j] - mu) * inv_std[i];
      out[i * d + j] = static_cast<T>(xhat[i * d + j] * gain.value()[j] + bias.value()[j]);
    }
  }
  return make_op<T>(
      "layer_norm", x.shape(), std::move(out), {x.node(), gain.node(), bias.node()},
      [m, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& node) {
        const auto& gv = node.inputs[1]->value;
        if (T* gg = grad_of(node, 1)) {
          for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) acc += node.grad[i * d + j] * xhat[i * d + j];
            gg[j] += static_cast<T>(acc);
          }
        }
        if (T* gb = grad_of(node, 2)) {
          for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) acc += node.grad[i * d + j];
            gb[j] += static_cast<T>(acc);
          }
        }
        if (T* gx = grad_of(node, 0)) {
          std::vector<double> dxhat(d);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              dxhat[j] = double(node.grad[i * d + j]) * gv[j];
              mean_d += dxhat[j];
              mean_dx += dxhat[j] * xhat[i * d + j];
            }
            mean_d /= static_cast<double>(d);
            mean_dx /= static_cast<double>(d);
            for (std::size_t j = 0; j < d; ++j) {
              gx[i * d + j] += static_cast<T>(
                  inv_std[i] * (dxhat[j] - mean_d - xhat[i * d + j] * mean_dx));
            }
          }
        }
      });
}

template <class T>
Var<T> l2_normalize_rows(const Var<T>& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(x.size());
  std::vector<double> norms(m);
  const auto xv = x.value();
  for (std::size_t i = 0; i < m; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) ss += double(xv[i * n + j]) * xv[i * n + j];
    if (ss == 0.0) fail(Errc::invalid_argument, "l2_normalize_rows: row {} has zero norm", i);
    norms[i] = std::sqrt(ss);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = static_cast<T>(xv[i * n + j] / norms[i]);
  }
  return make_op<T>("l2_normalize_rows", x.shape(), std::move(out), {x.node()},
                    [m, n, norms = std::move(norms)](Node<T>& node) {
                      T* g = grad_of(node, 0);
                      if (!g) return;
                      // Recompute y in double from the input so the f64 check is exact.
                      const auto& xin = node.inputs[0]->value;
                      for (std::size_t i = 0; i < m; ++i) {
                        double dot = 0.0;
                        for (std::size_t j = 0; j < n; ++j)
                          dot += double(node.grad[i * n + j]) * (xin[i * n + j] / norms[i]);
                        for (std::size_t j = 0; j < n; ++j) {
                          const double y = xin[i * n + j] / norms[i];
                          g[i * n + j] += static_cast<T>((node.grad[i * n + j] - y * dot) / norms[i]);
                        }
                      }
                    });
}

template <class T>
Var<T> cosine_sim_matrix(const Var<T>& p, const Var<T>& q) {
  if (p.cols() != q.cols()) {
    fail(Errc::shape, "cosine_sim_matrix: widths differ ({} vs {})", p.cols(), q.cols());
  }
  return matmul(l2_normalize_rows(p), transpose(l2_normalize_rows(q)));
}

template <class T>
Var<T> sum(const Var<T>& x) {
  double acc = 0.0;
  for (T v : x.value()) acc += v;
  return make_op<T>("sum", {1, 1}, {static_cast<T>(acc)}, {x.node()}, [](Node<T>& node) {
    if (T* g = grad_of(node, 0)) {
      const T d = node.grad[0];
      for (std::size_t i = 0; i < node.inputs[0]->value.size(); ++i) g[i] += d;
    }
  });
}

template <class T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

template <class T>
Var<T> sum_rows(const Var<T>& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += x.value()[i * n + j];
    out[i] = static_cast<T>(acc);
  }
  return make_op<T>("sum_rows", {m, 1}, std::move(out), {x.node()}, [m, n](Node<T>& node) {
    if (T* g = grad_of(node, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += node.grad[i];
  });
}

template <class T>
Var<T> slice_rows(const Var<T>& x, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > x.rows()) {
    fail(Errc::shape, "slice_rows: [{}, {}) outside {} rows", begin, begin + count, x.rows());
  }
  const std::size_t n = x.cols();
  std::vector<T> out(x.value().begin() + static_cast<std::ptrdiff_t>(begin * n),
                     x.value().begin() + static_cast<std::ptrdiff_t>((begin + count) * n));
  return make_op<T>("slice_rows", {count, n}, std::move(out), {x.node()},
                    [begin, n](Node<T>& node) {
                      if (T* g = grad_of(node, 0))
                        for (std::size_t i = 0; i < node.grad.size(); ++i) g[begin * n + i] += node.grad[i];
                    });
}

template <class T>
Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > x.cols()) {
    fail(Errc::shape, "slice_cols: [{}, {}) outside {} cols", begin, begin + count, x.cols());
  }
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = x.value()[i * n + begin + j];
  return make_op<T>("slice_cols", {m, count}, std::move(out), {x.node()},
                    [m, n, begin, count](Node<T>& node) {
                      if (T* g = grad_of(node, 0))
                        for (std::size_t i = 0; i < m; ++i)
                          for (std::size_t j = 0; j < count; ++j)
                            g[i * n + begin + j] += node.grad[i * count + j];
                    });
}

template <class T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) fail(Errc::shape, "concat_rows: no parts");
  const std::size_t n = parts[0].cols();
  std::size_t rows = 0;
  std::vector<std::shared_ptr<Node<T>>> inputs;
  for (const auto& p : parts) {
    if (p.cols() != n) fail(Errc::shape, "concat_rows: column counts differ ({} vs {})", p.cols(), n);
    rows += p.rows();
    inputs.push_back(p.node());
  }
  std::vector<T> out;
  out.reserve(rows * n);
  for (const auto& p : parts) out.insert(out.end(), p.value().begin(), p.value().end());
  return make_op<T>("concat_rows", {rows, n}, std::move(out), std::move(inputs), [](Node<T>& node) {
    std::size_t offset = 0;
    for (std::size_t s = 0; s < node.inputs.size(); ++s) {
      const std::size_t len = node.inputs[s]->value.size();
      if (T* g = grad_of(node, s))
        for (std::size_t i = 0; i < len; ++i) g[i] += node.grad[offset + i];
      offset += len;
    }
  });
}

template <class T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) fail(Errc::shape, "concat_cols: no parts");
  const std::size_t m = parts[0].rows();
  std::size_t cols = 0;
  std::vector<std::shared_ptr<Node<T>>> inputs;
  for (const auto& p : parts) {
    if (p.rows() != m) fail(Errc::shape, "concat_cols: row counts differ ({} vs {})", p.rows(), m);
    cols += p.cols();
    inputs.push_back(p.node());
  }
  std::vector<T> out(m * cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out[i * cols + offset + j] = p.value()[i * p.cols() + j];
    offset += p.cols();
  }
  return make_op<T>("concat_cols", {m, cols}, std::move(out), std::move(inputs),
                    [m, cols](Node<T>& node) {
                      std::size_t off = 0;
                      for (std::size_t s = 0; s < node.inputs.size(); ++s) {
                        const std::size_t w = node.inputs[s]->shape.cols;
                        if (T* g = grad_of(node, s))
                          for (std::size_t i = 0; i < m; ++i)
                            for (std::size_t j = 0; j < w; ++j) g[i * w + j] += node.grad[i * cols + off + j];
                        off += w;
                      }
                    });
}

template <class T>
Var<T> gather_rows(const Var<T>& table, std::span<const std::size_t> ids) {
  if (ids.empty()) fail(Errc::shape, "gather_rows: no ids");
  const std::size_t n = table.cols();
  std::vector<T> out(ids.size() * n);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= table.rows()) fail(Errc::shape, "gather_rows: id {} outside {} rows", ids[r], table.rows());
    std::copy_n(table.value().begin() + static_cast<std::ptrdiff_t>(ids[r] * n), n, out.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  return make_op<T>("gather_rows", {ids.size(), n}, std::move(out), {table.node()},
                    [n, idv = std::vector<std::size_t>(ids.begin(), ids.end())](Node<T>& node) {
                      if (T* g = grad_of(node, 0))
                        for (std::size_t r = 0; r < idv.size(); ++r)
                          for (std::size_t j = 0; j < n; ++j) g[idv[r] * n + j] += node.grad[r * n + j];
                    });
}

#define CELLCLIP_INSTANTIATE(T)                                                   \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                           \
  template Var<T> transpose(const Var<T>&);                                       \
  template Var<T> reshape(const Var<T>&, Shape);                                  \
  template Var<T> add(const Var<T>&, const Var<T>&);                              \
  template Var<T> sub(const Var<T>&, const Var<T>&);                              \
  template Var<T> mul(const Var<T>&, const Var<T>&);                              \
  template Var<T> add_row(const Var<T>&, const Var<T>&);                          \
  template Var<T> mul_col(const Var<T>&, const Var<T>&);                          \
  template Var<T> scale(const Var<T>&, double);                                   \
  template Var<T> mul_scalar(const Var<T>&, const Var<T>&);                       \
  template Var<T> add_scalar(const Var<T>&, const Var<T>&);                       \
  template Var<T> exp(const Var<T>&);                                             \
  template Var<T> tanh(const Var<T>&);                                            \
  template Var<T> sigmoid(const Var<T>&);                                         \
  template Var<T> log_sigmoid(const Var<T>&);                                     \
  template Var<T> gelu(const Var<T>&);                                            \
  template Var<T> clamp_max(const Var<T>&, double);                               \
  template Var<T> softmax_rows(const Var<T>&);                                    \
  template Var<T> log_softmax_rows(const Var<T>&);                                \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, double); \
  template Var<T> l2_normalize_rows(const Var<T>&);                               \
  template Var<T> cosine_sim_matrix(const Var<T>&, const Var<T>&);                \
  template Var<T> sum(const Var<T>&);                                             \
  template Var<T> mean(const Var<T>&);                                            \
  template Var<T> sum_rows(const Var<T>&);                                        \
  template Var<T> slice_rows(const Var<T>&, std::size_t, std::size_t);            \
  template Var<T> slice_cols(const Var<T>&, std::size_t, std::size_t);            \
  template Var<T> concat_rows(std::span<const Var<T>>);                           \
  template Var<T> concat_cols(std::span<const Var<T>>);                           \
  template Var<T> gather_rows(const Var<T>&, std::span<const std::size_t>);

CELLCLIP_INSTANTIATE(float)
CELLCLIP_INSTANTIATE(double)

#undef CELLCLIP_INSTANTIATE

}  // namespace cellclip::ad
