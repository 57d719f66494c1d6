#include "flowvgae/numerics/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace flowvgae::numerics {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_str(t.shape()));
  }
}

double stable_bce(double logit, double target) {
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::push(Tensor value, bool needs_grad,
               std::function<void(Tape&, std::size_t)> backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(nodes_.size() - 1);
}

std::span<double> Tape::grad_of(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.numel(), 0.0);
  return n.grad;
}

Var Tape::input(Tensor& t) {
  Node n;
  n.value = Tensor(t.shape(), t.storage());
  n.needs_grad = t.requires_grad();
  n.bound = t.requires_grad() ? &t : nullptr;
  nodes_.push_back(std::move(n));
  return Var(nodes_.size() - 1);
}

Var Tape::constant(Tensor t) {
  Node n;
  n.value = Tensor(t.shape(), std::move(t.storage()));
  nodes_.push_back(std::move(n));
  return Var(nodes_.size() - 1);
}

void Tape::backward(Var root) {
  const std::size_t r = root.id();
  if (r >= nodes_.size()) throw std::out_of_range("backward: root not on this tape");
  if (!nodes_[r].value.is_scalar()) {
    throw DimensionError("backward: root must be scalar, got shape " +
                         shape_str(nodes_[r].value.shape()));
  }
  if (nodes_[r].needs_grad) {
    grad_of(r)[0] = 1.0;
    for (std::size_t i = r + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.grad.empty()) continue;
      if (n.backward) n.backward(*this, i);
      if (n.bound != nullptr) {
        auto g = n.bound->grad();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
      }
    }
  }
  clear();
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(av.shape()) +
                         " x " + shape_str(bv.shape()));
  }
  Tensor out(Shape{m, n});
  kernels::matmul(av.values(), bv.values(), out.values(), m, k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return push(std::move(out), requires_grad(a) || requires_grad(b),
              [ia, ib, m, k, n](Tape& t, std::size_t self) {
                auto g = t.out_grad(self);
                if (t.nodes_[ia].needs_grad) {
                  kernels::matmul_a_bt_acc(g, t.nodes_[ib].value.values(), t.grad_of(ia),
                                           m, k, n);
                }
                if (t.nodes_[ib].needs_grad) {
                  kernels::matmul_at_b_acc(t.nodes_[ia].value.values(), g, t.grad_of(ib),
                                           m, k, n);
                }
              });
}

Var Tape::unary(UnaryOp op, Var x) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  auto in = xv.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    switch (op) {
      case UnaryOp::kRelu: o[i] = in[i] > 0.0 ? in[i] : 0.0; break;
      case UnaryOp::kSigmoid: o[i] = stable_sigmoid(in[i]); break;
      case UnaryOp::kExp: o[i] = std::exp(in[i]); break;
    }
  }
  const std::size_t ix = x.id();
  return push(std::move(out), requires_grad(x), [ix, op](Tape& t, std::size_t self) {
    auto g = t.out_grad(self);
    auto y = t.nodes_[self].value.values();
    auto in = t.nodes_[ix].value.values();
    auto gx = t.grad_of(ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      switch (op) {
        case UnaryOp::kRelu: gx[i] += in[i] > 0.0 ? g[i] : 0.0; break;
        case UnaryOp::kSigmoid: gx[i] += g[i] * y[i] * (1.0 - y[i]); break;
        case UnaryOp::kExp: gx[i] += g[i] * y[i]; break;
      }
    }
  });
}

Var Tape::binary(BinaryOp op, Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  const bool same = av.shape() == bv.shape();
  const bool b_scalar = !same && bv.is_scalar();
  const bool a_scalar = !same && !b_scalar && av.is_scalar();
  if (!same && !a_scalar && !b_scalar) {
    throw DimensionError("elementwise: incompatible shapes " + shape_str(av.shape()) +
                         " and " + shape_str(bv.shape()));
  }
  Tensor out(a_scalar ? bv.shape() : av.shape());
  const std::size_t n = out.numel();
  auto A = av.values();
  auto B = bv.values();
  auto o = out.values();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = A[a_scalar ? 0 : i];
    const double y = B[b_scalar ? 0 : i];
    switch (op) {
      case BinaryOp::kAdd: o[i] = x + y; break;
      case BinaryOp::kSub: o[i] = x - y; break;
      case BinaryOp::kMul: o[i] = x * y; break;
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return push(std::move(out), requires_grad(a) || requires_grad(b),
              [ia, ib, op, a_scalar, b_scalar](Tape& t, std::size_t self) {
                auto g = t.out_grad(self);
                const bool need_a = t.nodes_[ia].needs_grad;
                const bool need_b = t.nodes_[ib].needs_grad;
                auto A = t.nodes_[ia].value.values();
                auto B = t.nodes_[ib].value.values();
                std::span<double> ga = need_a ? t.grad_of(ia) : std::span<double>{};
                std::span<double> gb = need_b ? t.grad_of(ib) : std::span<double>{};
                for (std::size_t i = 0; i < g.size(); ++i) {
                  const std::size_t ai = a_scalar ? 0 : i;
                  const std::size_t bi = b_scalar ? 0 : i;
                  double da = 0.0, db = 0.0;
                  switch (op) {
                    case BinaryOp::kAdd: da = g[i]; db = g[i]; break;
                    case BinaryOp::kSub: da = g[i]; db = -g[i]; break;
                    case BinaryOp::kMul: da = g[i] * B[bi]; db = g[i] * A[ai]; break;
                  }
                  if (need_a) ga[ai] += da;
                  if (need_b) gb[bi] += db;
                }
              });
}

Var Tape::scale(Var x, double factor) {
  return mul(x, constant(Tensor::scalar(factor)));
}

Var Tape::clamp(Var x, double lo, double hi) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  auto in = xv.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(in[i], lo, hi);
  const std::size_t ix = x.id();
  return push(std::move(out), requires_grad(x), [ix, lo, hi](Tape& t, std::size_t self) {
    auto g = t.out_grad(self);
    auto in = t.nodes_[ix].value.values();
    auto gx = t.grad_of(ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (in[i] >= lo && in[i] <= hi) gx[i] += g[i];
    }
  });
}

Var Tape::sum(Var x) {
  const Tensor& xv = value(x);
  double s = 0.0;
  for (double v : xv.values()) s += v;
  const std::size_t ix = x.id();
  return push(Tensor::scalar(s), requires_grad(x), [ix](Tape& t, std::size_t self) {
    const double g = t.out_grad(self)[0];
    for (double& v : t.grad_of(ix)) v += g;
  });
}

Var Tape::mean(Var x) {
  const std::size_t n = value(x).numel();
  if (n == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var Tape::row_sum(Var x) {
  const Tensor& xv = value(x);
  require_matrix(xv, "row_sum");
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor out(Shape{rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += xv.at(r, c);
    out[r] = s;
  }
  const std::size_t ix = x.id();
  return push(std::move(out), requires_grad(x), [ix, rows, cols](Tape& t, std::size_t self) {
    auto g = t.out_grad(self);
    auto gx = t.grad_of(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r];
    }
  });
}

Var Tape::gather_rows(Var x, std::vector<std::uint32_t> index) {
  const Tensor& xv = value(x);
  require_matrix(xv, "gather_rows");
  const std::size_t cols = xv.cols();
  Tensor out(Shape{index.size(), cols});
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= xv.rows()) {
      throw std::out_of_range("gather_rows: row " + std::to_string(index[i]) +
                              " outside " + shape_str(xv.shape()));
    }
    std::copy_n(xv.values().begin() + static_cast<std::ptrdiff_t>(index[i] * cols), cols,
                out.values().begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
  const std::size_t ix = x.id();
  return push(std::move(out), requires_grad(x),
              [ix, cols, index = std::move(index)](Tape& t, std::size_t self) {
                auto g = t.out_grad(self);
                auto gx = t.grad_of(ix);
                for (std::size_t i = 0; i < index.size(); ++i) {
                  for (std::size_t c = 0; c < cols; ++c) {
                    gx[index[i] * cols + c] += g[i * cols + c];
                  }
                }
              });
}

Var Tape::mean_aggregate(Var x, std::shared_ptr<const kernels::Adjacency> adj) {
  const Tensor& xv = value(x);
  require_matrix(xv, "mean_aggregate");
  if (xv.rows() != adj->n_src) {
    throw DimensionError("mean_aggregate: " + std::to_string(xv.rows()) +
                         " source rows, adjacency expects " + std::to_string(adj->n_src));
  }
  const std::size_t d = xv.cols();
  Tensor out(Shape{adj->n_dst, d});
  kernels::mean_aggregate(xv.values(), *adj, out.values(), d);
  const std::size_t ix = x.id();
  return push(std::move(out), requires_grad(x),
              [ix, d, adj = std::move(adj)](Tape& t, std::size_t self) {
                kernels::mean_aggregate_backward(t.out_grad(self), *adj, t.grad_of(ix), d);
              });
}

Var Tape::replace_rows(Var base, std::vector<std::uint32_t> rows, Var token) {
  const Tensor& bv = value(base);
  const Tensor& tv = value(token);
  require_matrix(bv, "replace_rows");
  const std::size_t cols = bv.cols();
  if (tv.numel() != cols) {
    throw DimensionError("replace_rows: token " + shape_str(tv.shape()) +
                         " does not match row width of " + shape_str(bv.shape()));
  }
  Tensor out(bv.shape(), bv.storage());
  for (auto r : rows) {
    if (r >= bv.rows()) throw std::out_of_range("replace_rows: row out of range");
    std::copy(tv.values().begin(), tv.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  const std::size_t ib = base.id(), it = token.id();
  const std::size_t n_rows = bv.rows();
  return push(std::move(out), requires_grad(base) || requires_grad(token),
              [ib, it, cols, n_rows, rows = std::move(rows)](Tape& t, std::size_t self) {
                auto g = t.out_grad(self);
                std::vector<char> replaced(n_rows, 0);
                for (auto r : rows) replaced[r] = 1;
                if (t.nodes_[ib].needs_grad) {
                  auto gb = t.grad_of(ib);
                  for (std::size_t r = 0; r < n_rows; ++r) {
                    if (replaced[r]) continue;
                    for (std::size_t c = 0; c < cols; ++c) gb[r * cols + c] += g[r * cols + c];
                  }
                }
                if (t.nodes_[it].needs_grad) {
                  auto gt = t.grad_of(it);
                  for (std::size_t r = 0; r < n_rows; ++r) {
                    if (!replaced[r]) continue;
                    for (std::size_t c = 0; c < cols; ++c) gt[c] += g[r * cols + c];
                  }
                }
              });
}

Var Tape::bce_with_logits_elementwise(Var logits, const Tensor& targets) {
  const Tensor& lv = value(logits);
  require_same_shape(lv, targets, "bce_with_logits");
  for (double y : targets.values()) {
    if (y != 0.0 && y != 1.0) {
      throw std::invalid_argument("bce_with_logits: target " + std::to_string(y) +
                                  " is not 0 or 1");
    }
  }
  Tensor out(lv.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = stable_bce(lv[i], targets[i]);
  const std::size_t il = logits.id();
  return push(std::move(out), requires_grad(logits),
              [il, targets](Tape& t, std::size_t self) {
                auto g = t.out_grad(self);
                auto l = t.nodes_[il].value.values();
                auto gl = t.grad_of(il);
                for (std::size_t i = 0; i < g.size(); ++i) {
                  gl[i] += g[i] * (stable_sigmoid(l[i]) - targets[i]);
                }
              });
}

Var Tape::bce_with_logits(Var logits, const Tensor& targets) {
  return mean(bce_with_logits_elementwise(logits, targets));
}

Var Tape::mse(Var x, Var xhat) {
  require_same_shape(value(x), value(xhat), "mse");
  Var d = sub(x, xhat);
  return mean(mul(d, d));
}

Var Tape::mse_rows(Var x, Var xhat) {
  require_same_shape(value(x), value(xhat), "mse_rows");
  require_matrix(value(x), "mse_rows");
  const double inv_cols = 1.0 / static_cast<double>(value(x).cols());
  Var d = sub(x, xhat);
  return scale(row_sum(mul(d, d)), inv_cols);
}

Var Tape::cosine_rows(Var x, Var xhat) {
  const Tensor& xv = value(x);
  const Tensor& yv = value(xhat);
  require_same_shape(xv, yv, "cosine_embedding_loss");
  require_matrix(xv, "cosine_embedding_loss");
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor out(Shape{rows, 1});
  // per row: dot, |x|, |y|
  std::vector<double> stats(rows * 3);
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double a = xv.at(r, c), b = yv.at(r, c);
      dot += a * b;
      nx += a * a;
      ny += b * b;
    }
    nx = std::sqrt(nx);
    ny = std::sqrt(ny);
    stats[3 * r] = dot;
    stats[3 * r + 1] = nx;
    stats[3 * r + 2] = ny;
    const double cos = (nx > 0.0 && ny > 0.0) ? dot / (nx * ny) : 0.0;
    out[r] = 1.0 - cos;
  }
  const std::size_t ix = x.id(), iy = xhat.id();
  return push(std::move(out), requires_grad(x) || requires_grad(xhat),
              [ix, iy, rows, cols, stats = std::move(stats)](Tape& t, std::size_t self) {
                auto g = t.out_grad(self);
                const bool need_x = t.nodes_[ix].needs_grad;
                const bool need_y = t.nodes_[iy].needs_grad;
                const Tensor& xv = t.nodes_[ix].value;
                const Tensor& yv = t.nodes_[iy].value;
                std::span<double> gx = need_x ? t.grad_of(ix) : std::span<double>{};
                std::span<double> gy = need_y ? t.grad_of(iy) : std::span<double>{};
                for (std::size_t r = 0; r < rows; ++r) {
                  const double dot = stats[3 * r], nx = stats[3 * r + 1], ny = stats[3 * r + 2];
                  if (nx == 0.0 || ny == 0.0) continue;
                  const double inv = 1.0 / (nx * ny);
                  const double cos = dot * inv;
                  for (std::size_t c = 0; c < cols; ++c) {
                    const double a = xv.at(r, c), b = yv.at(r, c);
                    // d(1 - cos)/da = -(b/(|a||b|) - cos * a/|a|^2)
                    if (need_x) gx[r * cols + c] -= g[r] * (b * inv - cos * a / (nx * nx));
                    if (need_y) gy[r * cols + c] -= g[r] * (a * inv - cos * b / (ny * ny));
                  }
                }
              });
}

Var Tape::cosine_embedding_loss(Var x, Var xhat) { return mean(cosine_rows(x, xhat)); }

}  // namespace flowvgae::numerics
