#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "flowvgae/numerics/kernels.hpp"
#include "flowvgae/numerics/tensor.hpp"

namespace flowvgae::numerics {

/// Handle to a value recorded on a Tape. Only meaningful for the tape that
/// produced it, and only until that tape is cleared.
class Var {
 public:
  Var() = default;
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  explicit Var(std::size_t id) : id_(id) {}
  std::size_t id_ = static_cast<std::size_t>(-1);
};

enum class UnaryOp { kRelu, kSigmoid, kExp };
enum class BinaryOp { kAdd, kSub, kMul };

/// Records operations in execution order and replays their local
/// derivative rules in reverse on backward().
///
/// Leaves created with input() are bound to a caller-owned Tensor; if that
/// tensor requires grad, backward() accumulates into its gradient buffer.
/// The bound tensor must outlive the tape's current recording.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var input(Tensor& t);
  Var constant(Tensor t);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).needs_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() noexcept { nodes_.clear(); }

  /// Seeds d(root)/d(root) = 1, runs every recorded rule in reverse,
  /// accumulates into bound leaves, then clears the tape.
  void backward(Var root);

  Var matmul(Var a, Var b);
  Var unary(UnaryOp op, Var x);
  Var binary(BinaryOp op, Var a, Var b);
  Var relu(Var x) { return unary(UnaryOp::kRelu, x); }
  Var sigmoid(Var x) { return unary(UnaryOp::kSigmoid, x); }
  Var exp(Var x) { return unary(UnaryOp::kExp, x); }
  Var add(Var a, Var b) { return binary(BinaryOp::kAdd, a, b); }
  Var sub(Var a, Var b) { return binary(BinaryOp::kSub, a, b); }
  Var mul(Var a, Var b) { return binary(BinaryOp::kMul, a, b); }
  Var scale(Var x, double factor);
  Var clamp(Var x, double lo, double hi);

  Var sum(Var x);
  Var mean(Var x);
  /// [rows x cols] -> [rows x 1]
  Var row_sum(Var x);

  /// out[i] = x[index[i]] row-wise.
  Var gather_rows(Var x, std::vector<std::uint32_t> index);
  /// Mean over in-edges of each target row; targets with no in-edges get zeros.
  Var mean_aggregate(Var x, std::shared_ptr<const kernels::Adjacency> adj);
  /// Copy of base with the listed rows overwritten by token ([1 x d] or [d]).
  Var replace_rows(Var base, std::vector<std::uint32_t> rows, Var token);

  /// Elementwise stable binary cross-entropy on logits; targets must be 0 or 1.
  Var bce_with_logits_elementwise(Var logits, const Tensor& targets);
  Var bce_with_logits(Var logits, const Tensor& targets);
  Var mse(Var x, Var xhat);
  /// Per-row mean squared error, [rows x 1].
  Var mse_rows(Var x, Var xhat);
  /// Per-row 1 - cos(x_i, xhat_i), [rows x 1]; rows with zero norm use cos = 0.
  Var cosine_rows(Var x, Var xhat);
  Var cosine_embedding_loss(Var x, Var xhat);

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    bool needs_grad = false;
    Tensor* bound = nullptr;
    std::function<void(Tape&, std::size_t)> backward;
  };

  Var push(Tensor value, bool needs_grad,
           std::function<void(Tape&, std::size_t)> backward);
  std::span<double> grad_of(std::size_t id);
  std::span<const double> out_grad(std::size_t id) const { return nodes_[id].grad; }
  Node& node(Var v) { return nodes_.at(v.id()); }

  std::vector<Node> nodes_;
};

}  // namespace flowvgae::numerics
