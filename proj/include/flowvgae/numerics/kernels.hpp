#pragma once

// Dense and sparse inner loops used by the tape.
//
// Every kernel exists twice: a plain serial reference and an OpenMP version.
// Both accumulate each output element in the same order, so their results
// are bit-identical and the dispatching front-end may pick either one.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace flowvgae::numerics::kernels {

/// Compressed rows: targets of row r are indices[offsets[r] .. offsets[r+1]).
struct Csr {
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> indices;
};

/// Directed bipartite edge set from n_src source rows to n_dst target rows,
/// indexed both ways. Edge order inside every CSR row follows the input
/// edge order.
struct Adjacency {
  std::size_t n_src = 0;
  std::size_t n_dst = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // (src, dst)
  Csr by_dst;  // row = dst, indices = src
  Csr by_src;  // row = src, indices = dst
  std::vector<double> inv_in_degree;  // 1/deg(dst), 0 for isolated dst

  static Adjacency build(std::size_t n_src, std::size_t n_dst,
                         std::vector<std::pair<std::uint32_t, std::uint32_t>> edges);
};

namespace serial {

// out[m x n] = a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> out, std::size_t m, std::size_t k, std::size_t n);
// out[k x n] += a[m x k]^T * g[m x n]
void matmul_at_b_acc(std::span<const double> a, std::span<const double> g,
                     std::span<double> out, std::size_t m, std::size_t k,
                     std::size_t n);
// out[m x k] += g[m x n] * b[k x n]^T
void matmul_a_bt_acc(std::span<const double> g, std::span<const double> b,
                     std::span<double> out, std::size_t m, std::size_t k,
                     std::size_t n);
// out[n_dst x d] = mean of x rows over in-edges; zero rows for isolated targets
void mean_aggregate(std::span<const double> x, const Adjacency& adj,
                    std::span<double> out, std::size_t d);
// grad_x[n_src x d] += scatter of grad_out / in-degree
void mean_aggregate_backward(std::span<const double> grad_out, const Adjacency& adj,
                             std::span<double> grad_x, std::size_t d);

}  // namespace serial

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> out, std::size_t m, std::size_t k, std::size_t n);
void matmul_at_b_acc(std::span<const double> a, std::span<const double> g,
                     std::span<double> out, std::size_t m, std::size_t k,
                     std::size_t n);
void matmul_a_bt_acc(std::span<const double> g, std::span<const double> b,
                     std::span<double> out, std::size_t m, std::size_t k,
                     std::size_t n);
void mean_aggregate(std::span<const double> x, const Adjacency& adj,
                    std::span<double> out, std::size_t d);
void mean_aggregate_backward(std::span<const double> grad_out, const Adjacency& adj,
                             std::span<double> grad_x, std::size_t d);

}  // namespace parallel

// Front-end used by the tape: parallel above a work threshold, serial below.
void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> out, std::size_t m, std::size_t k, std::size_t n);
void matmul_at_b_acc(std::span<const double> a, std::span<const double> g,
                     std::span<double> out, std::size_t m, std::size_t k,
                     std::size_t n);
void matmul_a_bt_acc(std::span<const double> g, std::span<const double> b,
                     std::span<double> out, std::size_t m, std::size_t k,
                     std::size_t n);
void mean_aggregate(std::span<const double> x, const Adjacency& adj,
                    std::span<double> out, std::size_t d);
void mean_aggregate_backward(std::span<const double> grad_out, const Adjacency& adj,
                             std::span<double> grad_x, std::size_t d);

/// Work (multiply-adds) below which the front-end stays serial.
inline constexpr std::size_t kParallelWorkThreshold = 1u << 16;

}  // namespace flowvgae::numerics::kernels
