#include "flowvgae/numerics/kernels.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace flowvgae::numerics::kernels {

namespace {

Csr build_csr(std::size_t n_rows,
              const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
              bool key_is_dst) {
  Csr csr;
  csr.offsets.assign(n_rows + 1, 0);
  for (const auto& [s, t] : edges) ++csr.offsets[(key_is_dst ? t : s) + 1];
  for (std::size_t r = 0; r < n_rows; ++r) csr.offsets[r + 1] += csr.offsets[r];
  csr.indices.resize(edges.size());
  std::vector<std::size_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
  for (const auto& [s, t] : edges) {
    const auto key = key_is_dst ? t : s;
    csr.indices[cursor[key]++] = key_is_dst ? s : t;
  }
  return csr;
}

}  // namespace

Adjacency Adjacency::build(std::size_t n_src, std::size_t n_dst,
                           std::vector<std::pair<std::uint32_t, std::uint32_t>> edges) {
  for (const auto& [s, t] : edges) {
    if (s >= n_src || t >= n_dst) {
      throw std::out_of_range("adjacency edge (" + std::to_string(s) + ", " +
                              std::to_string(t) + ") outside " +
                              std::to_string(n_src) + "x" + std::to_string(n_dst));
    }
  }
  Adjacency adj;
  adj.n_src = n_src;
  adj.n_dst = n_dst;
  adj.by_dst = build_csr(n_dst, edges, true);
  adj.by_src = build_csr(n_src, edges, false);
  adj.inv_in_degree.assign(n_dst, 0.0);
  for (std::size_t t = 0; t < n_dst; ++t) {
    const auto deg = adj.by_dst.offsets[t + 1] - adj.by_dst.offsets[t];
    if (deg > 0) adj.inv_in_degree[t] = 1.0 / static_cast<double>(deg);
  }
  adj.edges = std::move(edges);
  return adj;
}

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> out, std::size_t m, std::size_t k, std::size_t n) {
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(m * n), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
}

void matmul_at_b_acc(std::span<const double> a, std::span<const double> g,
                     std::span<double> out, std::size_t m, std::size_t k,
                     std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    double* row = out.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      const double* grow = g.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * grow[j];
    }
  }
}

void matmul_a_bt_acc(std::span<const double> g, std::span<const double> b,
                     std::span<double> out, std::size_t m, std::size_t k,
                     std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b.data() + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      out[i * k + p] += acc;
    }
  }
}

void mean_aggregate(std::span<const double> x, const Adjacency& adj,
                    std::span<double> out, std::size_t d) {
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(adj.n_dst * d), 0.0);
  for (const auto& [s, t] : adj.edges) {
    for (std::size_t j = 0; j < d; ++j) out[t * d + j] += x[s * d + j];
  }
  for (std::size_t t = 0; t < adj.n_dst; ++t) {
    for (std::size_t j = 0; j < d; ++j) out[t * d + j] *= adj.inv_in_degree[t];
  }
}

void mean_aggregate_backward(std::span<const double> grad_out, const Adjacency& adj,
                             std::span<double> grad_x, std::size_t d) {
  for (const auto& [s, t] : adj.edges) {
    const double w = adj.inv_in_degree[t];
    for (std::size_t j = 0; j < d; ++j) grad_x[s * d + j] += grad_out[t * d + j] * w;
  }
}

}  // namespace serial

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> out, std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    std::fill(row, row + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
}

void matmul_at_b_acc(std::span<const double> a, std::span<const double> g,
                     std::span<double> out, std::size_t m, std::size_t k,
                     std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t p = 0; p < k; ++p) {
    double* row = out.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      const double* grow = g.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * grow[j];
    }
  }
}

void matmul_a_bt_acc(std::span<const double> g, std::span<const double> b,
                     std::span<double> out, std::size_t m, std::size_t k,
                     std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b.data() + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      out[i * k + p] += acc;
    }
  }
}

void mean_aggregate(std::span<const double> x, const Adjacency& adj,
                    std::span<double> out, std::size_t d) {
  const auto& csr = adj.by_dst;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t t = 0; t < adj.n_dst; ++t) {
    double* row = out.data() + t * d;
    std::fill(row, row + d, 0.0);
    for (std::size_t e = csr.offsets[t]; e < csr.offsets[t + 1]; ++e) {
      const double* xs = x.data() + std::size_t{csr.indices[e]} * d;
      for (std::size_t j = 0; j < d; ++j) row[j] += xs[j];
    }
    const double w = adj.inv_in_degree[t];
    for (std::size_t j = 0; j < d; ++j) row[j] *= w;
  }
}

void mean_aggregate_backward(std::span<const double> grad_out, const Adjacency& adj,
                             std::span<double> grad_x, std::size_t d) {
  const auto& csr = adj.by_src;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t s = 0; s < adj.n_src; ++s) {
    double* row = grad_x.data() + s * d;
    for (std::size_t e = csr.offsets[s]; e < csr.offsets[s + 1]; ++e) {
      const std::size_t t = csr.indices[e];
      const double w = adj.inv_in_degree[t];
      const double* go = grad_out.data() + t * d;
      for (std::size_t j = 0; j < d; ++j) row[j] += go[j] * w;
    }
  }
}

}  // namespace parallel

void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> out, std::size_t m, std::size_t k, std::size_t n) {
  if (m * k * n >= kParallelWorkThreshold) {
    parallel::matmul(a, b, out, m, k, n);
  } else {
    serial::matmul(a, b, out, m, k, n);
  }
}

void matmul_at_b_acc(std::span<const double> a, std::span<const double> g,
                     std::span<double> out, std::size_t m, std::size_t k,
                     std::size_t n) {
  if (m * k * n >= kParallelWorkThreshold) {
    parallel::matmul_at_b_acc(a, g, out, m, k, n);
  } else {
    serial::matmul_at_b_acc(a, g, out, m, k, n);
  }
}

void matmul_a_bt_acc(std::span<const double> g, std::span<const double> b,
                     std::span<double> out, std::size_t m, std::size_t k,
                     std::size_t n) {
  if (m * k * n >= kParallelWorkThreshold) {
    parallel::matmul_a_bt_acc(g, b, out, m, k, n);
  } else {
    serial::matmul_a_bt_acc(g, b, out, m, k, n);
  }
}

void mean_aggregate(std::span<const double> x, const Adjacency& adj,
                    std::span<double> out, std::size_t d) {
  if (adj.edges.size() * d >= kParallelWorkThreshold) {
    parallel::mean_aggregate(x, adj, out, d);
  } else {
    serial::mean_aggregate(x, adj, out, d);
  }
}

void mean_aggregate_backward(std::span<const double> grad_out, const Adjacency& adj,
                             std::span<double> grad_x, std::size_t d) {
  if (adj.edges.size() * d >= kParallelWorkThreshold) {
    parallel::mean_aggregate_backward(grad_out, adj, grad_x, d);
  } else {
    serial::mean_aggregate_backward(grad_out, adj, grad_x, d);
  }
}

}  // namespace flowvgae::numerics::kernels
