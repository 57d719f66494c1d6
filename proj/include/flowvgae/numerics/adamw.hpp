#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowvgae/numerics/tensor.hpp"

namespace flowvgae::numerics {

struct AdamWOptions {
  double lr = 1e-3;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// AdamW with decoupled weight decay. The decay p <- p - lr*wd*p is applied
/// before the bias-corrected Adam update.
class AdamW {
 public:
  struct Moments {
    std::vector<double> first;
    std::vector<double> second;
  };

  /// Parameters are referenced, not owned, and must outlive the optimizer.
  AdamW(std::vector<Tensor*> params, AdamWOptions options);

  /// Applies one update from the parameters' current gradient buffers.
  /// Throws NonFiniteGradient and leaves every parameter untouched if any
  /// gradient entry is NaN or infinite.
  void step();
  void zero_grad();

  std::int64_t step_count() const noexcept { return step_; }
  const AdamWOptions& options() const noexcept { return options_; }
  const std::vector<Moments>& moments() const noexcept { return moments_; }

  /// Restores moments and step counter (e.g. from a checkpoint).
  void restore(std::int64_t step, std::vector<Moments> moments);

 private:
  std::vector<Tensor*> params_;
  AdamWOptions options_;
  std::vector<Moments> moments_;
  std::int64_t step_ = 0;
};

}  // namespace flowvgae::numerics
