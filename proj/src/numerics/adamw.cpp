#include "flowvgae/numerics/adamw.hpp"

#include <cmath>

namespace flowvgae::numerics {

AdamW::AdamW(std::vector<Tensor*> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.lr > 0.0)) throw std::invalid_argument("AdamW: lr must be > 0");
  moments_.reserve(params_.size());
  for (Tensor* p : params_) {
    if (!p->requires_grad()) p->set_requires_grad(true);
    moments_.push_back({std::vector<double>(p->numel(), 0.0),
                        std::vector<double>(p->numel(), 0.0)});
  }
}

void AdamW::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (double g : params_[i]->grad()) {
      if (!std::isfinite(g)) {
        throw NonFiniteGradient("AdamW: non-finite gradient in parameter " +
                                std::to_string(i) + " of shape " +
                                shape_str(params_[i]->shape()) + "; step rejected");
      }
    }
  }
  ++step_;
  const auto& o = options_;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(step_));
  const double decay = 1.0 - o.lr * o.weight_decay;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto p = params_[i]->values();
    auto g = params_[i]->grad();
    auto& m = moments_[i].first;
    auto& v = moments_[i].second;
    for (std::size_t k = 0; k < p.size(); ++k) {
      p[k] *= decay;
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= o.lr * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

void AdamW::zero_grad() {
  for (Tensor* p : params_) p->zero_grad();
}

void AdamW::restore(std::int64_t step, std::vector<Moments> moments) {
  if (step < 0 || moments.size() != params_.size()) {
    throw std::invalid_argument("AdamW::restore: state does not match parameters");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (moments[i].first.size() != params_[i]->numel() ||
        moments[i].second.size() != params_[i]->numel()) {
      throw std::invalid_argument("AdamW::restore: moment buffer shape mismatch");
    }
  }
  step_ = step;
  moments_ = std::move(moments);
}

}  // namespace flowvgae::numerics
