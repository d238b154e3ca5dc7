#pragma once

#include <cmath>
#include <vector>

#include "dpn/params.hpp"

namespace dpn {

// Standard Adam with bias correction. Steps the whole parameter set at once
// and zeroes grads afterwards; a non-finite gradient aborts the step naming
// the offending parameter.
template <class Scalar>
class Adam {
 public:
  Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParameterSet<Scalar>& params) {
    if (m_.empty()) {
      for (const auto& [name, t] : params.items()) {
        m_.push_back(VecX<Scalar>::Zero(t.numel()));
        v_.push_back(VecX<Scalar>::Zero(t.numel()));
      }
    }
    for (const auto& [name, t] : params.items())
      if (t.has_grad() && !t.grad().isFinite().all())
        throw NumericError("adam: non-finite gradient in parameter '" + name + "'");
    ++t_;
    const Scalar bc1 = Scalar(1.0 - std::pow(beta1_, t_));
    const Scalar bc2 = Scalar(1.0 - std::pow(beta2_, t_));
    std::size_t i = 0;
    for (auto& [name, t] : params.items()) {
      Tensor<Scalar> p = t;
      if (!p.has_grad()) p.grad() = VecX<Scalar>::Zero(p.numel());
      const auto& g = p.grad();
      m_[i] = Scalar(beta1_) * m_[i] + Scalar(1 - beta1_) * g;
      v_[i] = Scalar(beta2_) * v_[i] + Scalar(1 - beta2_) * g.square();
      p.value() -= Scalar(lr_) * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + Scalar(eps_));
      ++i;
    }
    params.zero_grads();
  }

  // Serialized moment state for exact training resume.
  long step_count() const { return t_; }
  const std::vector<VecX<Scalar>>& first_moments() const { return m_; }
  const std::vector<VecX<Scalar>>& second_moments() const { return v_; }
  void restore(long step_count, std::vector<VecX<Scalar>> m, std::vector<VecX<Scalar>> v) {
    t_ = step_count;
    m_ = std::move(m);
    v_ = std::move(v);
  }

  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<VecX<Scalar>> m_, v_;
};

}  // namespace dpn
