#pragma once

#include <cmath>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dpn/random.hpp"
#include "dpn/tensor.hpp"

namespace dpn {

enum class Init { kZeros, kGlorot };

// Named, shaped trainable tensors in fixed creation order. The order defines
// the checkpoint manifest, so model construction must be deterministic.
template <class Scalar>
class ParameterSet {
 public:
  Tensor<Scalar> add(const std::string& name, Shape shape, Init init, std::mt19937& rng) {
    if (index_.count(name))
      throw ValidationError("parameter '" + name + "' already exists");
    Tensor<Scalar> t = Tensor<Scalar>::zeros(std::move(shape), /*requires_grad=*/true);
    if (init == Init::kGlorot) {
      const auto [fan_in, fan_out] = fans(t.shape());
      const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
      for (Index i = 0; i < t.numel(); ++i)
        t.value()[i] = Scalar(uniform(rng, -limit, limit));
    }
    index_[name] = items_.size();
    items_.emplace_back(name, t);
    return t;
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Tensor<Scalar> get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("unknown parameter '" + name + "'");
    return items_[it->second].second;
  }

  const std::vector<std::pair<std::string, Tensor<Scalar>>>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  Index total_values() const {
    Index n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
  }

  void zero_grads() {
    for (auto& [name, t] : items_) {
      if (t.has_grad())
        t.grad().setZero();
      else
        t.grad() = VecX<Scalar>::Zero(t.numel());
    }
  }

  // Global L2 norm over all grads (grad clipping).
  double grad_norm() const {
    double sq = 0;
    for (const auto& [name, t] : items_)
      if (t.has_grad()) sq += double(t.grad().template cast<double>().square().sum());
    return std::sqrt(sq);
  }

  void scale_grads(Scalar factor) {
    for (auto& [name, t] : items_)
      if (t.has_grad()) t.grad() *= factor;
  }

 private:
  static std::pair<Index, Index> fans(const Shape& s) {
    if (s.size() == 1) return {s[0], s[0]};
    if (s.size() == 2) return {s[0], s[1]};  // [in x out]
    if (s.size() == 3) return {s[0] * s[1], s[2]};  // conv [w x d_in x f]
    throw ShapeError("glorot init: unsupported rank " + shape_str(s));
  }

  std::vector<std::pair<std::string, Tensor<Scalar>>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace dpn
