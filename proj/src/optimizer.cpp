#include "skillmatch/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace skillmatch {

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(s) + "'");
}

template <typename T>
Optimizer<T>::Optimizer(OptimizerConfig config, std::vector<Parameter<T>*> params)
    : config_(config), params_(std::move(params)) {
  if (!(config_.learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning rate must be > 0");
  if (config_.kind == OptimizerKind::adam) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
}

template <typename T>
void Optimizer<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

template <typename T>
void Optimizer<T>::step() {
  ++t_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::sgd) {
    for (auto* p : params_) {
      if (p->grad.shape() != p->value.shape()) continue;
      auto w = p->value.values();
      auto g = p->grad.values();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= static_cast<T>(lr * g[i]);
    }
    return;
  }
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto* p = params_[k];
    if (p->grad.shape() != p->value.shape()) continue;
    auto w = p->value.values();
    auto g = p->grad.values();
    auto m = m_[k].values();
    auto v = v_[k].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      w[i] -= static_cast<T>(lr * (mi / c1) / (std::sqrt(vi / c2) + config_.epsilon));
    }
  }
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace skillmatch
