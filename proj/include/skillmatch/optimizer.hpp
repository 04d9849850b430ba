#pragma once

#include <string_view>
#include <vector>

#include "skillmatch/autograd.hpp"

namespace skillmatch {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Applies parameter.grad to parameter.value. Moment buffers are keyed by the
// position in the parameter list, which must stay the same between steps.
template <typename T>
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<Parameter<T>*> params);

  void step();
  void zero_grad();
  std::size_t steps() const { return t_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  std::vector<Parameter<T>*> params_;
  std::vector<Tensor<T>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace skillmatch
