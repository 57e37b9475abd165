#pragma once

#include <string>
#include <vector>

#include "fssc/params.hpp"

namespace fssc {

enum class OptimizerKind { Sgd, Adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// SGD (w -= lr * grad) or bias-corrected Adam. Moments are bound to
/// parameter positions in the collection passed to the first step().
template <typename Scalar>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {}) : config_(config) {}

  /// Applies one update and clears every gradient. Throws TrainingError if a
  /// parameter has no gradient.
  void step(ModelParams<Scalar>& params);

  /// Forgets moments and the step counter.
  void reset();

  const OptimizerConfig& config() const { return config_; }
  long steps() const { return steps_; }
  const std::vector<Vec<Scalar>>& first_moments() const { return m_; }
  const std::vector<Vec<Scalar>>& second_moments() const { return v_; }

 private:
  OptimizerConfig config_;
  long steps_ = 0;
  std::vector<Vec<Scalar>> m_;
  std::vector<Vec<Scalar>> v_;
};

}  // namespace fssc
