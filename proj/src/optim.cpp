#include "fssc/optim.hpp"

#include <cmath>

namespace fssc {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

template <typename Scalar>
void Optimizer<Scalar>::step(ModelParams<Scalar>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw TrainingError("optimizer step: parameter '" + params.name(i) + "' has no gradient");
    }
  }
  const auto lr = static_cast<Scalar>(config_.learning_rate);
  ++steps_;
  if (config_.kind == OptimizerKind::Sgd) {
    for (auto& [name, p] : params) p.value() -= lr * p.grad();
  } else {
    if (m_.empty()) {
      for (const auto& [name, p] : params) {
        m_.push_back(Vec<Scalar>::Zero(p.numel()));
        v_.push_back(Vec<Scalar>::Zero(p.numel()));
      }
    } else if (m_.size() != params.size()) {
      throw TrainingError("optimizer step: parameter collection changed between steps");
    }
    const auto b1 = static_cast<Scalar>(config_.beta1);
    const auto b2 = static_cast<Scalar>(config_.beta2);
    const auto eps = static_cast<Scalar>(config_.eps);
    const auto c1 = static_cast<Scalar>(1.0 - std::pow(config_.beta1, static_cast<double>(steps_)));
    const auto c2 = static_cast<Scalar>(1.0 - std::pow(config_.beta2, static_cast<double>(steps_)));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      if (m_[i].size() != p.numel()) {
        throw TrainingError("optimizer step: moment shape changed for '" + params.name(i) + "'");
      }
      const auto& g = p.grad();
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g.cwiseAbs2();
      p.value().array() -=
          lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
    }
  }
  params.clear_grads();
}

template <typename Scalar>
void Optimizer<Scalar>::reset() {
  steps_ = 0;
  m_.clear();
  v_.clear();
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace fssc
