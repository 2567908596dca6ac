#include "refacer/adam.hpp"

#include <cmath>

#include "refacer/error.hpp"

namespace refacer::ad {

template <typename T>
Adam<T>::Adam(std::vector<Parameter<T>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.lr >= 0.0) || !(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0) || !(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0) ||
      !(cfg_.epsilon > 0.0))
    throw Error(ErrorKind::InvalidArgument, "invalid Adam hyperparameters");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto* p : params_) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  if (lr < 0.0) lr = cfg_.lr;
  ++step_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(cfg_.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t p = 0; p < params_.size(); ++p) {
    auto& value = params_[p]->value.data;
    const auto& grad = params_[p]->grad.data;
    if (grad.size() != value.size())
      throw Error(ErrorKind::ShapeMismatch, "gradient of '" + params_[p]->name + "' does not match its value");
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] = static_cast<T>(static_cast<double>(value[i]) - lr * m_hat / (std::sqrt(v_hat) + cfg_.epsilon));
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace refacer::ad
