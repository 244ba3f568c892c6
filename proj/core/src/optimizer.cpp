#include "segmicro/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace segmicro {

std::string optimizer_kind_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::SgdNesterov: return "sgd_nesterov";
    case OptimizerKind::RmsProp: return "rmsprop";
    case OptimizerKind::Adagrad: return "adagrad";
    case OptimizerKind::Adadelta: return "adadelta";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::Adamax: return "adamax";
    case OptimizerKind::Nadam: return "nadam";
  }
  throw ConfigError("unknown optimizer kind");
}

OptimizerKind optimizer_kind_from_name(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "sgd_nesterov") return OptimizerKind::SgdNesterov;
  if (name == "rmsprop") return OptimizerKind::RmsProp;
  if (name == "adagrad") return OptimizerKind::Adagrad;
  if (name == "adadelta") return OptimizerKind::Adadelta;
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "adamax") return OptimizerKind::Adamax;
  if (name == "nadam") return OptimizerKind::Nadam;
  throw ConfigError("unknown optimizer '" + name + "'");
}

OptimizerHyperparams OptimizerHyperparams::defaults(OptimizerKind kind) {
  OptimizerHyperparams hp;
  hp.kind = kind;
  switch (kind) {
    case OptimizerKind::Adam:
      hp.lr = 0.001;
      break;
    case OptimizerKind::Sgd:
      hp.lr = 0.01;
      break;
    case OptimizerKind::SgdNesterov:
      hp.lr = 0.01;
      hp.momentum = 0.9;
      break;
    case OptimizerKind::RmsProp:
      hp.lr = 0.001;
      hp.rho = 0.9;
      hp.epsilon = 1e-7;
      break;
    case OptimizerKind::Adagrad:
      hp.lr = 0.01;
      hp.epsilon = 1e-7;
      break;
    case OptimizerKind::Adadelta:
      hp.lr = 1.0;
      hp.rho = 0.95;
      hp.epsilon = 1e-7;
      break;
    case OptimizerKind::Adamax:
      hp.lr = 0.002;
      break;
    case OptimizerKind::Nadam:
      hp.lr = 0.002;
      break;
  }
  return hp;
}

void OptimizerHyperparams::validate() const {
  if (!(lr > 0.0)) {
    throw ConfigError("optimizer.lr must be > 0, got " + std::to_string(lr));
  }
  auto unit = [](double v, const char* field) {
    if (!(v >= 0.0 && v < 1.0)) {
      throw ConfigError(std::string("optimizer.") + field +
                        " must lie in [0, 1), got " + std::to_string(v));
    }
  };
  unit(rho, "rho");
  unit(beta1, "beta1");
  unit(beta2, "beta2");
  unit(momentum, "momentum");
  if (!(epsilon > 0.0)) {
    throw ConfigError("optimizer.epsilon must be > 0, got " +
                      std::to_string(epsilon));
  }
}

template <typename T>
Optimizer<T>::Optimizer(OptimizerKind kind, const OptimizerOverrides& ov)
    : hp_(OptimizerHyperparams::defaults(kind)) {
  if (ov.lr) hp_.lr = *ov.lr;
  if (ov.rho) hp_.rho = *ov.rho;
  if (ov.beta1) hp_.beta1 = *ov.beta1;
  if (ov.beta2) hp_.beta2 = *ov.beta2;
  if (ov.momentum) hp_.momentum = *ov.momentum;
  if (ov.epsilon) hp_.epsilon = *ov.epsilon;
  hp_.validate();
  current_lr_ = hp_.lr;
}

template <typename T>
Optimizer<T>::Optimizer(OptimizerHyperparams hp) : hp_(hp) {
  hp_.validate();
  current_lr_ = hp_.lr;
}

template <typename T>
void Optimizer<T>::set_lr(double lr) {
  if (!(lr > 0.0)) {
    throw ConfigError("set_lr: learning rate must be > 0, got " +
                      std::to_string(lr));
  }
  current_lr_ = lr;
}

template <typename T>
void Optimizer<T>::ensure_slots(const std::vector<std::span<T>>& params) {
  if (!slot_a_.empty()) {
    if (slot_a_.size() != params.size()) {
      throw ShapeError("optimizer state tracks " +
                       std::to_string(slot_a_.size()) +
                       " parameter arrays, got " +
                       std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (slot_a_[i].size() != params[i].size()) {
        throw ShapeError("optimizer accumulator " + std::to_string(i) +
                         " has size " + std::to_string(slot_a_[i].size()) +
                         ", parameter has size " +
                         std::to_string(params[i].size()));
      }
    }
    return;
  }
  slot_a_.resize(params.size());
  slot_b_.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    slot_a_[i].assign(params[i].size(), T{0});
    slot_b_[i].assign(params[i].size(), T{0});
  }
}

template <typename T>
void Optimizer<T>::step(std::vector<std::span<T>> params,
                        const std::vector<std::span<const T>>& grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("step: " + std::to_string(params.size()) +
                     " parameter arrays vs " + std::to_string(grads.size()) +
                     " gradient arrays");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size()) {
      throw ShapeError("step: parameter array " + std::to_string(i) +
                       " has size " + std::to_string(params[i].size()) +
                       ", gradient has size " +
                       std::to_string(grads[i].size()));
    }
  }
  ensure_slots(params);
  ++t_;

  const T lr = static_cast<T>(current_lr_);
  const T rho = static_cast<T>(hp_.rho);
  const T beta1 = static_cast<T>(hp_.beta1);
  const T beta2 = static_cast<T>(hp_.beta2);
  const T mu = static_cast<T>(hp_.momentum);
  const T eps = static_cast<T>(hp_.epsilon);

  // Bias-correction factors for the Adam family, with the incremented t.
  const double b1t = std::pow(hp_.beta1, static_cast<double>(t_));
  const double b2t = std::pow(hp_.beta2, static_cast<double>(t_));
  const double b1t1 = std::pow(hp_.beta1, static_cast<double>(t_ + 1));
  const T inv_m_corr = static_cast<T>(1.0 / (1.0 - b1t));
  const T inv_v_corr = static_cast<T>(1.0 / (1.0 - b2t));

  for (std::size_t i = 0; i < params.size(); ++i) {
    T* w = params[i].data();
    const T* g = grads[i].data();
    T* a = slot_a_[i].data();
    T* b = slot_b_[i].data();
    const std::size_t n = params[i].size();

    switch (hp_.kind) {
      case OptimizerKind::Sgd:
        for (std::size_t j = 0; j < n; ++j) w[j] -= lr * g[j];
        break;

      case OptimizerKind::SgdNesterov:
        // Look-ahead form: v <- mu*v - lr*g; w <- w + mu*v - lr*g.
        for (std::size_t j = 0; j < n; ++j) {
          a[j] = mu * a[j] - lr * g[j];
          w[j] += mu * a[j] - lr * g[j];
        }
        break;

      case OptimizerKind::RmsProp:
        for (std::size_t j = 0; j < n; ++j) {
          a[j] = rho * a[j] + (T{1} - rho) * g[j] * g[j];
          w[j] -= lr * g[j] / (std::sqrt(a[j]) + eps);
        }
        break;

      case OptimizerKind::Adagrad:
        for (std::size_t j = 0; j < n; ++j) {
          a[j] += g[j] * g[j];
          w[j] -= lr * g[j] / (std::sqrt(a[j]) + eps);
        }
        break;

      case OptimizerKind::Adadelta:
        // a: running E[g^2], b: running E[dx^2]; epsilon inside both roots.
        for (std::size_t j = 0; j < n; ++j) {
          a[j] = rho * a[j] + (T{1} - rho) * g[j] * g[j];
          const T dx = -std::sqrt((b[j] + eps) / (a[j] + eps)) * g[j];
          b[j] = rho * b[j] + (T{1} - rho) * dx * dx;
          w[j] += lr * dx;
        }
        break;

      case OptimizerKind::Adam:
        for (std::size_t j = 0; j < n; ++j) {
          a[j] = beta1 * a[j] + (T{1} - beta1) * g[j];
          b[j] = beta2 * b[j] + (T{1} - beta2) * g[j] * g[j];
          const T mhat = a[j] * inv_m_corr;
          const T vhat = b[j] * inv_v_corr;
          w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        break;

      case OptimizerKind::Adamax:
        // b: infinity-norm accumulator u.
        for (std::size_t j = 0; j < n; ++j) {
          a[j] = beta1 * a[j] + (T{1} - beta1) * g[j];
          const T mag = g[j] < T{0} ? -g[j] : g[j];
          b[j] = std::max(beta2 * b[j], mag);
          w[j] -= lr * (a[j] * inv_m_corr) / (b[j] + eps);
        }
        break;

      case OptimizerKind::Nadam: {
        // Adam with a Nesterov-style interpolation of the corrected moment.
        const T m_next_corr = static_cast<T>(1.0 / (1.0 - b1t1));
        for (std::size_t j = 0; j < n; ++j) {
          a[j] = beta1 * a[j] + (T{1} - beta1) * g[j];
          b[j] = beta2 * b[j] + (T{1} - beta2) * g[j] * g[j];
          const T mhat =
              beta1 * a[j] * m_next_corr + (T{1} - beta1) * g[j] * inv_m_corr;
          const T vhat = b[j] * inv_v_corr;
          w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        break;
      }
    }
  }
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace segmicro
