#include "avec/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace avec {

void adamw_step(std::span<Parameter* const> params, double lr, const AdamWConfig& cfg) {
  std::string missing;
  for (const Parameter* p : params) {
    if (!p->tensor.has_grad()) {
      if (!missing.empty()) missing += ", ";
      missing += p->name;
    }
  }
  if (!missing.empty()) {
    throw std::invalid_argument("adamw_step: missing gradients for: " + missing);
  }
  for (Parameter* p : params) {
    p->step += 1;
    const auto t = static_cast<double>(p->step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    auto theta = p->tensor.values_mut();
    const auto grad = p->tensor.grad();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] -= lr * cfg.weight_decay * theta[i];
      const double g = grad[i];
      p->m[i] = cfg.beta1 * p->m[i] + (1.0 - cfg.beta1) * g;
      p->v[i] = cfg.beta2 * p->v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p->m[i] / bc1;
      const double vhat = p->v[i] / bc2;
      theta[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

double cosine_lr(std::uint64_t step, std::uint64_t total_steps,
                 std::uint64_t warmup_steps, double lr_init, double lr_peak) {
  if (total_steps == 0 || step > total_steps || warmup_steps >= total_steps) {
    throw std::invalid_argument("cosine_lr: invalid step/total/warmup configuration");
  }
  if (lr_init <= 0.0 || lr_peak < lr_init) {
    throw std::invalid_argument("cosine_lr: need 0 < lr_init <= lr_peak");
  }
  if (step < warmup_steps) {
    return lr_init + (lr_peak - lr_init) * static_cast<double>(step) /
                         static_cast<double>(warmup_steps);
  }
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  return lr_init + 0.5 * (lr_peak - lr_init) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace avec
