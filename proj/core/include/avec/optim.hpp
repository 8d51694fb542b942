#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "avec/tensor.hpp"

namespace avec {

/// A named trainable tensor with its optimizer state. Names are unique
/// dotted paths within a model ("audio.encoder.block0.head1.wq").
struct Parameter {
  std::string name;
  Tensor tensor;
  std::vector<double> m;  // first-moment accumulator
  std::vector<double> v;  // second-moment accumulator
  std::uint64_t step = 0;

  Parameter() = default;
  Parameter(std::string name_, Tensor t)
      : name(std::move(name_)), tensor(std::move(t)), m(tensor.size(), 0.0),
        v(tensor.size(), 0.0) {
    tensor.set_requires_grad(true);
  }
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 1e-5;
  double eps = 1e-8;
};

/// Decoupled-weight-decay Adam update. Requires populated gradients on every
/// parameter; throws listing the offenders otherwise. The decay term uses the
/// pre-update value, so a zero-gradient step shrinks by exactly lr*wd*theta.
void adamw_step(std::span<Parameter* const> params, double lr,
                const AdamWConfig& cfg = {});

/// Linear warmup from lr_init to lr_peak, then half-cycle cosine decay back
/// to lr_init at total_steps.
double cosine_lr(std::uint64_t step, std::uint64_t total_steps,
                 std::uint64_t warmup_steps, double lr_init, double lr_peak);

}  // namespace avec
