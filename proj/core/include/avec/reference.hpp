#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "avec/optim.hpp"

namespace avec::reference {

/// Naive long-double re-implementations used only to verify the production
/// path. They enumerate candidate sets anchor by anchor and never share code
/// with the tape-based losses.
using Rows = std::vector<std::vector<double>>;

long double cosine(const std::vector<double>& a, const std::vector<double>& b);

/// Paired-view contrastive loss with the positive kept in the denominator.
long double intra_loss_oracle(const Rows& a, const Rows& b, double tau);
/// Variant with the positive excluded (batch size must be at least 2).
long double equimod_loss_oracle(const Rows& a, const Rows& b, double tau);
/// Symmetric cross-modal loss over the pairing diagonal.
long double inter_loss_oracle(const Rows& za, const Rows& zv, double tau);

/// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero gradients from
/// amplifying finite-difference round-off into spurious failures.
double relative_error(double a, double b, double floor = 1e-6);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Central finite differences of `loss_fn` against the already-populated
/// analytic gradients of `params`. `loss_fn` must be a pure function of the
/// current parameter values. With `richardson` set, the quadratic truncation
/// term is cancelled by combining the central estimates at `step` and
/// `step/2`; layer normalization right after near-zero-variance activations
/// makes the loss curvy enough that the plain h^2 error would swamp the
/// comparison.
GradCheckReport compare_gradients(const std::function<double()>& loss_fn,
                                  std::span<Parameter* const> params,
                                  double step = 1e-5, double floor = 1e-5,
                                  bool richardson = true);

}  // namespace avec::reference
