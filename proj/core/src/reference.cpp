#include "avec/reference.hpp"

#include <cmath>
#include <stdexcept>

namespace avec::reference {

long double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

long double sim_exp(const std::vector<double>& a, const std::vector<double>& b,
                    double tau) {
  return std::exp(cosine(a, b) / static_cast<long double>(tau));
}

// One paired-view direction: anchors `anchor[i]`, positives `pos[i]`, the
// candidate pool is every other embedding of both views.
long double paired_direction(const Rows& anchor, const Rows& pos, double tau,
                             bool include_positive) {
  const std::size_t n = anchor.size();
  long double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double s_pos = sim_exp(anchor[i], pos[i], tau);
    long double denom = include_positive ? s_pos : 0.0L;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      denom += sim_exp(anchor[i], anchor[j], tau);
      denom += sim_exp(anchor[i], pos[j], tau);
    }
    total += -std::log(s_pos / denom);
  }
  return total / static_cast<long double>(n);
}

}  // namespace

long double intra_loss_oracle(const Rows& a, const Rows& b, double tau) {
  if (a.empty() || a.size() != b.size()) {
    throw std::invalid_argument("intra_loss_oracle: bad batch");
  }
  return 0.5L * (paired_direction(a, b, tau, true) + paired_direction(b, a, tau, true));
}

long double equimod_loss_oracle(const Rows& a, const Rows& b, double tau) {
  if (a.size() < 2 || a.size() != b.size()) {
    throw std::invalid_argument("equimod_loss_oracle: need at least two pairs");
  }
  return 0.5L * (paired_direction(a, b, tau, false) + paired_direction(b, a, tau, false));
}

long double inter_loss_oracle(const Rows& za, const Rows& zv, double tau) {
  if (za.empty() || za.size() != zv.size()) {
    throw std::invalid_argument("inter_loss_oracle: bad batch");
  }
  const std::size_t n = za.size();
  long double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    long double denom_av = 0, denom_va = 0;
    for (std::size_t j = 0; j < n; ++j) {
      denom_av += sim_exp(za[i], zv[j], tau);
      denom_va += sim_exp(zv[i], za[j], tau);
    }
    const long double s_pos = sim_exp(za[i], zv[i], tau);
    total += -std::log(s_pos / denom_av) - std::log(s_pos / denom_va);
  }
  return total / static_cast<long double>(2 * n);
}

double relative_error(double a, double b, double floor) {
  const double denom = std::max(std::max(std::fabs(a), std::fabs(b)), floor);
  return std::fabs(a - b) / denom;
}

GradCheckReport compare_gradients(const std::function<double()>& loss_fn,
                                  std::span<Parameter* const> params, double step,
                                  double floor, bool richardson) {
  GradCheckReport report;
  for (Parameter* p : params) {
    if (!p->tensor.has_grad()) {
      throw std::invalid_argument("compare_gradients: '" + p->name +
                                  "' has no analytic gradient");
    }
    auto values = p->tensor.values_mut();
    const auto grad = p->tensor.grad();
    auto central = [&](std::size_t i, double h) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss_fn();
      values[i] = saved - h;
      const double down = loss_fn();
      values[i] = saved;
      return (up - down) / (2.0 * h);
    };
    for (std::size_t i = 0; i < values.size(); ++i) {
      double fd = central(i, step);
      if (richardson) fd = (4.0 * central(i, step / 2) - fd) / 3.0;
      const double err = relative_error(fd, grad[i], floor);
      ++report.checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_parameter = p->name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace avec::reference
