#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "avec/tensor.hpp"

namespace avec {

inline constexpr double kNormalizeEps = 1e-12;

/// Exponentiated temperature-scaled cosine similarities between two embedding
/// sets: entries[i][j] = exp(cos(a_i, b_j) / tau). Rows with (near-)zero norm
/// are rejected.
struct SimilarityMatrix {
  std::size_t rows = 0, cols = 0;
  double tau = 0.0;
  std::vector<double> entries;

  double at(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }
};

SimilarityMatrix similarity_matrix(const Tensor& a, const Tensor& b, double tau);

struct LossWeights {
  double inter = 1.0;
  double intra_audio = 1.0;
  double intra_visual = 1.0;
};

struct LossOutput {
  Tensor total;  // scalar, on tape
  double inter = 0.0;
  double intra_audio = 0.0;
  double intra_visual = 0.0;
};

/// Paired-view NT-Xent over a batch of N (a_i, b_i) embedding pairs. Both
/// stacked views form the candidate pool; each anchor's denominator covers
/// every other embedding in the pool plus its own positive. Averaged over the
/// 2N anchors (both anchor directions). N = 1 yields exactly zero.
Tensor intra_loss(Tape& tape, const Tensor& a, const Tensor& b, double tau);

/// Variant that excludes the positive similarity from the denominator, so
/// only the 2(N-1) same-batch negatives remain. N = 1 leaves the denominator
/// empty and is rejected. Can go negative when the positive dominates.
Tensor equimod_loss(Tape& tape, const Tensor& a, const Tensor& b, double tau);

/// Symmetric cross-modal InfoNCE over the N x N similarity matrix; positives
/// on the diagonal, both query directions averaged.
Tensor inter_loss(Tape& tape, const Tensor& za, const Tensor& zv, double tau);

LossOutput total_loss(Tape& tape, const Tensor& inter, const Tensor& intra_audio,
                      const Tensor& intra_visual, const LossWeights& weights);

/// Closed-form derivatives of the two per-anchor losses with respect to the
/// positive similarity s_pos. `d_inclusive` is for the denominator that keeps
/// the positive term, `d_exclusive` for the one that drops it;
/// d_inclusive = d_exclusive * factor with factor in (0, 1).
struct GradientFactor {
  double d_inclusive;
  double d_exclusive;
  double factor;
};

GradientFactor gradient_factor_check(double s_pos, std::span<const double> s_negs);

/// Per-anchor losses expressed directly in similarity space, recorded on the
/// tape so the closed forms above can be cross-checked by differentiation.
/// s_pos is [1], s_negs rank-1 and non-empty; all entries positive.
Tensor anchor_loss_inclusive(Tape& tape, const Tensor& s_pos, const Tensor& s_negs);
Tensor anchor_loss_exclusive(Tape& tape, const Tensor& s_pos, const Tensor& s_negs);

}  // namespace avec
