#include "avec/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace avec {

namespace {

void check_embeddings(const char* op, const Tensor& a, const Tensor& b, double tau) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument(std::string(op) + ": embeddings must be rank-2");
  }
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  if (a.dim(0) == 0) {
    throw std::invalid_argument(std::string(op) + ": empty batch");
  }
  if (tau <= 0.0) {
    throw std::invalid_argument(std::string(op) + ": temperature must be positive");
  }
}

void check_rows_nonzero(const char* op, const Tensor& x) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += x.at(i, j) * x.at(i, j);
    if (std::sqrt(sq) < kNormalizeEps) {
      throw std::invalid_argument(std::string(op) + ": degenerate embedding, row " +
                                  std::to_string(i) + " has (near-)zero norm");
    }
  }
}

// Positive-pair index list in anchor order: anchors 0..N-1 pair with N+i,
// anchors N..2N-1 pair with i-N.
std::vector<std::pair<std::size_t, std::size_t>> paired_indices(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) pairs.emplace_back(i, n + i);
  for (std::size_t i = 0; i < n; ++i) pairs.emplace_back(n + i, i);
  return pairs;
}

// Excluded candidates are masked to zero before the row sum rather than
// subtracted afterwards: the self term exp(1/tau) dwarfs small denominators
// and subtracting it would cancel most of their significant digits.
Tensor masked_row_sum(Tape& tape, const Tensor& expo,
                      std::span<const std::pair<std::size_t, std::size_t>> excluded) {
  Tensor mask(expo.shape(), 1.0);
  const std::size_t cols = expo.dim(1);
  for (std::size_t i = 0; i < expo.dim(0); ++i) mask.mut(i * cols + i) = 0.0;
  for (const auto& [i, j] : excluded) mask.mut(i * cols + j) = 0.0;
  return tape.row_sum(tape.mul(expo, mask));
}

}  // namespace

SimilarityMatrix similarity_matrix(const Tensor& a, const Tensor& b, double tau) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw std::invalid_argument("similarity_matrix: embeddings must be rank-2 with "
                                "equal width, got " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()));
  }
  if (tau <= 0.0) {
    throw std::invalid_argument("similarity_matrix: temperature must be positive");
  }
  check_rows_nonzero("similarity_matrix", a);
  check_rows_nonzero("similarity_matrix", b);
  const std::size_t n = a.dim(0), m = b.dim(0), d = a.dim(1);
  auto row_norm = [d](const Tensor& t, std::size_t i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += t.at(i, j) * t.at(i, j);
    return std::sqrt(sq);
  };
  SimilarityMatrix sim;
  sim.rows = n;
  sim.cols = m;
  sim.tau = tau;
  sim.entries.resize(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    const double na = row_norm(a, i);
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += a.at(i, k) * b.at(j, k);
      sim.entries[i * m + j] = std::exp(dot / (na * row_norm(b, j) * tau));
    }
  }
  return sim;
}

Tensor intra_loss(Tape& tape, const Tensor& a, const Tensor& b, double tau) {
  check_embeddings("intra_loss", a, b, tau);
  check_rows_nonzero("intra_loss", a);
  check_rows_nonzero("intra_loss", b);
  const std::size_t n = a.dim(0);
  const Tensor views[] = {a, b};
  Tensor stacked = tape.concat_rows(views);                       // [2N, p]
  Tensor zn = tape.row_l2_normalize(stacked, kNormalizeEps);
  Tensor logits = tape.scale(tape.matmul_nt(zn, zn), 1.0 / tau);  // [2N, 2N]
  Tensor expo = tape.exp(logits);
  // Per-anchor denominator: everything in the pool except the anchor itself.
  Tensor denom = masked_row_sum(tape, expo, {});
  const auto pairs = paired_indices(n);
  Tensor pos_logits = tape.gather_pairs(logits, pairs);
  Tensor per_anchor = tape.sub(tape.log(denom), pos_logits);
  return tape.scale(tape.sum(per_anchor), 1.0 / static_cast<double>(2 * n));
}

Tensor equimod_loss(Tape& tape, const Tensor& a, const Tensor& b, double tau) {
  check_embeddings("equimod_loss", a, b, tau);
  check_rows_nonzero("equimod_loss", a);
  check_rows_nonzero("equimod_loss", b);
  const std::size_t n = a.dim(0);
  if (n < 2) {
    throw std::invalid_argument(
        "equimod_loss: batch of one leaves the denominator empty (no negatives)");
  }
  const Tensor views[] = {a, b};
  Tensor stacked = tape.concat_rows(views);
  Tensor zn = tape.row_l2_normalize(stacked, kNormalizeEps);
  Tensor logits = tape.scale(tape.matmul_nt(zn, zn), 1.0 / tau);
  Tensor expo = tape.exp(logits);
  const auto pairs = paired_indices(n);
  // Denominator drops both the anchor itself and its positive.
  Tensor denom = masked_row_sum(tape, expo, pairs);
  Tensor pos_logits = tape.gather_pairs(logits, pairs);
  Tensor per_anchor = tape.sub(tape.log(denom), pos_logits);
  return tape.scale(tape.sum(per_anchor), 1.0 / static_cast<double>(2 * n));
}

Tensor inter_loss(Tape& tape, const Tensor& za, const Tensor& zv, double tau) {
  check_embeddings("inter_loss", za, zv, tau);
  check_rows_nonzero("inter_loss", za);
  check_rows_nonzero("inter_loss", zv);
  const std::size_t n = za.dim(0);
  Tensor zan = tape.row_l2_normalize(za, kNormalizeEps);
  Tensor zvn = tape.row_l2_normalize(zv, kNormalizeEps);
  auto direction = [&](const Tensor& q, const Tensor& g) {
    Tensor logits = tape.scale(tape.matmul_nt(q, g), 1.0 / tau);  // [N, N]
    Tensor expo = tape.exp(logits);
    Tensor per_anchor = tape.sub(tape.log(tape.row_sum(expo)), tape.diag(logits));
    return tape.sum(per_anchor);
  };
  Tensor both = tape.add(direction(zan, zvn), direction(zvn, zan));
  return tape.scale(both, 1.0 / static_cast<double>(2 * n));
}

LossOutput total_loss(Tape& tape, const Tensor& inter, const Tensor& intra_audio,
                      const Tensor& intra_visual, const LossWeights& weights) {
  if (weights.inter < 0.0 || weights.intra_audio < 0.0 || weights.intra_visual < 0.0) {
    throw std::invalid_argument("total_loss: weights must be non-negative");
  }
  if (weights.inter == 0.0 && weights.intra_audio == 0.0 && weights.intra_visual == 0.0) {
    throw std::invalid_argument("total_loss: at least one weight must be positive");
  }
  for (const Tensor* c : {&inter, &intra_audio, &intra_visual}) {
    if (c->size() != 1 || !std::isfinite(c->item())) {
      throw std::invalid_argument("total_loss: components must be finite scalars");
    }
  }
  LossOutput out;
  out.inter = inter.item();
  out.intra_audio = intra_audio.item();
  out.intra_visual = intra_visual.item();
  Tensor t = tape.scale(inter, weights.inter);
  t = tape.add(t, tape.scale(intra_audio, weights.intra_audio));
  t = tape.add(t, tape.scale(intra_visual, weights.intra_visual));
  out.total = t;
  return out;
}

GradientFactor gradient_factor_check(double s_pos, std::span<const double> s_negs) {
  if (s_negs.empty()) {
    throw std::invalid_argument("gradient_factor_check: empty negative set");
  }
  if (s_pos <= 0.0) {
    throw std::invalid_argument("gradient_factor_check: s_pos must be positive");
  }
  double sum_neg = 0.0;
  for (double s : s_negs) {
    if (s <= 0.0) {
      throw std::invalid_argument("gradient_factor_check: negatives must be positive");
    }
    sum_neg += s;
  }
  GradientFactor out;
  out.d_exclusive = -1.0 / s_pos;
  out.d_inclusive = -sum_neg / (s_pos * (s_pos + sum_neg));
  out.factor = sum_neg / (s_pos + sum_neg);
  return out;
}

namespace {
void check_anchor_inputs(const char* op, const Tensor& s_pos, const Tensor& s_negs) {
  if (s_pos.size() != 1) {
    throw std::invalid_argument(std::string(op) + ": s_pos must be a single value");
  }
  if (s_negs.rank() != 1 || s_negs.size() == 0) {
    throw std::invalid_argument(std::string(op) + ": s_negs must be non-empty rank-1");
  }
  if (s_pos[0] <= 0.0) {
    throw std::invalid_argument(std::string(op) + ": s_pos must be positive");
  }
  for (std::size_t i = 0; i < s_negs.size(); ++i) {
    if (s_negs[i] <= 0.0) {
      throw std::invalid_argument(std::string(op) + ": negatives must be positive");
    }
  }
}
}  // namespace

Tensor anchor_loss_inclusive(Tape& tape, const Tensor& s_pos, const Tensor& s_negs) {
  check_anchor_inputs("anchor_loss_inclusive", s_pos, s_negs);
  Tensor denom = tape.add(tape.sum(s_negs), s_pos);
  return tape.sub(tape.log(denom), tape.log(s_pos));
}

Tensor anchor_loss_exclusive(Tape& tape, const Tensor& s_pos, const Tensor& s_negs) {
  check_anchor_inputs("anchor_loss_exclusive", s_pos, s_negs);
  return tape.sub(tape.log(tape.sum(s_negs)), tape.log(s_pos));
}

}  // namespace avec
