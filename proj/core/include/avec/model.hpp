#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "avec/augment.hpp"
#include "avec/optim.hpp"
#include "avec/random.hpp"
#include "avec/tensor.hpp"

namespace avec {

struct ModelConfig {
  std::size_t audio_time = 64;
  std::size_t audio_freq = 16;
  std::size_t image_size = 32;
  std::size_t patch_size = 8;
  std::size_t embed_dim = 64;
  std::size_t depth = 5;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t projection_dim = 32;
  double layer_norm_eps = 1e-6;

  void validate() const;
};

/// Splits an input into non-overlapping patches, flattened row-major with the
/// channel fastest. Returns [tokens, patch_size^2 * channels]; plain data, no
/// gradient flows through inputs.
Tensor patchify(const ModalityInput& input, std::size_t patch_size);

struct AttentionHead {
  Parameter wq, wk, wv;  // [d, d_head]
};

struct TransformerBlock {
  Parameter ln1_gamma, ln1_beta;
  std::vector<AttentionHead> heads;
  Parameter wo, wo_bias;  // [heads*d_head, d], [d]
  Parameter ln2_gamma, ln2_beta;
  Parameter ffn_w1, ffn_b1;  // [d, mlp_ratio*d]
  Parameter ffn_w2, ffn_b2;  // [mlp_ratio*d, d]

  Tensor forward(Tape& tape, const Tensor& x, double ln_eps) const;
  void collect(std::vector<Parameter*>& out);
};

/// Patch-embedding transformer encoder: learned positional embeddings, no
/// class token, pre-norm blocks, token-sequence output (pooling happens at
/// the call sites that need it).
class Encoder {
 public:
  Encoder(Modality modality, const ModelConfig& cfg, Rng& init,
          const std::string& name_prefix);

  /// [tokens, embed_dim]; throws if the input shape disagrees with the config.
  Tensor encode(Tape& tape, const ModalityInput& input) const;

  std::size_t token_count() const { return tokens_; }
  Modality modality() const { return modality_; }
  static std::size_t channels_for(Modality m);
  void collect(std::vector<Parameter*>& out);

  Parameter patch_weight, patch_bias;  // [patch_dim, d], [d]
  Parameter pos_embed;                 // [tokens, d]
  std::vector<TransformerBlock> blocks;

 private:
  Modality modality_;
  std::size_t rows_, cols_, patch_, tokens_, patch_dim_;
  double ln_eps_;
};

/// Predicts the latent displacement caused by an input-space augmentation.
/// The encoded augmentation vector queries the original token sequence
/// through one multi-head cross-attention block:
///
///   out = FFN(MHA(f_t(t), h, h) + MeanPool(h))
///
/// where the FFN carries its own residual and the attention/FFN inputs are
/// layer-normalized. One instance per modality serves both the within-modality
/// path and the cross-modal centroid path (single parameter set, not copies).
class TransformationPredictor {
 public:
  TransformationPredictor(Modality modality, const ModelConfig& cfg, Rng& init,
                          const std::string& name_prefix);

  /// Batched query pass: `tvecs` is [S, d_t]; returns [S, embed_dim]. Key and
  /// value projections of `h` are computed once and shared by all S queries.
  Tensor forward(Tape& tape, const Tensor& h, const Tensor& tvecs) const;

  /// Single augmentation vector -> rank-1 [embed_dim] prediction.
  Tensor predict_equivariant(Tape& tape, const Tensor& h,
                             const AugmentationVector& t) const;

  /// Mean of the S predicted representations (requires S >= 1).
  Tensor compute_centroid(Tape& tape, const Tensor& h,
                          std::span<const AugmentationVector> ts) const;

  /// Per-head attention distribution over tokens for one query (no tape).
  std::vector<std::vector<double>> attention_probabilities(
      const Tensor& h, const AugmentationVector& t) const;

  std::size_t augmentation_dim() const { return d_t_; }
  void collect(std::vector<Parameter*>& out);

  Parameter ft_weight, ft_bias;  // augmentation encoder, [d_t, d] + [d]
  Parameter lnq_gamma, lnq_beta;
  Parameter lnkv_gamma, lnkv_beta;
  std::vector<AttentionHead> heads;
  Parameter wo, wo_bias;
  Parameter lnf_gamma, lnf_beta;
  Parameter ffn_w1, ffn_b1, ffn_w2, ffn_b2;

 private:
  Tensor stack_vectors(std::span<const AugmentationVector> ts) const;

  Modality modality_;
  std::size_t d_, d_t_, n_heads_, d_head_;
  double ln_eps_;
};

/// Three affine layers with layer normalization and GELU between them.
class ProjectionHead {
 public:
  ProjectionHead(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim,
                 double ln_eps, Rng& init, const std::string& name_prefix);

  /// Rank-1 [in] -> [out], or row-wise on rank-2 [N, in] -> [N, out].
  Tensor project(Tape& tape, const Tensor& rep) const;

  std::size_t output_dim() const { return out_dim_; }
  void collect(std::vector<Parameter*>& out);

  Parameter w1, b1, ln1_gamma, ln1_beta;
  Parameter w2, b2, ln2_gamma, ln2_beta;
  Parameter w3, b3;

 private:
  std::size_t in_dim_, out_dim_;
  double ln_eps_;
};

/// All learnable components of one experiment. The per-modality predictor is
/// one object referenced by both latent paths.
struct ModelSet {
  ModelSet(const ModelConfig& cfg, std::uint64_t init_seed);

  ModelConfig config;
  Encoder audio_encoder, visual_encoder;
  TransformationPredictor audio_predictor, visual_predictor;
  ProjectionHead audio_intra, visual_intra, audio_inter, visual_inter;

  Encoder& encoder(Modality m) { return m == Modality::audio ? audio_encoder : visual_encoder; }
  const Encoder& encoder(Modality m) const {
    return m == Modality::audio ? audio_encoder : visual_encoder;
  }
  TransformationPredictor& predictor(Modality m) {
    return m == Modality::audio ? audio_predictor : visual_predictor;
  }
  const TransformationPredictor& predictor(Modality m) const {
    return m == Modality::audio ? audio_predictor : visual_predictor;
  }
  ProjectionHead& intra_head(Modality m) { return m == Modality::audio ? audio_intra : visual_intra; }
  ProjectionHead& inter_head(Modality m) { return m == Modality::audio ? audio_inter : visual_inter; }
  const ProjectionHead& intra_head(Modality m) const {
    return m == Modality::audio ? audio_intra : visual_intra;
  }
  const ProjectionHead& inter_head(Modality m) const {
    return m == Modality::audio ? audio_inter : visual_inter;
  }

  std::vector<Parameter*> parameters();
  Parameter* find(const std::string& name);

 private:
  ModelSet(const ModelConfig& cfg, Rng&& init);
};

}  // namespace avec
