#include "avec/model.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace avec {

namespace {

Parameter make_weight(std::string name, Shape shape, Rng& rng, double stddev = 0.02) {
  Tensor t(std::move(shape));
  for (double& v : t.values_mut()) v = rng.truncated_normal(stddev);
  return Parameter(std::move(name), std::move(t));
}

Parameter make_zeros(std::string name, Shape shape) {
  return Parameter(std::move(name), Tensor(std::move(shape), 0.0));
}

Parameter make_ones(std::string name, Shape shape) {
  return Parameter(std::move(name), Tensor(std::move(shape), 1.0));
}

std::vector<AttentionHead> make_heads(const std::string& prefix, std::size_t n_heads,
                                      std::size_t d, std::size_t d_head, Rng& rng) {
  std::vector<AttentionHead> heads;
  heads.reserve(n_heads);
  for (std::size_t j = 0; j < n_heads; ++j) {
    const std::string hp = prefix + ".head" + std::to_string(j);
    heads.push_back(AttentionHead{make_weight(hp + ".wq", {d, d_head}, rng),
                                  make_weight(hp + ".wk", {d, d_head}, rng),
                                  make_weight(hp + ".wv", {d, d_head}, rng)});
  }
  return heads;
}

// Shared multi-head cross/self attention body. q_in: [S, d], kv_in: [T, d].
Tensor attention(Tape& tape, const Tensor& q_in, const Tensor& kv_in,
                 const std::vector<AttentionHead>& heads, const Parameter& wo,
                 const Parameter& wo_bias) {
  const std::size_t d_head = heads.front().wq.tensor.dim(1);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));
  std::vector<Tensor> per_head;
  per_head.reserve(heads.size());
  for (const AttentionHead& head : heads) {
    Tensor q = tape.matmul(q_in, head.wq.tensor);
    Tensor k = tape.matmul(kv_in, head.wk.tensor);
    Tensor v = tape.matmul(kv_in, head.wv.tensor);
    Tensor scores = tape.scale(tape.matmul_nt(q, k), inv_sqrt);
    Tensor probs = tape.softmax(scores, 1);
    per_head.push_back(tape.matmul(probs, v));
  }
  Tensor merged = tape.concat_cols(per_head);
  return tape.add_bias(tape.matmul(merged, wo.tensor), wo_bias.tensor);
}

}  // namespace

void ModelConfig::validate() const {
  if (patch_size == 0 || embed_dim == 0 || depth == 0 || heads == 0 || mlp_ratio == 0 ||
      projection_dim == 0) {
    throw std::invalid_argument("model config: all dimensions must be positive");
  }
  if (audio_time % patch_size || audio_freq % patch_size || image_size % patch_size) {
    throw std::invalid_argument("model config: input axes must be divisible by patch size");
  }
  if (embed_dim % heads) {
    throw std::invalid_argument("model config: embed_dim must be divisible by heads");
  }
  if (layer_norm_eps <= 0.0) {
    throw std::invalid_argument("model config: layer_norm_eps must be positive");
  }
}

Tensor patchify(const ModalityInput& input, std::size_t patch_size) {
  validate_modality_input(input);
  const auto& s = input.data.shape();
  const std::size_t rows = s[0], cols = s[1];
  const std::size_t ch = input.modality == Modality::audio ? 1 : 3;
  if (rows % patch_size || cols % patch_size) {
    throw std::invalid_argument("patchify: input " + shape_str(s) +
                                " not divisible by patch size " +
                                std::to_string(patch_size));
  }
  const std::size_t gr = rows / patch_size, gc = cols / patch_size;
  const std::size_t patch_dim = patch_size * patch_size * ch;
  Tensor out({gr * gc, patch_dim});
  const auto in = input.data.values();
  std::size_t token = 0;
  for (std::size_t pr = 0; pr < gr; ++pr) {
    for (std::size_t pc = 0; pc < gc; ++pc, ++token) {
      std::size_t idx = 0;
      for (std::size_t r = 0; r < patch_size; ++r)
        for (std::size_t c = 0; c < patch_size; ++c)
          for (std::size_t k = 0; k < ch; ++k, ++idx) {
            const std::size_t rr = pr * patch_size + r;
            const std::size_t cc = pc * patch_size + c;
            out.mut(token * patch_dim + idx) = in[(rr * cols + cc) * ch + k];
          }
    }
  }
  return out;
}

Tensor TransformerBlock::forward(Tape& tape, const Tensor& x, double ln_eps) const {
  Tensor a = tape.layer_norm(x, ln1_gamma.tensor, ln1_beta.tensor, ln_eps);
  Tensor attn = attention(tape, a, a, heads, wo, wo_bias);
  Tensor x1 = tape.add(x, attn);
  Tensor f = tape.layer_norm(x1, ln2_gamma.tensor, ln2_beta.tensor, ln_eps);
  Tensor mid = tape.gelu(tape.add_bias(tape.matmul(f, ffn_w1.tensor), ffn_b1.tensor));
  Tensor ffn = tape.add_bias(tape.matmul(mid, ffn_w2.tensor), ffn_b2.tensor);
  return tape.add(x1, ffn);
}

void TransformerBlock::collect(std::vector<Parameter*>& out) {
  out.push_back(&ln1_gamma);
  out.push_back(&ln1_beta);
  for (AttentionHead& h : heads) {
    out.push_back(&h.wq);
    out.push_back(&h.wk);
    out.push_back(&h.wv);
  }
  out.push_back(&wo);
  out.push_back(&wo_bias);
  out.push_back(&ln2_gamma);
  out.push_back(&ln2_beta);
  out.push_back(&ffn_w1);
  out.push_back(&ffn_b1);
  out.push_back(&ffn_w2);
  out.push_back(&ffn_b2);
}

Encoder::Encoder(Modality modality, const ModelConfig& cfg, Rng& init,
                 const std::string& prefix)
    : modality_(modality), patch_(cfg.patch_size), ln_eps_(cfg.layer_norm_eps) {
  cfg.validate();
  if (modality == Modality::audio) {
    rows_ = cfg.audio_time;
    cols_ = cfg.audio_freq;
  } else {
    rows_ = cfg.image_size;
    cols_ = cfg.image_size;
  }
  const std::size_t ch = channels_for(modality);
  tokens_ = (rows_ / patch_) * (cols_ / patch_);
  patch_dim_ = patch_ * patch_ * ch;
  const std::size_t d = cfg.embed_dim;
  const std::size_t d_head = d / cfg.heads;

  patch_weight = make_weight(prefix + ".patch.weight", {patch_dim_, d}, init);
  patch_bias = make_zeros(prefix + ".patch.bias", {d});
  pos_embed = make_weight(prefix + ".pos", {tokens_, d}, init);
  for (std::size_t b = 0; b < cfg.depth; ++b) {
    const std::string bp = prefix + ".block" + std::to_string(b);
    TransformerBlock block{
        make_ones(bp + ".ln1.gamma", {d}),
        make_zeros(bp + ".ln1.beta", {d}),
        make_heads(bp, cfg.heads, d, d_head, init),
        make_weight(bp + ".wo", {cfg.heads * d_head, d}, init),
        make_zeros(bp + ".wo.bias", {d}),
        make_ones(bp + ".ln2.gamma", {d}),
        make_zeros(bp + ".ln2.beta", {d}),
        make_weight(bp + ".ffn.w1", {d, cfg.mlp_ratio * d}, init),
        make_zeros(bp + ".ffn.b1", {cfg.mlp_ratio * d}),
        make_weight(bp + ".ffn.w2", {cfg.mlp_ratio * d, d}, init),
        make_zeros(bp + ".ffn.b2", {d}),
    };
    blocks.push_back(std::move(block));
  }
}

std::size_t Encoder::channels_for(Modality m) { return m == Modality::audio ? 1 : 3; }

Tensor Encoder::encode(Tape& tape, const ModalityInput& input) const {
  validate_modality_input(input);
  if (input.modality != modality_) {
    throw std::invalid_argument("encode: input modality does not match encoder");
  }
  const auto& s = input.data.shape();
  if (s[0] != rows_ || s[1] != cols_) {
    throw std::invalid_argument("encode: input " + shape_str(s) +
                                " does not match configured extent " +
                                std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  Tensor patches = patchify(input, patch_);
  Tensor x = tape.add_bias(tape.matmul(patches, patch_weight.tensor), patch_bias.tensor);
  x = tape.add(x, pos_embed.tensor);
  for (const TransformerBlock& block : blocks) x = block.forward(tape, x, ln_eps_);
  return x;
}

void Encoder::collect(std::vector<Parameter*>& out) {
  out.push_back(&patch_weight);
  out.push_back(&patch_bias);
  out.push_back(&pos_embed);
  for (TransformerBlock& b : blocks) b.collect(out);
}

TransformationPredictor::TransformationPredictor(Modality modality,
                                                 const ModelConfig& cfg, Rng& init,
                                                 const std::string& prefix)
    : modality_(modality), d_(cfg.embed_dim),
      d_t_(avec::augmentation_dim(modality)), n_heads_(cfg.heads),
      d_head_(cfg.embed_dim / cfg.heads), ln_eps_(cfg.layer_norm_eps) {
  ft_weight = make_weight(prefix + ".ft.weight", {d_t_, d_}, init);
  ft_bias = make_zeros(prefix + ".ft.bias", {d_});
  lnq_gamma = make_ones(prefix + ".lnq.gamma", {d_});
  lnq_beta = make_zeros(prefix + ".lnq.beta", {d_});
  lnkv_gamma = make_ones(prefix + ".lnkv.gamma", {d_});
  lnkv_beta = make_zeros(prefix + ".lnkv.beta", {d_});
  heads = make_heads(prefix, n_heads_, d_, d_head_, init);
  wo = make_weight(prefix + ".wo", {n_heads_ * d_head_, d_}, init);
  wo_bias = make_zeros(prefix + ".wo.bias", {d_});
  lnf_gamma = make_ones(prefix + ".lnf.gamma", {d_});
  lnf_beta = make_zeros(prefix + ".lnf.beta", {d_});
  ffn_w1 = make_weight(prefix + ".ffn.w1", {d_, cfg.mlp_ratio * d_}, init);
  ffn_b1 = make_zeros(prefix + ".ffn.b1", {cfg.mlp_ratio * d_});
  ffn_w2 = make_weight(prefix + ".ffn.w2", {cfg.mlp_ratio * d_, d_}, init);
  ffn_b2 = make_zeros(prefix + ".ffn.b2", {d_});
}

Tensor TransformationPredictor::stack_vectors(
    std::span<const AugmentationVector> ts) const {
  Tensor out({ts.size(), d_t_});
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i].modality != modality_ || ts[i].dimension() != d_t_) {
      throw std::invalid_argument(
          "predictor: augmentation vector has dimension " +
          std::to_string(ts[i].dimension()) + ", expected " + std::to_string(d_t_));
    }
    for (std::size_t j = 0; j < d_t_; ++j) out.mut(i * d_t_ + j) = ts[i].values[j];
  }
  return out;
}

Tensor TransformationPredictor::forward(Tape& tape, const Tensor& h,
                                        const Tensor& tvecs) const {
  if (h.rank() != 2 || h.dim(1) != d_) {
    throw std::invalid_argument("predictor: expected [tokens, " + std::to_string(d_) +
                                "] representation, got " + shape_str(h.shape()));
  }
  if (tvecs.rank() != 2 || tvecs.dim(1) != d_t_) {
    throw std::invalid_argument("predictor: expected [S, " + std::to_string(d_t_) +
                                "] augmentation stack, got " + shape_str(tvecs.shape()));
  }
  Tensor kv = tape.layer_norm(h, lnkv_gamma.tensor, lnkv_beta.tensor, ln_eps_);
  Tensor pooled = tape.mean_pool(h);
  Tensor q0 = tape.add_bias(tape.matmul(tvecs, ft_weight.tensor), ft_bias.tensor);
  Tensor q = tape.layer_norm(q0, lnq_gamma.tensor, lnq_beta.tensor, ln_eps_);
  Tensor attn = attention(tape, q, kv, heads, wo, wo_bias);
  Tensor y = tape.add_bias(attn, pooled);
  Tensor f = tape.layer_norm(y, lnf_gamma.tensor, lnf_beta.tensor, ln_eps_);
  Tensor mid = tape.gelu(tape.add_bias(tape.matmul(f, ffn_w1.tensor), ffn_b1.tensor));
  Tensor ffn = tape.add_bias(tape.matmul(mid, ffn_w2.tensor), ffn_b2.tensor);
  return tape.add(y, ffn);
}

Tensor TransformationPredictor::predict_equivariant(Tape& tape, const Tensor& h,
                                                    const AugmentationVector& t) const {
  Tensor tv = stack_vectors({&t, 1});
  Tensor out = forward(tape, h, tv);
  return tape.reshape(out, {d_});
}

Tensor TransformationPredictor::compute_centroid(
    Tape& tape, const Tensor& h, std::span<const AugmentationVector> ts) const {
  if (ts.empty()) {
    throw std::invalid_argument("compute_centroid: need at least one augmentation vector");
  }
  Tensor tv = stack_vectors(ts);
  Tensor out = forward(tape, h, tv);
  return tape.mean_pool(out);
}

std::vector<std::vector<double>> TransformationPredictor::attention_probabilities(
    const Tensor& h, const AugmentationVector& t) const {
  Tape tape(false);
  Tensor kv = tape.layer_norm(h, lnkv_gamma.tensor, lnkv_beta.tensor, ln_eps_);
  Tensor tv = stack_vectors({&t, 1});
  Tensor q0 = tape.add_bias(tape.matmul(tv, ft_weight.tensor), ft_bias.tensor);
  Tensor q = tape.layer_norm(q0, lnq_gamma.tensor, lnq_beta.tensor, ln_eps_);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head_));
  std::vector<std::vector<double>> probs;
  for (const AttentionHead& head : heads) {
    Tensor qj = tape.matmul(q, head.wq.tensor);
    Tensor kj = tape.matmul(kv, head.wk.tensor);
    Tensor scores = tape.scale(tape.matmul_nt(qj, kj), inv_sqrt);
    Tensor p = tape.softmax(scores, 1);
    probs.emplace_back(p.values().begin(), p.values().end());
  }
  return probs;
}

void TransformationPredictor::collect(std::vector<Parameter*>& out) {
  out.push_back(&ft_weight);
  out.push_back(&ft_bias);
  out.push_back(&lnq_gamma);
  out.push_back(&lnq_beta);
  out.push_back(&lnkv_gamma);
  out.push_back(&lnkv_beta);
  for (AttentionHead& h : heads) {
    out.push_back(&h.wq);
    out.push_back(&h.wk);
    out.push_back(&h.wv);
  }
  out.push_back(&wo);
  out.push_back(&wo_bias);
  out.push_back(&lnf_gamma);
  out.push_back(&lnf_beta);
  out.push_back(&ffn_w1);
  out.push_back(&ffn_b1);
  out.push_back(&ffn_w2);
  out.push_back(&ffn_b2);
}

ProjectionHead::ProjectionHead(std::size_t in_dim, std::size_t hidden_dim,
                               std::size_t out_dim, double ln_eps, Rng& init,
                               const std::string& prefix)
    : in_dim_(in_dim), out_dim_(out_dim), ln_eps_(ln_eps) {
  w1 = make_weight(prefix + ".w1", {in_dim, hidden_dim}, init);
  b1 = make_zeros(prefix + ".b1", {hidden_dim});
  ln1_gamma = make_ones(prefix + ".ln1.gamma", {hidden_dim});
  ln1_beta = make_zeros(prefix + ".ln1.beta", {hidden_dim});
  w2 = make_weight(prefix + ".w2", {hidden_dim, hidden_dim}, init);
  b2 = make_zeros(prefix + ".b2", {hidden_dim});
  ln2_gamma = make_ones(prefix + ".ln2.gamma", {hidden_dim});
  ln2_beta = make_zeros(prefix + ".ln2.beta", {hidden_dim});
  w3 = make_weight(prefix + ".w3", {hidden_dim, out_dim}, init);
  b3 = make_zeros(prefix + ".b3", {out_dim});
}

Tensor ProjectionHead::project(Tape& tape, const Tensor& rep) const {
  const bool vector_in = rep.rank() == 1;
  if ((vector_in && rep.dim(0) != in_dim_) ||
      (!vector_in && (rep.rank() != 2 || rep.dim(1) != in_dim_))) {
    throw std::invalid_argument("project: representation " + shape_str(rep.shape()) +
                                " does not match input dim " + std::to_string(in_dim_));
  }
  Tensor x = vector_in ? tape.reshape(rep, {1, in_dim_}) : rep;
  Tensor h1 = tape.add_bias(tape.matmul(x, w1.tensor), b1.tensor);
  h1 = tape.gelu(tape.layer_norm(h1, ln1_gamma.tensor, ln1_beta.tensor, ln_eps_));
  Tensor h2 = tape.add_bias(tape.matmul(h1, w2.tensor), b2.tensor);
  h2 = tape.gelu(tape.layer_norm(h2, ln2_gamma.tensor, ln2_beta.tensor, ln_eps_));
  Tensor out = tape.add_bias(tape.matmul(h2, w3.tensor), b3.tensor);
  return vector_in ? tape.reshape(out, {out_dim_}) : out;
}

void ProjectionHead::collect(std::vector<Parameter*>& out) {
  out.push_back(&w1);
  out.push_back(&b1);
  out.push_back(&ln1_gamma);
  out.push_back(&ln1_beta);
  out.push_back(&w2);
  out.push_back(&b2);
  out.push_back(&ln2_gamma);
  out.push_back(&ln2_beta);
  out.push_back(&w3);
  out.push_back(&b3);
}

ModelSet::ModelSet(const ModelConfig& cfg, std::uint64_t init_seed)
    : ModelSet(cfg, Rng(derive_seed(init_seed, "model.init"))) {}

ModelSet::ModelSet(const ModelConfig& cfg, Rng&& init)
    : config(cfg),
      audio_encoder(Modality::audio, cfg, init, "audio.encoder"),
      visual_encoder(Modality::visual, cfg, init, "visual.encoder"),
      audio_predictor(Modality::audio, cfg, init, "audio.predictor"),
      visual_predictor(Modality::visual, cfg, init, "visual.predictor"),
      audio_intra(cfg.embed_dim, cfg.embed_dim, cfg.projection_dim, cfg.layer_norm_eps,
                  init, "audio.intra"),
      visual_intra(cfg.embed_dim, cfg.embed_dim, cfg.projection_dim, cfg.layer_norm_eps,
                   init, "visual.intra"),
      audio_inter(cfg.embed_dim, cfg.embed_dim, cfg.projection_dim, cfg.layer_norm_eps,
                  init, "audio.inter"),
      visual_inter(cfg.embed_dim, cfg.embed_dim, cfg.projection_dim, cfg.layer_norm_eps,
                   init, "visual.inter") {}

std::vector<Parameter*> ModelSet::parameters() {
  std::vector<Parameter*> out;
  audio_encoder.collect(out);
  visual_encoder.collect(out);
  audio_predictor.collect(out);
  visual_predictor.collect(out);
  audio_intra.collect(out);
  visual_intra.collect(out);
  audio_inter.collect(out);
  visual_inter.collect(out);
  std::set<std::string> names;
  for (const Parameter* p : out) {
    if (!names.insert(p->name).second) {
      throw std::logic_error("duplicate parameter name: " + p->name);
    }
  }
  return out;
}

Parameter* ModelSet::find(const std::string& name) {
  for (Parameter* p : parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

}  // namespace avec
