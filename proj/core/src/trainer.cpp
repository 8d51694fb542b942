#include "avec/trainer.hpp"

#include <algorithm>
#include <future>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "avec/optim.hpp"

namespace avec {

namespace {

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

std::vector<Tensor> apply_views(const std::vector<AugmentationSpec>& specs,
                                const std::vector<ModalityInput>& inputs,
                                std::size_t workers) {
  std::vector<Tensor> out(specs.size());
  if (workers <= 1 || specs.size() < 2) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      out[i] = apply(specs[i], inputs[i]).data;
    }
    return out;
  }
  // apply() is pure, so farming items out keeps results identical to the
  // serial path; only wall time changes.
  std::vector<std::future<Tensor>> futures;
  futures.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    futures.push_back(std::async(std::launch::async, [&specs, &inputs, i] {
      return apply(specs[i], inputs[i]).data;
    }));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) out[i] = futures[i].get();
  return out;
}

}  // namespace

bool parameter_is_active(const std::string& name, const TrainConfig& cfg) {
  const LossWeights& w = cfg.weights;
  const bool anchor_uses_predictor = cfg.inter_anchor == InterAnchor::equivariant ||
                                     cfg.inter_anchor == InterAnchor::centroid;
  auto predictor_active = [&](double intra_weight) {
    return (intra_weight > 0.0 && cfg.intra_mode == IntraMode::equivariant) ||
           (w.inter > 0.0 && anchor_uses_predictor);
  };
  if (starts_with(name, "audio.encoder.")) return w.inter > 0.0 || w.intra_audio > 0.0;
  if (starts_with(name, "visual.encoder.")) return w.inter > 0.0 || w.intra_visual > 0.0;
  if (starts_with(name, "audio.predictor.")) return predictor_active(w.intra_audio);
  if (starts_with(name, "visual.predictor.")) return predictor_active(w.intra_visual);
  if (starts_with(name, "audio.intra.")) return w.intra_audio > 0.0;
  if (starts_with(name, "visual.intra.")) return w.intra_visual > 0.0;
  if (starts_with(name, "audio.inter.")) return w.inter > 0.0;
  if (starts_with(name, "visual.inter.")) return w.inter > 0.0;
  throw std::logic_error("unrecognized parameter name: " + name);
}

Trainer::Trainer(const TrainConfig& cfg, ModelSet* models, const PairedDataset* data)
    : cfg_(cfg), models_(models), data_(data),
      audio_sampler_(Modality::audio, cfg.model.audio_time, cfg.model.audio_freq,
                     SamplerConfig{}, derive_seed(cfg.seed, "augment.audio")),
      visual_sampler_(Modality::visual, cfg.model.image_size, cfg.model.image_size,
                      SamplerConfig{}, derive_seed(cfg.seed, "augment.visual")),
      shuffle_rng_(derive_seed(cfg.seed, "train.shuffle")) {
  cfg_.validate();
  if (data_->items.size() < cfg_.batch_size) {
    throw std::invalid_argument("trainer: dataset smaller than one batch");
  }
  steps_per_epoch_ = data_->items.size() / cfg_.batch_size;
  total_steps_ = steps_per_epoch_ * cfg_.epochs;
  warmup_steps_ = steps_per_epoch_ * cfg_.warmup_epochs;
  all_params_ = models_->parameters();
  for (Parameter* p : all_params_) {
    if (parameter_is_active(p->name, cfg_)) active_params_.push_back(p);
  }
}

std::size_t Trainer::anchor_vector_count() const {
  switch (cfg_.inter_anchor) {
    case InterAnchor::centroid: return cfg_.centroid_samples;
    case InterAnchor::equivariant: return 1;
    default: return 0;
  }
}

Batch Trainer::assemble_batch(std::span<const std::size_t> indices) {
  const bool second_view = cfg_.intra_mode == IntraMode::invariant;
  const std::size_t anchor_count = anchor_vector_count();

  Batch batch;
  batch.indices.assign(indices.begin(), indices.end());
  std::vector<AugmentationSpec> a_specs, v_specs, a_specs2, v_specs2;
  std::vector<ModalityInput> a_inputs, v_inputs;
  for (std::size_t idx : indices) {
    if (idx >= data_->items.size()) {
      throw std::invalid_argument("assemble_batch: item index out of range");
    }
    batch.audio.push_back(data_->items[idx].audio);
    batch.visual.push_back(data_->items[idx].visual);
    a_inputs.push_back(data_->audio_input(idx));
    v_inputs.push_back(data_->visual_input(idx));

    a_specs.push_back(audio_sampler_.sample_spec());
    if (second_view) a_specs2.push_back(audio_sampler_.sample_spec());
    v_specs.push_back(visual_sampler_.sample_spec());
    if (second_view) v_specs2.push_back(visual_sampler_.sample_spec());

    std::vector<AugmentationVector> a_anchor, v_anchor;
    for (std::size_t i = 0; i < anchor_count; ++i) {
      a_anchor.push_back(audio_sampler_.sample_vector());
    }
    for (std::size_t i = 0; i < anchor_count; ++i) {
      v_anchor.push_back(visual_sampler_.sample_vector());
    }
    batch.audio_anchor_t.push_back(std::move(a_anchor));
    batch.visual_anchor_t.push_back(std::move(v_anchor));
  }

  for (const AugmentationSpec& s : a_specs) batch.audio_t.push_back(parameterize(s));
  for (const AugmentationSpec& s : v_specs) batch.visual_t.push_back(parameterize(s));

  batch.audio_aug = apply_views(a_specs, a_inputs, cfg_.workers);
  batch.visual_aug = apply_views(v_specs, v_inputs, cfg_.workers);
  if (second_view) {
    batch.audio_aug2 = apply_views(a_specs2, a_inputs, cfg_.workers);
    batch.visual_aug2 = apply_views(v_specs2, v_inputs, cfg_.workers);
  }
  return batch;
}

LossOutput Trainer::forward_loss(Tape& tape, const Batch& batch) const {
  const std::size_t n = batch.size();
  if (n == 0) throw std::invalid_argument("forward_loss: empty batch");
  const double tau = cfg_.temperature;

  Tensor anchors[2];  // per modality, [N, proj]
  Tensor intra[2];    // per modality, scalar
  for (Modality m : {Modality::audio, Modality::visual}) {
    const bool is_audio = m == Modality::audio;
    const Encoder& enc = models_->encoder(m);
    const TransformationPredictor& pred = models_->predictor(m);
    const auto& originals = is_audio ? batch.audio : batch.visual;
    const auto& augmented = is_audio ? batch.audio_aug : batch.visual_aug;
    const auto& augmented2 = is_audio ? batch.audio_aug2 : batch.visual_aug2;
    const auto& tvecs = is_audio ? batch.audio_t : batch.visual_t;
    const auto& anchor_ts = is_audio ? batch.audio_anchor_t : batch.visual_anchor_t;

    std::vector<Tensor> first_rows, second_rows, anchor_rows;
    for (std::size_t k = 0; k < n; ++k) {
      // The anchor branch must see the original, never an augmented view.
      std::optional<Tensor> h;
      auto original_tokens = [&]() -> const Tensor& {
        if (!h) h = enc.encode(tape, {m, originals[k]});
        return *h;
      };
      Tensor h_aug = enc.encode(tape, {m, augmented[k]});
      Tensor pooled_aug = tape.mean_pool(h_aug);

      if (cfg_.intra_mode == IntraMode::equivariant) {
        first_rows.push_back(pred.predict_equivariant(tape, original_tokens(), tvecs[k]));
      } else {
        Tensor h_aug2 = enc.encode(tape, {m, augmented2[k]});
        first_rows.push_back(tape.mean_pool(h_aug2));
      }
      second_rows.push_back(pooled_aug);

      switch (cfg_.inter_anchor) {
        case InterAnchor::original:
          anchor_rows.push_back(tape.mean_pool(original_tokens()));
          break;
        case InterAnchor::augmented:
          anchor_rows.push_back(pooled_aug);
          break;
        case InterAnchor::equivariant:
        case InterAnchor::centroid:
          anchor_rows.push_back(
              pred.compute_centroid(tape, original_tokens(), anchor_ts[k]));
          break;
      }
    }
    const ProjectionHead& intra_head = models_->intra_head(m);
    const ProjectionHead& inter_head = models_->inter_head(m);
    Tensor z_first = intra_head.project(tape, tape.concat_rows(first_rows));
    Tensor z_second = intra_head.project(tape, tape.concat_rows(second_rows));
    intra[is_audio ? 0 : 1] = intra_loss(tape, z_first, z_second, tau);
    anchors[is_audio ? 0 : 1] = inter_head.project(tape, tape.concat_rows(anchor_rows));
  }

  Tensor inter = inter_loss(tape, anchors[0], anchors[1], tau);
  return total_loss(tape, inter, intra[0], intra[1], cfg_.weights);
}

StepMetrics Trainer::train_step(const Batch& batch) {
  for (Parameter* p : all_params_) p->tensor.zero_grad();
  Tape tape;
  LossOutput loss = forward_loss(tape, batch);
  tape.backward(loss.total);
  const double lr = current_lr();
  adamw_step(active_params_, lr,
             {cfg_.beta1, cfg_.beta2, cfg_.weight_decay, cfg_.adam_eps});
  StepMetrics metrics;
  metrics.step = step_;
  metrics.epoch = epoch_;
  metrics.lr = lr;
  metrics.loss_total = loss.total.item();
  metrics.loss_inter = loss.inter;
  metrics.loss_intra_audio = loss.intra_audio;
  metrics.loss_intra_visual = loss.intra_visual;
  step_ += 1;
  return metrics;
}

double Trainer::current_lr() const {
  return cosine_lr(step_, total_steps_, warmup_steps_, cfg_.init_lr, cfg_.peak_lr);
}

void Trainer::run(const std::function<void(const StepMetrics&)>& on_step,
                  const std::string& checkpoint_dir) {
  std::vector<std::size_t> order(data_->items.size());
  while (epoch_ < cfg_.epochs) {
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng_.shuffle(order.begin(), order.end());
    for (std::uint64_t s = 0; s < steps_per_epoch_; ++s) {
      const std::size_t base = static_cast<std::size_t>(s) * cfg_.batch_size;
      Batch batch = assemble_batch({order.data() + base, cfg_.batch_size});
      StepMetrics m = train_step(batch);
      if (on_step) on_step(m);
    }
    epoch_ += 1;
    if (!checkpoint_dir.empty() && cfg_.checkpoint_every_epochs > 0 &&
        epoch_ % cfg_.checkpoint_every_epochs == 0 && epoch_ < cfg_.epochs) {
      save_checkpoint(make_checkpoint(), checkpoint_dir + "/checkpoint_epoch_" +
                                             std::to_string(epoch_) + ".avec");
    }
  }
  if (!checkpoint_dir.empty()) {
    save_checkpoint(make_checkpoint(), checkpoint_dir + "/checkpoint_final.avec");
  }
}

Checkpoint Trainer::make_checkpoint() const {
  Checkpoint ckpt;
  ckpt.config = cfg_;
  ckpt.epoch = epoch_;
  ckpt.step = step_;
  for (const Parameter* p : all_params_) {
    Checkpoint::Entry e;
    e.name = p->name;
    e.shape = p->tensor.shape();
    e.step = p->step;
    e.values.assign(p->tensor.values().begin(), p->tensor.values().end());
    e.m = p->m;
    e.v = p->v;
    ckpt.params.push_back(std::move(e));
  }
  ckpt.rng_states["shuffle"] = shuffle_rng_.state();
  ckpt.rng_states["sampler.audio"] = audio_sampler_.rng_state();
  ckpt.rng_states["sampler.visual"] = visual_sampler_.rng_state();
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  restore_parameters(*models_, ckpt);
  shuffle_rng_.set_state(ckpt.rng_states.at("shuffle"));
  audio_sampler_.set_rng_state(ckpt.rng_states.at("sampler.audio"));
  visual_sampler_.set_rng_state(ckpt.rng_states.at("sampler.visual"));
  epoch_ = ckpt.epoch;
  step_ = ckpt.step;
}

}  // namespace avec
