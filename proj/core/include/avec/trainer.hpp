#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "avec/augment.hpp"
#include "avec/checkpoint.hpp"
#include "avec/config.hpp"
#include "avec/dataset.hpp"
#include "avec/losses.hpp"
#include "avec/model.hpp"

namespace avec {

/// One assembled training batch. The cross-modal anchor path reads only the
/// un-augmented `audio`/`visual` streams; augmented views exist solely for
/// the within-modality objective. All streams are index-aligned.
struct Batch {
  std::vector<std::size_t> indices;
  std::vector<Tensor> audio, visual;            // originals
  std::vector<Tensor> audio_aug, visual_aug;    // one augmented view per item
  std::vector<Tensor> audio_aug2, visual_aug2;  // second views (invariant mode only)
  std::vector<AugmentationVector> audio_t, visual_t;  // encodings of the views above
  std::vector<std::vector<AugmentationVector>> audio_anchor_t, visual_anchor_t;

  std::size_t size() const { return indices.size(); }
};

struct StepMetrics {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_inter = 0.0;
  double loss_intra_audio = 0.0;
  double loss_intra_visual = 0.0;
};

/// Owns the training loop state: augmentation samplers, shuffling stream,
/// step/epoch counters and the set of parameters the optimizer may touch.
/// Identical (seed, config) pairs reproduce loss traces bitwise; resuming
/// from a checkpoint continues the exact same trace.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, ModelSet* models, const PairedDataset* data);

  /// Samples augmentations (fixed per-item draw order: audio view, [second
  /// audio view], visual view, [second visual view], audio anchor vectors,
  /// visual anchor vectors), applies them and packs the batch.
  Batch assemble_batch(std::span<const std::size_t> indices);

  /// Forward pass only; records onto the caller's tape. Pure given the batch.
  LossOutput forward_loss(Tape& tape, const Batch& batch) const;

  /// Forward, backward, scheduled AdamW update on the active parameter set.
  StepMetrics train_step(const Batch& batch);

  /// Runs the remaining epochs over shuffled batches (incomplete batches are
  /// dropped), invoking `on_step` after every step. If `checkpoint_dir` is
  /// non-empty, saves per the config cadence plus a final checkpoint.
  void run(const std::function<void(const StepMetrics&)>& on_step,
           const std::string& checkpoint_dir = "");

  Checkpoint make_checkpoint() const;
  void restore(const Checkpoint& ckpt);

  const TrainConfig& config() const { return cfg_; }
  std::uint64_t global_step() const { return step_; }
  std::uint64_t epoch() const { return epoch_; }
  std::uint64_t steps_per_epoch() const { return steps_per_epoch_; }
  std::uint64_t total_steps() const { return total_steps_; }
  double current_lr() const;

  /// Parameters reachable from the configured objective; weight-zero paths
  /// leave their exclusive parameters out so the optimizer never touches them.
  const std::vector<Parameter*>& active_parameters() const { return active_params_; }

 private:
  std::size_t anchor_vector_count() const;

  TrainConfig cfg_;
  ModelSet* models_;
  const PairedDataset* data_;
  std::vector<Parameter*> all_params_;
  std::vector<Parameter*> active_params_;
  AugmentationSampler audio_sampler_, visual_sampler_;
  Rng shuffle_rng_;
  std::uint64_t step_ = 0;
  std::uint64_t epoch_ = 0;
  std::uint64_t steps_per_epoch_ = 0, total_steps_ = 0, warmup_steps_ = 0;
};

/// Active-parameter rule, exposed for tests: encoders participate when any
/// loss that reads them has positive weight, projection heads follow their
/// scope's weight, and a modality's predictor participates when either the
/// equivariant intra path or a predictor-based anchor is in use.
bool parameter_is_active(const std::string& name, const TrainConfig& cfg);

}  // namespace avec
