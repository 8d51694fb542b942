#pragma once

#include <cstdint>
#include <string>

#include "avec/losses.hpp"
#include "avec/model.hpp"

namespace avec {

/// Which embedding anchors the cross-modal loss: the original input's
/// embedding, the augmented input's, a single predicted equivariant
/// representation, or the centroid of `centroid_samples` of them.
enum class InterAnchor { original, augmented, equivariant, centroid };

/// Within-modality objective: align the predicted equivariant representation
/// with the augmented view, or align two independently augmented views.
enum class IntraMode { equivariant, invariant };

std::string inter_anchor_name(InterAnchor a);
InterAnchor inter_anchor_from_name(const std::string& s);
std::string intra_mode_name(IntraMode m);
IntraMode intra_mode_from_name(const std::string& s);

/// Full experiment description. Serializes losslessly to a flat JSON document;
/// unknown keys are rejected on parse.
struct TrainConfig {
  std::uint64_t seed = 42;
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  std::size_t centroid_samples = 16;
  double temperature = 0.07;
  LossWeights weights;

  double peak_lr = 1e-4;
  double init_lr = 1e-6;
  std::size_t warmup_epochs = 2;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;

  InterAnchor inter_anchor = InterAnchor::centroid;
  IntraMode intra_mode = IntraMode::equivariant;

  ModelConfig model;

  std::size_t dataset_classes = 8;
  std::size_t dataset_samples_per_class = 64;
  double dataset_noise_std = 0.1;

  std::size_t checkpoint_every_epochs = 0;  // 0 = final checkpoint only
  std::size_t workers = 1;  // >1 applies augmentations on a thread pool

  void validate() const;
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& json_text);
TrainConfig load_train_config(const std::string& path);  // throws on I/O failure

}  // namespace avec
