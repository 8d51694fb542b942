#pragma once

#include <cstdint>
#include <vector>

#include "avec/augment.hpp"
#include "avec/tensor.hpp"

namespace avec {

/// Synthetic paired audio-visual data: one random template per class and
/// modality, items are template + independent noise, so paired samples share
/// a class identity that can be learned.
struct SyntheticPairConfig {
  std::size_t classes = 8;
  std::size_t samples_per_class = 64;
  double noise_std = 0.1;
  std::uint64_t seed = 42;
  /// Separate stream for the per-item noise. With the same `seed` but a
  /// different `noise_seed`, the generator yields held-out items from the
  /// same class distribution (identical templates, fresh noise) for
  /// evaluation galleries. 0 derives the stream from `seed`.
  std::uint64_t noise_seed = 0;
  std::size_t audio_time = 64;
  std::size_t audio_freq = 16;
  std::size_t image_size = 32;
};

struct PairedItem {
  std::size_t label = 0;
  Tensor audio;   // [time, freq]
  Tensor visual;  // [H, W, 3]
};

struct PairedDataset {
  std::vector<PairedItem> items;  // class-major order; shuffling is the trainer's job
  std::vector<Tensor> audio_templates;
  std::vector<Tensor> visual_templates;

  ModalityInput audio_input(std::size_t i) const {
    return {Modality::audio, items[i].audio};
  }
  ModalityInput visual_input(std::size_t i) const {
    return {Modality::visual, items[i].visual};
  }
};

PairedDataset generate_synthetic_pairs(const SyntheticPairConfig& cfg);

}  // namespace avec
