#include "avec/dataset.hpp"

#include <stdexcept>

#include "avec/random.hpp"

namespace avec {

PairedDataset generate_synthetic_pairs(const SyntheticPairConfig& cfg) {
  if (cfg.classes < 2) {
    throw std::invalid_argument("synthetic pairs: need at least two classes");
  }
  if (cfg.samples_per_class == 0 || cfg.noise_std < 0.0) {
    throw std::invalid_argument("synthetic pairs: bad sample count or noise level");
  }
  Rng template_rng(derive_seed(cfg.seed, "dataset.templates"));
  Rng noise_rng(derive_seed(cfg.noise_seed ? cfg.noise_seed : cfg.seed, "dataset.noise"));
  PairedDataset ds;
  ds.audio_templates.reserve(cfg.classes);
  ds.visual_templates.reserve(cfg.classes);
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    Tensor at({cfg.audio_time, cfg.audio_freq});
    for (double& v : at.values_mut()) v = template_rng.normal();
    ds.audio_templates.push_back(std::move(at));
    // Image templates stay inside a mid-range band so multiplicative jitter
    // keeps values in a sane range.
    Tensor vt({cfg.image_size, cfg.image_size, 3});
    for (double& v : vt.values_mut()) v = template_rng.uniform(0.2, 0.8);
    ds.visual_templates.push_back(std::move(vt));
  }
  ds.items.reserve(cfg.classes * cfg.samples_per_class);
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
      PairedItem item;
      item.label = k;
      item.audio = Tensor(ds.audio_templates[k].shape());
      for (std::size_t i = 0; i < item.audio.size(); ++i) {
        item.audio.mut(i) = ds.audio_templates[k][i] + noise_rng.normal(0.0, cfg.noise_std);
      }
      item.visual = Tensor(ds.visual_templates[k].shape());
      for (std::size_t i = 0; i < item.visual.size(); ++i) {
        item.visual.mut(i) = ds.visual_templates[k][i] + noise_rng.normal(0.0, cfg.noise_std);
      }
      ds.items.push_back(std::move(item));
    }
  }
  return ds;
}

}  // namespace avec
