#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "avec/dataset.hpp"

using namespace avec;

namespace {

SyntheticPairConfig tiny_config() {
  SyntheticPairConfig cfg;
  cfg.classes = 8;
  cfg.samples_per_class = 4;
  cfg.noise_std = 0.1;
  cfg.seed = 77;
  return cfg;
}

std::size_t nearest_template(const Tensor& item, const std::vector<Tensor>& templates) {
  std::size_t best = 0;
  double best_d = 1e300;
  for (std::size_t k = 0; k < templates.size(); ++k) {
    double d = 0;
    for (std::size_t i = 0; i < item.size(); ++i) {
      const double c = item[i] - templates[k][i];
      d += c * c;
    }
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("identical seeds produce identical datasets") {
  const PairedDataset a = generate_synthetic_pairs(tiny_config());
  const PairedDataset b = generate_synthetic_pairs(tiny_config());
  REQUIRE(a.items.size() == b.items.size());
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    CHECK(a.items[i].label == b.items[i].label);
    for (std::size_t j = 0; j < a.items[i].audio.size(); ++j) {
      CHECK(a.items[i].audio[j] == b.items[i].audio[j]);
    }
    for (std::size_t j = 0; j < a.items[i].visual.size(); ++j) {
      CHECK(a.items[i].visual[j] == b.items[i].visual[j]);
    }
  }
}

TEST_CASE("zero noise collapses items onto their class templates") {
  SyntheticPairConfig cfg = tiny_config();
  cfg.noise_std = 0.0;
  const PairedDataset ds = generate_synthetic_pairs(cfg);
  for (const PairedItem& item : ds.items) {
    for (std::size_t j = 0; j < item.audio.size(); ++j) {
      CHECK(item.audio[j] == ds.audio_templates[item.label][j]);
    }
    for (std::size_t j = 0; j < item.visual.size(); ++j) {
      CHECK(item.visual[j] == ds.visual_templates[item.label][j]);
    }
  }
}

TEST_CASE("a nearest-template classifier is perfect at the default noise level") {
  const PairedDataset ds = generate_synthetic_pairs(tiny_config());
  for (const PairedItem& item : ds.items) {
    CHECK(nearest_template(item.audio, ds.audio_templates) == item.label);
    CHECK(nearest_template(item.visual, ds.visual_templates) == item.label);
  }
}

TEST_CASE("held-out noise keeps templates but changes items") {
  SyntheticPairConfig cfg = tiny_config();
  const PairedDataset train = generate_synthetic_pairs(cfg);
  cfg.noise_seed = 999;
  const PairedDataset eval = generate_synthetic_pairs(cfg);
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    for (std::size_t j = 0; j < train.audio_templates[k].size(); ++j) {
      CHECK(train.audio_templates[k][j] == eval.audio_templates[k][j]);
    }
  }
  bool any_diff = false;
  for (std::size_t j = 0; j < train.items[0].audio.size(); ++j) {
    any_diff = any_diff || train.items[0].audio[j] != eval.items[0].audio[j];
  }
  CHECK(any_diff);
  // Held-out items still classify to the shared templates.
  for (const PairedItem& item : eval.items) {
    CHECK(nearest_template(item.audio, train.audio_templates) == item.label);
  }
}

TEST_CASE("degenerate dataset configs are rejected") {
  SyntheticPairConfig cfg = tiny_config();
  cfg.classes = 1;
  CHECK_THROWS_AS(generate_synthetic_pairs(cfg), std::invalid_argument);
  cfg = tiny_config();
  cfg.samples_per_class = 0;
  CHECK_THROWS_AS(generate_synthetic_pairs(cfg), std::invalid_argument);
  cfg = tiny_config();
  cfg.noise_std = -0.1;
  CHECK_THROWS_AS(generate_synthetic_pairs(cfg), std::invalid_argument);
}
