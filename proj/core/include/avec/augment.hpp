#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avec/random.hpp"
#include "avec/tensor.hpp"

namespace avec {

enum class Modality { audio, visual };

std::string modality_name(Modality m);
Modality modality_from_name(const std::string& name);

/// One sample of one modality. Audio is a [time, freq] spectrogram treated as
/// a one-channel image; visual is a channel-last [H, W, 3] frame.
struct ModalityInput {
  Modality modality;
  Tensor data;
};

void validate_modality_input(const ModalityInput& input);

/// Inclusive-exclusive crop rectangle: x/w index the column (last) axis,
/// y/h the row axis.
struct CropRect {
  std::size_t x = 0, y = 0, w = 0, h = 0;
};

/// Full record of one sampled augmentation. The crop is always applied; every
/// other transform carries an applied flag. Unapplied transforms keep their
/// identity parameters, so a sampled record is always fully populated.
/// `rows`/`cols` record the canonical input extent used for normalization.
struct AugmentationSpec {
  Modality modality = Modality::visual;
  std::size_t rows = 0, cols = 0;

  CropRect crop;

  bool jitter_applied = false;
  // visual: {brightness, contrast, saturation} factors + additive hue shift;
  // audio: {brightness, contrast} factors. Identity = 1 (hue: 0).
  std::vector<double> jitter_factors;
  std::vector<int> jitter_order;  // permutation; default <0,1,2,3> / <0,1>

  bool blur_applied = false;
  double blur_sigma = 0.0;

  bool hflip = false;

  bool grayscale = false;  // visual only

  bool time_shift_applied = false;  // audio only
  std::int64_t time_shift = 0;      // circular shift along the time axis

  bool specaug_applied = false;  // audio only
  std::size_t time_mask_begin = 0, time_mask_end = 0;
  std::size_t freq_mask_begin = 0, freq_mask_end = 0;
  double mask_value = 0.0;
};

/// Spec that reproduces the input bit-for-bit when applied.
AugmentationSpec identity_spec(Modality m, std::size_t rows, std::size_t cols);

void validate_spec(const AugmentationSpec& spec);

inline constexpr std::size_t kAudioVectorDim = 24;
inline constexpr std::size_t kVisualVectorDim = 18;

/// Fixed-length real encoding of an AugmentationSpec (24 audio / 18 visual).
struct AugmentationVector {
  Modality modality = Modality::visual;
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }
};

std::size_t augmentation_dim(Modality m);

/// Deterministic fixed-layout encoding. Crop coordinates are normalized by
/// the input extent (full-frame crop encodes as <0,0,0,0>), jitter factors as
/// deviations from identity, the time shift by the time-axis length, and mask
/// endpoints by their axis lengths. Binary transforms (hflip, grayscale) use
/// their value as their own applied flag; trailing positions up to the fixed
/// dimension are reserved zeros.
///
/// audio  (24): 0-3 crop | 4 jitter flag | 5-6 brightness/contrast - 1 |
///              7-8 jitter order | 9 blur flag | 10 sigma | 11 hflip |
///              12 shift flag | 13 shift/T | 14 mask flag |
///              15-18 t0/T t1/T f0/F f1/F | 19-23 reserved
/// visual (18): 0-3 crop | 4 jitter flag | 5-8 b/c/s - 1, hue |
///              9-12 jitter order | 13 blur flag | 14 sigma | 15 hflip |
///              16 grayscale | 17 reserved
AugmentationVector parameterize(const AugmentationSpec& spec);

/// Encoding of the identity spec; constant per modality.
AugmentationVector default_vector(Modality m);

/// Applies every transform of the spec in the fixed order
/// crop -> jitter -> blur -> flip -> grayscale/time-shift -> spectrogram
/// masking. Output keeps the canonical input shape (the crop is resized
/// back with bilinear interpolation).
ModalityInput apply(const AugmentationSpec& spec, const ModalityInput& input);

/// Application probabilities and parameter ranges. The random resized crop is
/// always applied.
struct SamplerConfig {
  double p_jitter = 0.8;
  double p_blur = 0.5;
  double p_hflip = 0.5;
  double p_grayscale = 0.2;   // visual only
  double p_time_shift = 0.5;  // audio only
  double p_specaug = 0.5;     // audio only

  double crop_min_fraction = 0.6;  // lower bound on w/W and h/H
  double jitter_strength = 0.4;    // factors drawn from [1-s, 1+s]
  double hue_max = 0.1;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 1.5;
  double time_shift_max_fraction = 0.25;
  double mask_max_fraction = 0.3;
  double mask_value = 0.0;
};

/// Owns one RNG stream; draws are deterministic in (seed, draw index).
class AugmentationSampler {
 public:
  AugmentationSampler(Modality modality, std::size_t rows, std::size_t cols,
                      SamplerConfig config, std::uint64_t seed);

  AugmentationSpec sample_spec();
  AugmentationVector sample_vector() { return parameterize(sample_spec()); }

  Modality modality() const { return modality_; }
  const SamplerConfig& config() const { return config_; }
  std::string rng_state() const { return rng_.state(); }
  void set_rng_state(const std::string& s) { rng_.set_state(s); }

 private:
  Modality modality_;
  std::size_t rows_, cols_;
  SamplerConfig config_;
  Rng rng_;
};

}  // namespace avec
