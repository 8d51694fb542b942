#include "avec/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace avec {

namespace {

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

std::size_t jitter_count(Modality m) { return m == Modality::audio ? 2 : 4; }

}  // namespace

std::string modality_name(Modality m) {
  return m == Modality::audio ? "audio" : "visual";
}

Modality modality_from_name(const std::string& name) {
  if (name == "audio") return Modality::audio;
  if (name == "visual") return Modality::visual;
  throw std::invalid_argument("unknown modality: " + name);
}

void validate_modality_input(const ModalityInput& input) {
  const auto& shape = input.data.shape();
  if (input.modality == Modality::audio) {
    if (shape.size() != 2) {
      throw std::invalid_argument("audio input must be rank-2 [time, freq], got " +
                                  shape_str(shape));
    }
  } else {
    if (shape.size() != 3 || shape[2] != 3) {
      throw std::invalid_argument("visual input must be [H, W, 3], got " +
                                  shape_str(shape));
    }
  }
}

AugmentationSpec identity_spec(Modality m, std::size_t rows, std::size_t cols) {
  AugmentationSpec spec;
  spec.modality = m;
  spec.rows = rows;
  spec.cols = cols;
  spec.crop = {0, 0, cols, rows};
  const std::size_t nj = jitter_count(m);
  spec.jitter_factors.assign(nj, 1.0);
  if (m == Modality::visual) spec.jitter_factors[3] = 0.0;  // hue shift is additive
  spec.jitter_order.resize(nj);
  std::iota(spec.jitter_order.begin(), spec.jitter_order.end(), 0);
  return spec;
}

void validate_spec(const AugmentationSpec& spec) {
  if (spec.rows == 0 || spec.cols == 0) {
    throw std::invalid_argument("augmentation spec: zero input extent");
  }
  const CropRect& c = spec.crop;
  if (c.w == 0 || c.h == 0 || c.x + c.w > spec.cols || c.y + c.h > spec.rows) {
    throw std::invalid_argument("augmentation spec: crop outside input bounds");
  }
  const std::size_t nj = jitter_count(spec.modality);
  if (spec.jitter_factors.size() != nj || spec.jitter_order.size() != nj) {
    throw std::invalid_argument("augmentation spec: jitter record has wrong arity");
  }
  std::vector<int> sorted = spec.jitter_order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < nj; ++i) {
    if (sorted[i] != static_cast<int>(i)) {
      throw std::invalid_argument("augmentation spec: jitter order is not a permutation");
    }
  }
  if (spec.modality == Modality::audio) {
    if (spec.time_mask_begin > spec.time_mask_end || spec.time_mask_end > spec.rows ||
        spec.freq_mask_begin > spec.freq_mask_end || spec.freq_mask_end > spec.cols) {
      throw std::invalid_argument("augmentation spec: mask interval outside bounds");
    }
  } else if (spec.time_shift_applied || spec.specaug_applied) {
    throw std::invalid_argument("augmentation spec: audio-only transform on visual spec");
  }
}

std::size_t augmentation_dim(Modality m) {
  return m == Modality::audio ? kAudioVectorDim : kVisualVectorDim;
}

AugmentationVector parameterize(const AugmentationSpec& spec) {
  validate_spec(spec);
  const double W = static_cast<double>(spec.cols);
  const double H = static_cast<double>(spec.rows);
  AugmentationVector vec;
  vec.modality = spec.modality;
  vec.values.assign(augmentation_dim(spec.modality), 0.0);
  auto& v = vec.values;

  v[0] = static_cast<double>(spec.crop.x) / W;
  v[1] = static_cast<double>(spec.crop.y) / H;
  v[2] = 1.0 - static_cast<double>(spec.crop.w) / W;
  v[3] = 1.0 - static_cast<double>(spec.crop.h) / H;
  v[4] = spec.jitter_applied ? 1.0 : 0.0;

  if (spec.modality == Modality::audio) {
    v[5] = spec.jitter_factors[0] - 1.0;
    v[6] = spec.jitter_factors[1] - 1.0;
    v[7] = spec.jitter_order[0];
    v[8] = spec.jitter_order[1];
    v[9] = spec.blur_applied ? 1.0 : 0.0;
    v[10] = spec.blur_sigma;
    v[11] = spec.hflip ? 1.0 : 0.0;
    v[12] = spec.time_shift_applied ? 1.0 : 0.0;
    v[13] = static_cast<double>(spec.time_shift) / H;
    v[14] = spec.specaug_applied ? 1.0 : 0.0;
    v[15] = static_cast<double>(spec.time_mask_begin) / H;
    v[16] = static_cast<double>(spec.time_mask_end) / H;
    v[17] = static_cast<double>(spec.freq_mask_begin) / W;
    v[18] = static_cast<double>(spec.freq_mask_end) / W;
    // 19..23 reserved
  } else {
    v[5] = spec.jitter_factors[0] - 1.0;
    v[6] = spec.jitter_factors[1] - 1.0;
    v[7] = spec.jitter_factors[2] - 1.0;
    v[8] = spec.jitter_factors[3];  // hue shift, already centered at 0
    v[9] = spec.jitter_order[0];
    v[10] = spec.jitter_order[1];
    v[11] = spec.jitter_order[2];
    v[12] = spec.jitter_order[3];
    v[13] = spec.blur_applied ? 1.0 : 0.0;
    v[14] = spec.blur_sigma;
    v[15] = spec.hflip ? 1.0 : 0.0;
    v[16] = spec.grayscale ? 1.0 : 0.0;
    // 17 reserved
  }
  return vec;
}

AugmentationVector default_vector(Modality m) {
  // The normalized encoding is extent-free for the identity spec, so any
  // extent yields the same constant.
  return parameterize(identity_spec(m, 8, 8));
}

namespace {

struct Image {
  std::size_t rows, cols, ch;
  std::vector<double> v;

  double& at(std::size_t r, std::size_t c, std::size_t k) {
    return v[(r * cols + c) * ch + k];
  }
  double at(std::size_t r, std::size_t c, std::size_t k) const {
    return v[(r * cols + c) * ch + k];
  }
};

Image to_image(const ModalityInput& input) {
  const auto& s = input.data.shape();
  Image img;
  if (input.modality == Modality::audio) {
    img.rows = s[0];
    img.cols = s[1];
    img.ch = 1;
  } else {
    img.rows = s[0];
    img.cols = s[1];
    img.ch = 3;
  }
  img.v.assign(input.data.values().begin(), input.data.values().end());
  return img;
}

double luma(const Image& img, std::size_t r, std::size_t c) {
  if (img.ch == 1) return img.at(r, c, 0);
  return kLumaR * img.at(r, c, 0) + kLumaG * img.at(r, c, 1) + kLumaB * img.at(r, c, 2);
}

// Bilinear crop-and-resize back to the full extent. The mapping aligns
// corners, so a full-frame crop reproduces the input exactly.
Image crop_resize(const Image& src, const CropRect& crop) {
  Image out{src.rows, src.cols, src.ch, std::vector<double>(src.v.size())};
  const std::size_t H = src.rows, W = src.cols;
  for (std::size_t r = 0; r < H; ++r) {
    const double sy = (H > 1 && crop.h > 1)
                          ? static_cast<double>(r) * static_cast<double>(crop.h - 1) /
                                static_cast<double>(H - 1)
                          : 0.0;
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, crop.h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t c = 0; c < W; ++c) {
      const double sx = (W > 1 && crop.w > 1)
                            ? static_cast<double>(c) * static_cast<double>(crop.w - 1) /
                                  static_cast<double>(W - 1)
                            : 0.0;
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, crop.w - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t k = 0; k < src.ch; ++k) {
        const double v00 = src.at(crop.y + y0, crop.x + x0, k);
        const double v01 = src.at(crop.y + y0, crop.x + x1, k);
        const double v10 = src.at(crop.y + y1, crop.x + x0, k);
        const double v11 = src.at(crop.y + y1, crop.x + x1, k);
        const double top = (1.0 - fx) * v00 + fx * v01;
        const double bot = (1.0 - fx) * v10 + fx * v11;
        out.at(r, c, k) = (1.0 - fy) * top + fy * bot;
      }
    }
  }
  return out;
}

void apply_brightness(Image& img, double factor) {
  for (double& x : img.v) x *= factor;
}

void apply_contrast(Image& img, double factor) {
  double mean = 0.0;
  for (std::size_t r = 0; r < img.rows; ++r)
    for (std::size_t c = 0; c < img.cols; ++c) mean += luma(img, r, c);
  mean /= static_cast<double>(img.rows * img.cols);
  for (double& x : img.v) x = mean + factor * (x - mean);
}

void apply_saturation(Image& img, double factor) {
  for (std::size_t r = 0; r < img.rows; ++r)
    for (std::size_t c = 0; c < img.cols; ++c) {
      const double g = luma(img, r, c);
      for (std::size_t k = 0; k < img.ch; ++k)
        img.at(r, c, k) = g + factor * (img.at(r, c, k) - g);
    }
}

// Hue rotation in YIQ space; `shift` is a fraction of the full color circle.
void apply_hue(Image& img, double shift) {
  const double angle = 6.283185307179586477 * shift;
  const double cs = std::cos(angle), sn = std::sin(angle);
  for (std::size_t r = 0; r < img.rows; ++r)
    for (std::size_t c = 0; c < img.cols; ++c) {
      const double R = img.at(r, c, 0), G = img.at(r, c, 1), B = img.at(r, c, 2);
      const double y = 0.299 * R + 0.587 * G + 0.114 * B;
      const double i = 0.595716 * R - 0.274453 * G - 0.321263 * B;
      const double q = 0.211456 * R - 0.522591 * G + 0.311135 * B;
      const double ir = i * cs - q * sn;
      const double qr = i * sn + q * cs;
      img.at(r, c, 0) = y + 0.9563 * ir + 0.6210 * qr;
      img.at(r, c, 1) = y - 0.2721 * ir - 0.6474 * qr;
      img.at(r, c, 2) = y - 1.1070 * ir + 1.7046 * qr;
    }
}

void apply_jitter(Image& img, const AugmentationSpec& spec) {
  for (int op : spec.jitter_order) {
    switch (op) {
      case 0: apply_brightness(img, spec.jitter_factors[0]); break;
      case 1: apply_contrast(img, spec.jitter_factors[1]); break;
      case 2: apply_saturation(img, spec.jitter_factors[2]); break;
      case 3: apply_hue(img, spec.jitter_factors[3]); break;
      default: throw std::logic_error("jitter: bad op index");
    }
  }
}

// Separable Gaussian blur with edge replication.
void apply_blur(Image& img, double sigma) {
  if (sigma <= 0.0) return;
  const auto radius = static_cast<std::int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (std::int64_t i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    kernel[i + radius] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  const auto rows = static_cast<std::int64_t>(img.rows);
  const auto cols = static_cast<std::int64_t>(img.cols);
  Image tmp = img;
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c)
      for (std::size_t k = 0; k < img.ch; ++k) {
        double acc = 0.0;
        for (std::int64_t i = -radius; i <= radius; ++i) {
          const std::int64_t cc = std::clamp(c + i, std::int64_t{0}, cols - 1);
          acc += kernel[i + radius] * img.at(r, cc, k);
        }
        tmp.at(r, c, k) = acc;
      }
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c)
      for (std::size_t k = 0; k < img.ch; ++k) {
        double acc = 0.0;
        for (std::int64_t i = -radius; i <= radius; ++i) {
          const std::int64_t rr = std::clamp(r + i, std::int64_t{0}, rows - 1);
          acc += kernel[i + radius] * tmp.at(rr, c, k);
        }
        img.at(r, c, k) = acc;
      }
}

void apply_hflip(Image& img) {
  for (std::size_t r = 0; r < img.rows; ++r)
    for (std::size_t c = 0; c < img.cols / 2; ++c)
      for (std::size_t k = 0; k < img.ch; ++k)
        std::swap(img.at(r, c, k), img.at(r, img.cols - 1 - c, k));
}

void apply_grayscale(Image& img) {
  for (std::size_t r = 0; r < img.rows; ++r)
    for (std::size_t c = 0; c < img.cols; ++c) {
      const double g = luma(img, r, c);
      for (std::size_t k = 0; k < img.ch; ++k) img.at(r, c, k) = g;
    }
}

void apply_time_shift(Image& img, std::int64_t shift) {
  const auto rows = static_cast<std::int64_t>(img.rows);
  std::int64_t s = shift % rows;
  if (s < 0) s += rows;
  if (s == 0) return;
  Image tmp = img;
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::int64_t src = (r - s + rows) % rows;
    for (std::size_t c = 0; c < img.cols; ++c)
      for (std::size_t k = 0; k < img.ch; ++k) img.at(r, c, k) = tmp.at(src, c, k);
  }
}

void apply_masks(Image& img, const AugmentationSpec& spec) {
  for (std::size_t r = spec.time_mask_begin; r < spec.time_mask_end; ++r)
    for (std::size_t c = 0; c < img.cols; ++c) img.at(r, c, 0) = spec.mask_value;
  for (std::size_t c = spec.freq_mask_begin; c < spec.freq_mask_end; ++c)
    for (std::size_t r = 0; r < img.rows; ++r) img.at(r, c, 0) = spec.mask_value;
}

}  // namespace

ModalityInput apply(const AugmentationSpec& spec, const ModalityInput& input) {
  validate_modality_input(input);
  validate_spec(spec);
  if (spec.modality != input.modality) {
    throw std::invalid_argument("apply: spec/input modality mismatch");
  }
  const auto& s = input.data.shape();
  if (s[0] != spec.rows || s[1] != spec.cols) {
    throw std::invalid_argument("apply: spec extent " + std::to_string(spec.rows) + "x" +
                                std::to_string(spec.cols) + " does not match input " +
                                shape_str(s));
  }

  Image img = to_image(input);
  const bool full_frame = spec.crop.x == 0 && spec.crop.y == 0 &&
                          spec.crop.w == spec.cols && spec.crop.h == spec.rows;
  if (!full_frame) img = crop_resize(img, spec.crop);
  if (spec.jitter_applied) apply_jitter(img, spec);
  if (spec.blur_applied) apply_blur(img, spec.blur_sigma);
  if (spec.hflip) apply_hflip(img);
  if (spec.modality == Modality::visual) {
    if (spec.grayscale) apply_grayscale(img);
  } else {
    if (spec.time_shift_applied) apply_time_shift(img, spec.time_shift);
    if (spec.specaug_applied) apply_masks(img, spec);
  }

  ModalityInput out;
  out.modality = input.modality;
  out.data = Tensor(input.data.shape(), std::move(img.v));
  return out;
}

AugmentationSampler::AugmentationSampler(Modality modality, std::size_t rows,
                                         std::size_t cols, SamplerConfig config,
                                         std::uint64_t seed)
    : modality_(modality), rows_(rows), cols_(cols), config_(config), rng_(seed) {
  if (rows == 0 || cols == 0) {
    throw std::invalid_argument("sampler: zero input extent");
  }
}

AugmentationSpec AugmentationSampler::sample_spec() {
  AugmentationSpec spec = identity_spec(modality_, rows_, cols_);
  spec.mask_value = config_.mask_value;

  // Crop is always applied. Width and height fractions are drawn
  // independently; the offset is uniform over the remaining slack.
  const auto min_w = static_cast<std::int64_t>(
      std::ceil(config_.crop_min_fraction * static_cast<double>(cols_)));
  const auto min_h = static_cast<std::int64_t>(
      std::ceil(config_.crop_min_fraction * static_cast<double>(rows_)));
  const auto w = rng_.uniform_int(std::max<std::int64_t>(1, min_w),
                                  static_cast<std::int64_t>(cols_));
  const auto h = rng_.uniform_int(std::max<std::int64_t>(1, min_h),
                                  static_cast<std::int64_t>(rows_));
  const auto x = rng_.uniform_int(0, static_cast<std::int64_t>(cols_) - w);
  const auto y = rng_.uniform_int(0, static_cast<std::int64_t>(rows_) - h);
  spec.crop = {static_cast<std::size_t>(x), static_cast<std::size_t>(y),
               static_cast<std::size_t>(w), static_cast<std::size_t>(h)};

  if (rng_.bernoulli(config_.p_jitter)) {
    spec.jitter_applied = true;
    const double s = config_.jitter_strength;
    spec.jitter_factors[0] = rng_.uniform(1.0 - s, 1.0 + s);
    spec.jitter_factors[1] = rng_.uniform(1.0 - s, 1.0 + s);
    if (modality_ == Modality::visual) {
      spec.jitter_factors[2] = rng_.uniform(1.0 - s, 1.0 + s);
      spec.jitter_factors[3] = rng_.uniform(-config_.hue_max, config_.hue_max);
    }
    rng_.shuffle(spec.jitter_order.begin(), spec.jitter_order.end());
  }

  if (rng_.bernoulli(config_.p_blur)) {
    spec.blur_applied = true;
    spec.blur_sigma = rng_.uniform(config_.blur_sigma_min, config_.blur_sigma_max);
  }

  spec.hflip = rng_.bernoulli(config_.p_hflip);

  if (modality_ == Modality::visual) {
    spec.grayscale = rng_.bernoulli(config_.p_grayscale);
  } else {
    if (rng_.bernoulli(config_.p_time_shift)) {
      spec.time_shift_applied = true;
      const auto max_shift = static_cast<std::int64_t>(
          config_.time_shift_max_fraction * static_cast<double>(rows_));
      spec.time_shift = rng_.uniform_int(-max_shift, max_shift);
    }
    if (rng_.bernoulli(config_.p_specaug)) {
      spec.specaug_applied = true;
      const auto max_t = std::max<std::int64_t>(
          1, static_cast<std::int64_t>(config_.mask_max_fraction *
                                       static_cast<double>(rows_)));
      const auto tw = rng_.uniform_int(1, max_t);
      const auto t0 = rng_.uniform_int(0, static_cast<std::int64_t>(rows_) - tw);
      spec.time_mask_begin = static_cast<std::size_t>(t0);
      spec.time_mask_end = static_cast<std::size_t>(t0 + tw);
      const auto max_f = std::max<std::int64_t>(
          1, static_cast<std::int64_t>(config_.mask_max_fraction *
                                       static_cast<double>(cols_)));
      const auto fw = rng_.uniform_int(1, max_f);
      const auto f0 = rng_.uniform_int(0, static_cast<std::int64_t>(cols_) - fw);
      spec.freq_mask_begin = static_cast<std::size_t>(f0);
      spec.freq_mask_end = static_cast<std::size_t>(f0 + fw);
    }
  }
  return spec;
}

}  // namespace avec
