#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "sarfsl/core/json.hpp"
#include "sarfsl/core/rng.hpp"
#include "sarfsl/data_io/chip.hpp"

namespace sarfsl::augment {

using Range = std::pair<double, double>;

// Keys of AugmentationConfig::apply_prob.
inline constexpr const char* kCrop = "random_resized_crop";
inline constexpr const char* kClipAndScale = "clip_and_scale";
inline constexpr const char* kPowScale = "pow_scale";
inline constexpr const char* kSpeckle = "speckle_noise";
inline constexpr const char* kGaussianNoise = "gaussian_noise";
inline constexpr const char* kGaussianBlur = "gaussian_blur";

struct AugmentationConfig {
  int crop_out_size = 32;
  Range crop_scale{0.5, 1.0};
  double flip_prob = 0.5;
  Range clip_scale_range{0.5, 1.0};
  Range pow_range{0.5, 2.0};
  Range speckle_frac_range{0.0, 0.05};
  Range gauss_noise_std_range{0.0, 0.10};
  Range blur_sigma_range{0.1, 2.0};
  std::map<std::string, double> apply_prob{
      {kCrop, 1.0},          {kClipAndScale, 0.5}, {kPowScale, 0.5},
      {kSpeckle, 0.5},       {kGaussianNoise, 0.5}, {kGaussianBlur, 0.5},
  };

  double probability(const std::string& transform) const;
  void validate() const;
  /// Stable digest of every field; recorded in encoder checkpoints.
  std::uint64_t hash() const;
};

Json to_json(const AugmentationConfig& cfg);
/// apply_prob entries merge into the defaults.
AugmentationConfig augmentation_config_from_json(const Json& j, const std::string& path);

struct ViewPair {
  Chip view_a;
  Chip view_b;
};

// Random transforms. Each draws its parameter from `rng`, then delegates to
// the deterministic *_with form below.

/// max_val ~ U(a, b); out = clip(x, 0, max_val) / max_val.
Chip clip_and_scale(const Chip& chip, double a, double b, Rng& rng);
/// val ~ U(a, 1) or U(1, b) with equal odds; out = x ^ val.
Chip pow_scale(const Chip& chip, double a, double b, Rng& rng);
/// round(f * H * W) positions, f ~ U(a, b), replaced by U(0, 1) draws.
Chip speckle_noise(const Chip& chip, double a, double b, Rng& rng);
/// std ~ U(a, b); out = clip(x + N(0, std^2), 0, 1).
Chip gaussian_noise(const Chip& chip, double a, double b, Rng& rng);
/// Separable Gaussian, half-width ceil(3 sigma), reflect-101 borders.
Chip gaussian_blur(const Chip& chip, double sigma);
/// Square window of area fraction ~ U(scale) at a uniform position, bilinearly
/// resampled to out_size x out_size.
Chip random_resized_crop(const Chip& chip, int out_size, Range scale, Rng& rng);
Chip random_horizontal_flip(const Chip& chip, double p, Rng& rng);

Chip clip_and_scale_with(const Chip& chip, double max_val);
Chip pow_scale_with(const Chip& chip, double exponent);
Chip speckle_noise_with(const Chip& chip, double fraction, Rng& rng);
Chip gaussian_noise_with(const Chip& chip, double stddev, Rng& rng);
/// Window given by its top-left corner and side length, in source pixels.
Chip resized_crop_with(const Chip& chip, double top, double left, double side, int out_size);
Chip flip_columns(const Chip& chip);

/// Normalised 1-D Gaussian taps, length 2 * ceil(3 sigma) + 1.
std::vector<double> gaussian_kernel(double sigma);

/// Two views, each produced independently by: crop -> flip -> clip_and_scale
/// -> pow_scale -> speckle_noise -> gaussian_noise -> gaussian_blur, every
/// intensity transform gated by its apply probability.
ViewPair make_view_pair(const Chip& chip, const AugmentationConfig& cfg, Rng& rng);
Chip make_view(const Chip& chip, const AugmentationConfig& cfg, Rng& rng);

/// Light Stage-2 augmentation: additive noise, then horizontal flip.
Chip stage2_augment(const Chip& chip, double noise_std, double flip_prob, Rng& rng);

}  // namespace sarfsl::augment
