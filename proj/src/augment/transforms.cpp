#include "sarfsl/augment/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sarfsl/core/error.hpp"
#include "sarfsl/core/io.hpp"

namespace sarfsl::augment {

namespace {

void check_range(const Range& r, bool ok, const char* name, const char* rule) {
  require(ok && r.first <= r.second, ErrorKind::kParameter,
          std::string(name) + ": range (" + format_real(r.first, 6) + ", " +
              format_real(r.second, 6) + ") violates " + rule);
}

void check_probability(double p, const std::string& name) {
  require(p >= 0.0 && p <= 1.0, ErrorKind::kParameter, name + ": probability must lie in [0, 1]");
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

int reflect101(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

double AugmentationConfig::probability(const std::string& transform) const {
  auto it = apply_prob.find(transform);
  return it == apply_prob.end() ? 0.0 : it->second;
}

void AugmentationConfig::validate() const {
  require(crop_out_size >= 8, ErrorKind::kParameter, "augment: crop_out_size must be >= 8");
  check_range(crop_scale, crop_scale.first > 0.0 && crop_scale.second <= 1.0, "crop_scale",
              "0 < lo <= hi <= 1");
  check_probability(flip_prob, "flip_prob");
  check_range(clip_scale_range, clip_scale_range.first > 0.0 && clip_scale_range.second <= 1.0,
              "clip_scale_range", "0 < a <= b <= 1");
  check_range(pow_range, pow_range.first > 0.0 && pow_range.first <= 1.0 && pow_range.second >= 1.0,
              "pow_range", "0 < a <= 1 <= b");
  check_range(speckle_frac_range, speckle_frac_range.first >= 0.0 && speckle_frac_range.second <= 1.0,
              "speckle_frac_range", "0 <= a <= b <= 1");
  check_range(gauss_noise_std_range, gauss_noise_std_range.first >= 0.0, "gauss_noise_std_range",
              "0 <= a <= b");
  check_range(blur_sigma_range, blur_sigma_range.first > 0.0, "blur_sigma_range", "0 < a <= b");
  for (const auto& [name, p] : apply_prob) {
    require(name == kCrop || name == kClipAndScale || name == kPowScale || name == kSpeckle ||
                name == kGaussianNoise || name == kGaussianBlur,
            ErrorKind::kParameter, "augment: unknown transform '" + name + "'");
    check_probability(p, name);
  }
}

std::uint64_t AugmentationConfig::hash() const {
  std::ostringstream s;
  auto range = [&](const Range& r) { s << format_real(r.first) << ',' << format_real(r.second) << ';'; };
  s << crop_out_size << ';';
  range(crop_scale);
  s << format_real(flip_prob) << ';';
  range(clip_scale_range);
  range(pow_range);
  range(speckle_frac_range);
  range(gauss_noise_std_range);
  range(blur_sigma_range);
  for (const auto& [name, p] : apply_prob) s << name << '=' << format_real(p) << ';';
  return fnv1a(s.str());
}

Json to_json(const AugmentationConfig& cfg) {
  return Json{{"crop_out_size", cfg.crop_out_size},
              {"crop_scale", cfg.crop_scale},
              {"flip_prob", cfg.flip_prob},
              {"clip_scale_range", cfg.clip_scale_range},
              {"pow_range", cfg.pow_range},
              {"speckle_frac_range", cfg.speckle_frac_range},
              {"gauss_noise_std_range", cfg.gauss_noise_std_range},
              {"blur_sigma_range", cfg.blur_sigma_range},
              {"apply_prob", cfg.apply_prob}};
}

AugmentationConfig augmentation_config_from_json(const Json& j, const std::string& path) {
  AugmentationConfig cfg;
  JsonReader r(j, path);
  r.get("crop_out_size", cfg.crop_out_size);
  r.get("crop_scale", cfg.crop_scale);
  r.get("flip_prob", cfg.flip_prob);
  r.get("clip_scale_range", cfg.clip_scale_range);
  r.get("pow_range", cfg.pow_range);
  r.get("speckle_frac_range", cfg.speckle_frac_range);
  r.get("gauss_noise_std_range", cfg.gauss_noise_std_range);
  r.get("blur_sigma_range", cfg.blur_sigma_range);
  r.get("apply_prob", cfg.apply_prob);
  r.finish();
  return cfg;
}

// ---------------------------------------------------------------------------

Chip clip_and_scale_with(const Chip& chip, double max_val) {
  require(max_val > 0.0, ErrorKind::kParameter, "clip_and_scale: max_val must be positive");
  Chip out = chip;
  for (float& v : out.pixels) {
    v = static_cast<float>(std::clamp(static_cast<double>(v), 0.0, max_val) / max_val);
  }
  return out;
}

Chip clip_and_scale(const Chip& chip, double a, double b, Rng& rng) {
  check_range({a, b}, a > 0.0 && b <= 1.0, "clip_and_scale", "0 < a <= b <= 1");
  return clip_and_scale_with(chip, rng.uniform(a, b));
}

Chip pow_scale_with(const Chip& chip, double exponent) {
  require(exponent > 0.0, ErrorKind::kParameter, "pow_scale: exponent must be positive");
  Chip out = chip;
  if (exponent == 1.0) return out;
  for (float& v : out.pixels) v = clamp01(std::pow(static_cast<double>(v), exponent));
  return out;
}

Chip pow_scale(const Chip& chip, double a, double b, Rng& rng) {
  check_range({a, b}, a > 0.0 && a <= 1.0 && b >= 1.0, "pow_scale", "0 < a <= 1 <= b");
  const bool low = rng.bernoulli(0.5);
  const double val = low ? rng.uniform(a, 1.0) : rng.uniform(1.0, b);
  return pow_scale_with(chip, val);
}

Chip speckle_noise_with(const Chip& chip, double fraction, Rng& rng) {
  require(fraction >= 0.0 && fraction <= 1.0, ErrorKind::kParameter,
          "speckle_noise: fraction must lie in [0, 1]");
  Chip out = chip;
  const auto count = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(chip.size())));
  if (count == 0) return out;
  for (std::size_t idx : sample_without_replacement(chip.size(), count, rng)) {
    out.pixels[idx] = clamp01(rng.uniform());
  }
  return out;
}

Chip speckle_noise(const Chip& chip, double a, double b, Rng& rng) {
  check_range({a, b}, a >= 0.0 && b <= 1.0, "speckle_noise", "0 <= a <= b <= 1");
  return speckle_noise_with(chip, rng.uniform(a, b), rng);
}

Chip gaussian_noise_with(const Chip& chip, double stddev, Rng& rng) {
  require(stddev >= 0.0, ErrorKind::kParameter, "gaussian_noise: stddev must be >= 0");
  Chip out = chip;
  if (stddev == 0.0) return out;
  for (float& v : out.pixels) v = clamp01(static_cast<double>(v) + rng.normal(0.0, stddev));
  return out;
}

Chip gaussian_noise(const Chip& chip, double a, double b, Rng& rng) {
  check_range({a, b}, a >= 0.0, "gaussian_noise", "0 <= a <= b");
  return gaussian_noise_with(chip, rng.uniform(a, b), rng);
}

std::vector<double> gaussian_kernel(double sigma) {
  require(sigma > 0.0, ErrorKind::kParameter, "gaussian_blur: sigma must be positive");
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * half + 1));
  double total = 0.0;
  for (int k = -half; k <= half; ++k) {
    const double w = std::exp(-0.5 * (k * k) / (sigma * sigma));
    taps[static_cast<std::size_t>(k + half)] = w;
    total += w;
  }
  for (double& w : taps) w /= total;
  return taps;
}

Chip gaussian_blur(const Chip& chip, double sigma) {
  const std::vector<double> taps = gaussian_kernel(sigma);
  const int half = static_cast<int>(taps.size() / 2);
  const int h = chip.height;
  const int w = chip.width;
  std::vector<double> tmp(chip.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) {
        acc += taps[static_cast<std::size_t>(k + half)] * chip.at(y, reflect101(x + k, w));
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  Chip out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) {
        acc += taps[static_cast<std::size_t>(k + half)] *
               tmp[static_cast<std::size_t>(reflect101(y + k, h)) * w + x];
      }
      out.at(y, x) = clamp01(acc);
    }
  }
  return out;
}

Chip resized_crop_with(const Chip& chip, double top, double left, double side, int out_size) {
  require(out_size >= 1 && side > 0.0, ErrorKind::kParameter, "resized_crop: invalid window");
  Chip out(out_size, out_size);
  const double step = side / out_size;
  const int h = chip.height;
  const int w = chip.width;
  for (int i = 0; i < out_size; ++i) {
    const double y = std::clamp(top + (i + 0.5) * step - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int y1 = std::min(y0 + 1, h - 1);
    const float fy = static_cast<float>(y - y0);
    for (int j = 0; j < out_size; ++j) {
      const double x = std::clamp(left + (j + 0.5) * step - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(std::floor(x));
      const int x1 = std::min(x0 + 1, w - 1);
      const float fx = static_cast<float>(x - x0);
      // std::lerp is bounded by its endpoints, so the result stays inside the
      // input's value range.
      const float upper = std::lerp(chip.at(y0, x0), chip.at(y0, x1), fx);
      const float lower = std::lerp(chip.at(y1, x0), chip.at(y1, x1), fx);
      out.at(i, j) = std::lerp(upper, lower, fy);
    }
  }
  return out;
}

Chip random_resized_crop(const Chip& chip, int out_size, Range scale, Rng& rng) {
  require(out_size >= 8, ErrorKind::kParameter, "random_resized_crop: out_size must be >= 8");
  check_range(scale, scale.first > 0.0 && scale.second <= 1.0, "random_resized_crop",
              "0 < lo <= hi <= 1");
  const double area = rng.uniform(scale.first, scale.second) * chip.height * chip.width;
  const double side = std::min({std::sqrt(area), static_cast<double>(chip.height),
                                static_cast<double>(chip.width)});
  const double top = rng.uniform(0.0, chip.height - side);
  const double left = rng.uniform(0.0, chip.width - side);
  return resized_crop_with(chip, top, left, side, out_size);
}

Chip flip_columns(const Chip& chip) {
  Chip out = chip;
  for (int y = 0; y < chip.height; ++y) {
    auto row = out.pixels.begin() + static_cast<std::ptrdiff_t>(y) * chip.width;
    std::reverse(row, row + chip.width);
  }
  return out;
}

Chip random_horizontal_flip(const Chip& chip, double p, Rng& rng) {
  check_probability(p, "random_horizontal_flip");
  return rng.bernoulli(p) ? flip_columns(chip) : chip;
}

// ---------------------------------------------------------------------------

Chip make_view(const Chip& chip, const AugmentationConfig& cfg, Rng& rng) {
  Chip v;
  if (rng.bernoulli(cfg.probability(kCrop))) {
    v = random_resized_crop(chip, cfg.crop_out_size, cfg.crop_scale, rng);
  } else if (chip.height == cfg.crop_out_size && chip.width == cfg.crop_out_size) {
    v = chip;
  } else {
    const double side = std::min(chip.height, chip.width);
    v = resized_crop_with(chip, 0.5 * (chip.height - side), 0.5 * (chip.width - side), side,
                          cfg.crop_out_size);
  }
  v = random_horizontal_flip(v, cfg.flip_prob, rng);
  if (rng.bernoulli(cfg.probability(kClipAndScale))) {
    v = clip_and_scale(v, cfg.clip_scale_range.first, cfg.clip_scale_range.second, rng);
  }
  if (rng.bernoulli(cfg.probability(kPowScale))) {
    v = pow_scale(v, cfg.pow_range.first, cfg.pow_range.second, rng);
  }
  if (rng.bernoulli(cfg.probability(kSpeckle))) {
    v = speckle_noise(v, cfg.speckle_frac_range.first, cfg.speckle_frac_range.second, rng);
  }
  if (rng.bernoulli(cfg.probability(kGaussianNoise))) {
    v = gaussian_noise(v, cfg.gauss_noise_std_range.first, cfg.gauss_noise_std_range.second, rng);
  }
  if (rng.bernoulli(cfg.probability(kGaussianBlur))) {
    v = gaussian_blur(v, rng.uniform(cfg.blur_sigma_range.first, cfg.blur_sigma_range.second));
  }
  return v;
}

ViewPair make_view_pair(const Chip& chip, const AugmentationConfig& cfg, Rng& rng) {
  Rng rng_a = rng.fork();
  Rng rng_b = rng.fork();
  return {make_view(chip, cfg, rng_a), make_view(chip, cfg, rng_b)};
}

Chip stage2_augment(const Chip& chip, double noise_std, double flip_prob, Rng& rng) {
  return random_horizontal_flip(gaussian_noise_with(chip, noise_std, rng), flip_prob, rng);
}

}  // namespace sarfsl::augment
