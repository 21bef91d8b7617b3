#pragma once

#include <cstdint>
#include <utility>

#include "sarfsl/core/json.hpp"
#include "sarfsl/data_io/chip.hpp"

namespace sarfsl {

/// Procedural stand-in for a labeled SAR chip collection. Class identity is a
/// fixed point-scatterer layout derived from `template_seed`; instances vary
/// by pose (rotation, translation), amplitude jitter, clutter and speckle.
struct SyntheticSpec {
  int num_classes = 10;
  int chips_per_class = 40;
  int chip_size = 32;
  std::pair<int, int> scatterer_count_range{6, 14};
  double speckle_level = 0.3;      // 0: none, 1: fully developed multiplicative speckle
  double condition_shift = 0.0;    // > 0 emulates the EOC signature change
  std::uint64_t template_seed = 1;
  double rotation_range_deg = 20.0;  // instance pose drawn from +/- this range
  double translation_px = 1.5;
  double background_level = 0.06;  // Rayleigh clutter scale
  double psf_sigma = 0.7;          // point-spread width in px
  double train_fraction = 0.5;     // share of each class tagged SOC-train (zero shift only)

  void validate() const;
};

Json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const Json& j, const std::string& path);

/// num_classes * chips_per_class labeled chips, class-major order. Chips are
/// tagged condition=SOC-train/SOC-test (zero shift) or condition=EOC-test.
DatasetPool generate_synthetic_pool(const SyntheticSpec& spec, std::uint64_t seed);

/// n unlabeled chips of i.i.d. Uniform(0,1) pixels.
DatasetPool make_fake_data(int n, int size, std::uint64_t seed);

}  // namespace sarfsl
