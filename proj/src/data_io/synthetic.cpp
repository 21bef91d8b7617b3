#include "sarfsl/data_io/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sarfsl/core/error.hpp"
#include "sarfsl/core/rng.hpp"

namespace sarfsl {

void SyntheticSpec::validate() const {
  require(num_classes >= 2, ErrorKind::kConfig, "synthetic: num_classes must be >= 2");
  require(chips_per_class >= 1, ErrorKind::kConfig, "synthetic: chips_per_class must be >= 1");
  require(chip_size >= kMinChipSide, ErrorKind::kConfig,
          "synthetic: chip_size must be >= " + std::to_string(kMinChipSide));
  require(scatterer_count_range.first >= 1 &&
              scatterer_count_range.first <= scatterer_count_range.second,
          ErrorKind::kConfig, "synthetic: scatterer_count_range must be nondecreasing and >= 1");
  require(speckle_level >= 0.0 && speckle_level <= 1.0, ErrorKind::kConfig,
          "synthetic: speckle_level must lie in [0, 1]");
  require(condition_shift >= 0.0, ErrorKind::kConfig, "synthetic: condition_shift must be >= 0");
  require(rotation_range_deg >= 0.0 && translation_px >= 0.0 && background_level >= 0.0 &&
              psf_sigma > 0.0,
          ErrorKind::kConfig, "synthetic: pose/clutter parameters must be nonnegative");
  require(train_fraction >= 0.0 && train_fraction <= 1.0, ErrorKind::kConfig,
          "synthetic: train_fraction must lie in [0, 1]");
}

Json to_json(const SyntheticSpec& spec) {
  return Json{{"num_classes", spec.num_classes},
              {"chips_per_class", spec.chips_per_class},
              {"chip_size", spec.chip_size},
              {"scatterer_count_range", spec.scatterer_count_range},
              {"speckle_level", spec.speckle_level},
              {"condition_shift", spec.condition_shift},
              {"template_seed", spec.template_seed},
              {"rotation_range_deg", spec.rotation_range_deg},
              {"translation_px", spec.translation_px},
              {"background_level", spec.background_level},
              {"psf_sigma", spec.psf_sigma},
              {"train_fraction", spec.train_fraction}};
}

SyntheticSpec synthetic_spec_from_json(const Json& j, const std::string& path) {
  SyntheticSpec spec;
  JsonReader r(j, path);
  r.get("num_classes", spec.num_classes);
  r.get("chips_per_class", spec.chips_per_class);
  r.get("chip_size", spec.chip_size);
  r.get("scatterer_count_range", spec.scatterer_count_range);
  r.get("speckle_level", spec.speckle_level);
  r.get("condition_shift", spec.condition_shift);
  r.get("template_seed", spec.template_seed);
  r.get("rotation_range_deg", spec.rotation_range_deg);
  r.get("translation_px", spec.translation_px);
  r.get("background_level", spec.background_level);
  r.get("psf_sigma", spec.psf_sigma);
  r.get("train_fraction", spec.train_fraction);
  r.finish();
  return spec;
}

namespace {

struct Scatterer {
  double u;  // along-track offset, px
  double v;  // cross-track offset, px
  double amplitude;
};

struct ClassTemplate {
  std::vector<Scatterer> scatterers;
  // EOC signature change: 2x2 warp and per-scatterer gain, both scaled by
  // condition_shift at render time.
  double warp[4];
  std::vector<double> gain_perturbation;
};

ClassTemplate make_template(const SyntheticSpec& spec, int class_id) {
  Rng rng(derive_seed(spec.template_seed, static_cast<std::uint64_t>(class_id)));
  ClassTemplate t;
  const int lo = spec.scatterer_count_range.first;
  const int hi = spec.scatterer_count_range.second;
  const int count = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
  const double length = spec.chip_size * rng.uniform(0.30, 0.55);
  const double width = length * rng.uniform(0.30, 0.75);
  for (int k = 0; k < count; ++k) {
    Scatterer s;
    s.u = rng.uniform(-0.5, 0.5) * length;
    s.v = rng.uniform(-0.5, 0.5) * width;
    s.amplitude = k == 0 ? 1.0 : rng.uniform(0.25, 0.95);
    t.scatterers.push_back(s);
  }
  t.warp[0] = rng.normal(0.0, 0.25);
  t.warp[1] = rng.normal(0.0, 0.25);
  t.warp[2] = rng.normal(0.0, 0.25);
  t.warp[3] = rng.normal(0.0, 0.25);
  for (int k = 0; k < count; ++k) t.gain_perturbation.push_back(rng.normal(0.0, 0.7));
  return t;
}

Chip render(const SyntheticSpec& spec, const ClassTemplate& t, Rng& rng) {
  const int n = spec.chip_size;
  std::vector<double> img(static_cast<std::size_t>(n) * n, 0.0);
  const double s = spec.condition_shift;
  // Shared global warp component plus the class-specific one.
  const double a00 = 1.0 + s * (0.15 + t.warp[0]);
  const double a01 = s * t.warp[1];
  const double a10 = s * t.warp[2];
  const double a11 = 1.0 + s * (-0.10 + t.warp[3]);

  const double theta = rng.uniform(-spec.rotation_range_deg, spec.rotation_range_deg) *
                       std::numbers::pi / 180.0;
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const double cx = 0.5 * (n - 1) + rng.uniform(-spec.translation_px, spec.translation_px);
  const double cy = 0.5 * (n - 1) + rng.uniform(-spec.translation_px, spec.translation_px);
  const double sigma = spec.psf_sigma;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const int reach = static_cast<int>(std::ceil(3.0 * sigma));

  for (std::size_t k = 0; k < t.scatterers.size(); ++k) {
    const Scatterer& sc = t.scatterers[k];
    const double wu = a00 * sc.u + a01 * sc.v;
    const double wv = a10 * sc.u + a11 * sc.v;
    const double x = cx + ct * wu - st * wv;
    const double y = cy + st * wu + ct * wv;
    double amp = sc.amplitude * std::max(0.05, 1.0 + s * t.gain_perturbation[k]);
    amp *= std::max(0.0, 1.0 + rng.normal(0.0, 0.1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    for (int yy = std::max(0, y0 - reach); yy <= std::min(n - 1, y0 + reach + 1); ++yy) {
      for (int xx = std::max(0, x0 - reach); xx <= std::min(n - 1, x0 + reach + 1); ++xx) {
        const double d2 = (xx - x) * (xx - x) + (yy - y) * (yy - y);
        img[static_cast<std::size_t>(yy) * n + xx] += amp * std::exp(-d2 * inv2s2);
      }
    }
  }

  for (double& v : img) {
    const double u = rng.uniform();
    v += spec.background_level * std::sqrt(-2.0 * std::log1p(-u));  // Rayleigh clutter
    if (spec.speckle_level > 0.0) {
      const double e = -std::log1p(-rng.uniform());  // Exp(1): unit-mean intensity speckle
      v *= (1.0 - spec.speckle_level) + spec.speckle_level * e;
    }
  }

  const double peak = *std::max_element(img.begin(), img.end());
  Chip chip(n, n);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = peak > 0.0 ? img[i] / peak : 0.0;
    chip.pixels[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return chip;
}

}  // namespace

DatasetPool generate_synthetic_pool(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  DatasetPool pool;
  pool.labels.emplace();
  const int per_class = spec.chips_per_class;
  const int train_count = static_cast<int>(std::lround(spec.train_fraction * per_class));
  for (int c = 0; c < spec.num_classes; ++c) {
    const ClassTemplate t = make_template(spec, c);
    pool.class_names.push_back("class" + std::to_string(c));
    for (int i = 0; i < per_class; ++i) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c) * 1000003ULL + static_cast<std::uint64_t>(i)));
      pool.chips.push_back(render(spec, t, rng));
      pool.labels->push_back(c);
      TagMap tag;
      tag[tags::kSource] = "synthetic";
      if (spec.condition_shift > 0.0) {
        tag[tags::kCondition] = tags::kEocTest;
      } else {
        tag[tags::kCondition] = i < train_count ? tags::kSocTrain : tags::kSocTest;
      }
      pool.tags.push_back(std::move(tag));
    }
  }
  return pool;
}

DatasetPool make_fake_data(int n, int size, std::uint64_t seed) {
  require(n >= 1, ErrorKind::kParameter, "make_fake_data: n must be >= 1");
  require(size >= 1, ErrorKind::kParameter, "make_fake_data: size must be >= 1");
  DatasetPool pool;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    Chip chip(size, size);
    for (float& v : chip.pixels) {
      v = static_cast<float>(rng.uniform());
    }
    pool.chips.push_back(std::move(chip));
    pool.tags.push_back(TagMap{{tags::kSource, "fake-data"}});
  }
  return pool;
}

}  // namespace sarfsl
