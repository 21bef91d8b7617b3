#pragma once

// Randomized property checks shared by the unit tests and the acceptance
// binary. Each returns pass/fail plus a one-line detail.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sarfsl/augment/transforms.hpp"
#include "sarfsl/core/rng.hpp"
#include "sarfsl/fsl/classifier.hpp"
#include "sarfsl/nn/sequential.hpp"
#include "sarfsl/ood/detector.hpp"
#include "sarfsl/ssl/losses.hpp"

namespace sarfsl::criteria {

struct CheckResult {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

inline Chip random_chip(Rng& rng, int min_side, int max_side) {
  const int span = max_side - min_side + 1;
  Chip c(min_side + static_cast<int>(rng.below(static_cast<std::uint64_t>(span))),
         min_side + static_cast<int>(rng.below(static_cast<std::uint64_t>(span))));
  for (float& v : c.pixels) v = static_cast<float>(rng.uniform());
  return c;
}

/// NT-Xent against the double-loop oracle (relative 1e-6) and its gradient
/// against central differences (relative 1e-4, norm-wise).
inline CheckResult check_nt_xent(int batches, std::uint64_t seed) {
  CheckResult r;
  Rng rng(seed);
  double worst_loss = 0.0;
  double worst_grad = 0.0;
  for (int b = 0; b < batches; ++b) {
    const int n = 2 + static_cast<int>(rng.below(7));  // 2..8 pairs
    const int p = 1 + static_cast<int>(rng.below(16));  // 1..16 dims
    const double t = rng.uniform(0.1, 1.0);
    Eigen::MatrixXd z(2 * n, p);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
    const auto lg = ssl::nt_xent_loss_and_grad(z, t);
    const double ref = oracle::nt_xent(z, t);
    const double rel_loss = std::abs(lg.loss - ref) / std::max(std::abs(ref), 1e-300);
    worst_loss = std::max(worst_loss, rel_loss);
    if (std::abs(ssl::nt_xent_loss(z, t) - lg.loss) > 0.0) r.fail("nt_xent_loss and nt_xent_loss_and_grad differ");
    const Eigen::MatrixXd fd =
        oracle::numeric_gradient([&](const Eigen::MatrixXd& x) { return oracle::nt_xent(x, t); }, z, 1e-5);
    // With proj_dim 1 the normalised rows are +-1 and the gradient vanishes;
    // the floor keeps rounding noise from reading as relative error.
    const double rel_grad = (lg.grad - fd).norm() / std::max(fd.norm(), 1e-8);
    worst_grad = std::max(worst_grad, rel_grad);
  }
  if (worst_loss > 1e-6) r.fail("loss relative error " + std::to_string(worst_loss));
  if (worst_grad > 1e-4) r.fail("gradient relative error " + std::to_string(worst_grad));
  if (r.pass) {
    std::ostringstream s;
    s << batches << " batches; max rel loss err " << worst_loss << ", max rel grad err " << worst_grad;
    r.detail = s.str();
  }
  return r;
}

/// lambda_oe = 0 reproduces the basic head's parameters at every step,
/// bit for bit, both with full-batch and minibatch support sampling.
inline CheckResult check_lambda_zero(std::uint64_t seed) {
  CheckResult r;
  Rng rng(seed);
  int steps_compared = 0;
  for (int trial = 0; trial < 4; ++trial) {
    const int ways = 2 + static_cast<int>(rng.below(4));
    const int shots = 1 + static_cast<int>(rng.below(trial < 2 ? 5 : 30));
    const int dim = 8 + static_cast<int>(rng.below(24));
    const int views = 1 + static_cast<int>(rng.below(3));
    const int n = ways * shots;
    fsl::FeatureMatrix support(n * views, dim);
    for (Eigen::Index i = 0; i < support.size(); ++i) support.data()[i] = static_cast<float>(rng.normal());
    fsl::FeatureMatrix oe(50, dim);
    for (Eigen::Index i = 0; i < oe.size(); ++i) oe.data()[i] = static_cast<float>(rng.normal());
    std::vector<int> labels;
    for (int c = 0; c < ways; ++c) labels.insert(labels.end(), static_cast<std::size_t>(shots), c);

    fsl::FSLTrainConfig cfg;
    cfg.iterations = 40;
    cfg.hidden = 16;
    cfg.id_batch_size = 16;
    cfg.oe_batch_size = 8;
    cfg.lambda_oe = 0.0;
    cfg.l2_normalize = trial % 2 == 1;
    cfg.seed = rng.next_u64();

    std::vector<std::vector<float>> basic_traj;
    std::vector<std::vector<float>> oe_traj;
    auto recorder = [](std::vector<std::vector<float>>& into) {
      return [&into](int, const nn::Sequential<float>& net, double) { into.push_back(nn::flatten_parameters(net)); };
    };
    const auto basic = fsl::train_classifier(support, labels, nullptr, cfg, recorder(basic_traj));
    const auto with_oe = fsl::train_classifier(support, labels, &oe, cfg, recorder(oe_traj));
    if (basic_traj.size() != oe_traj.size() || basic_traj.size() != static_cast<std::size_t>(cfg.iterations)) {
      r.fail("trajectory lengths differ");
      continue;
    }
    for (std::size_t s = 0; s < basic_traj.size(); ++s) {
      if (basic_traj[s] != oe_traj[s]) {
        r.fail("parameters differ at step " + std::to_string(s + 1) + " of trial " + std::to_string(trial));
        break;
      }
      ++steps_compared;
    }
    if (nn::flatten_parameters(basic.net) != nn::flatten_parameters(with_oe.net)) r.fail("final heads differ");
  }
  if (r.pass) r.detail = std::to_string(steps_compared) + " steps bit-identical over 4 trials";
  return r;
}

/// Sort-based AUROC equals the pairwise definition exactly, ties included.
inline CheckResult check_auroc(int pairs, std::uint64_t seed) {
  CheckResult r;
  Rng rng(seed);
  int with_ties = 0;
  for (int k = 0; k < pairs; ++k) {
    const int levels_choice[] = {2, 3, 5, 20, 0};
    const int levels = levels_choice[rng.below(5)];
    auto draw = [&](std::size_t n) {
      std::vector<double> v(n);
      for (double& x : v) {
        x = levels > 0 ? static_cast<double>(rng.below(static_cast<std::uint64_t>(levels))) / levels : rng.uniform();
      }
      return v;
    };
    const auto id = draw(1 + rng.below(60));
    const auto ood = draw(1 + rng.below(60));
    if (levels > 0) ++with_ties;
    const double fast = ood::auroc(id, ood);
    const double slow = oracle::auroc_pairwise(id, ood);
    if (fast != slow) {
      std::ostringstream s;
      s.precision(17);
      s << "pair " << k << ": sort-based " << fast << " vs pairwise " << slow;
      r.fail(s.str());
    }
  }
  if (r.pass) r.detail = std::to_string(pairs) + " pairs exact (" + std::to_string(with_ties) + " tie-heavy)";
  return r;
}

/// MSP bounds over random logits, exact 1/M for uniform logits, strict
/// decrease over the temperature grid, agreement with a long-double oracle.
inline CheckResult check_msp(int vectors, std::uint64_t seed) {
  CheckResult r;
  Rng rng(seed);
  const double grid[] = {1.0, 10.0, 100.0, 1000.0};
  double worst_oracle = 0.0;
  for (int k = 0; k < vectors; ++k) {
    const int m = 2 + static_cast<int>(rng.below(19));
    const double scale = rng.uniform(0.5, 5.0);
    std::vector<double> z(static_cast<std::size_t>(m));
    for (double& v : z) v = rng.normal(0.0, scale);
    const double tau = grid[rng.below(4)];
    const double s = ood::msp_score(z, tau);
    if (!(s >= 1.0 / m && s <= 1.0)) {
      r.fail("score " + std::to_string(s) + " outside [1/M, 1] for M=" + std::to_string(m));
    }
    worst_oracle = std::max(worst_oracle, std::abs(s - oracle::msp(z, tau)));

    const std::vector<double> flat(static_cast<std::size_t>(m), rng.normal(0.0, 10.0));
    if (ood::msp_score(flat, tau) != 1.0 / m) r.fail("uniform logits do not give exactly 1/M");

    if (k % 10 == 0) {
      double prev = 2.0;
      for (double t : grid) {
        const double v = ood::msp_score(z, t);
        if (!(v < prev)) r.fail("MSP not strictly decreasing in temperature");
        prev = v;
      }
    }
  }
  if (worst_oracle > 1e-12) r.fail("MSP deviates from the oracle by " + std::to_string(worst_oracle));
  if (r.pass) {
    std::ostringstream s;
    s << vectors << " logit vectors; max |msp - oracle| " << worst_oracle;
    r.detail = s.str();
  }
  return r;
}

/// Range, shape, determinism and identity cases of the seven transforms,
/// `draws` randomized inputs each.
inline CheckResult check_augment(int draws, std::uint64_t seed) {
  using namespace augment;
  CheckResult r;
  Rng gen(seed);
  auto same_shape = [](const Chip& a, const Chip& b) { return a.height == b.height && a.width == b.width; };
  auto in_range = [](const Chip& c) {
    return std::all_of(c.pixels.begin(), c.pixels.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
  };
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) r.fail(what);
  };

  for (int d = 0; d < draws; ++d) {
    const Chip x = random_chip(gen, 1, 20);
    const std::uint64_t s = gen.next_u64();
    auto run_twice = [&](auto&& f) {
      Rng a(s), b(s);
      Chip ya = f(a);
      Chip yb = f(b);
      check(ya == yb, "non-deterministic transform");
      return ya;
    };

    // clip_and_scale
    {
      const double a = gen.uniform(0.05, 1.0);
      const double b = gen.uniform(a, 1.0);
      const Chip y = run_twice([&](Rng& rng) { return clip_and_scale(x, a, b, rng); });
      check(same_shape(x, y) && in_range(y), "clip_and_scale range/shape");
      Rng one(s);
      check(clip_and_scale(x, 1.0, 1.0, one) == x, "clip_and_scale identity at max 1");
    }
    // pow_scale
    {
      const double a = gen.uniform(0.1, 1.0);
      const double b = gen.uniform(1.0, 4.0);
      const Chip y = run_twice([&](Rng& rng) { return pow_scale(x, a, b, rng); });
      check(same_shape(x, y) && in_range(y), "pow_scale range/shape");
      Rng one(s);
      check(pow_scale(x, 1.0, 1.0, one) == x, "pow_scale identity at exponent 1");
    }
    // speckle_noise
    {
      const double a = gen.uniform(0.0, 0.5);
      const double b = gen.uniform(a, 1.0);
      const Chip y = run_twice([&](Rng& rng) { return speckle_noise(x, a, b, rng); });
      check(same_shape(x, y) && in_range(y), "speckle_noise range/shape");
      std::size_t changed = 0;
      for (std::size_t i = 0; i < x.size(); ++i) changed += x.pixels[i] != y.pixels[i];
      check(changed <= static_cast<std::size_t>(std::lround(b * static_cast<double>(x.size()))),
            "speckle_noise replaced too many pixels");
      Rng zero(s);
      check(speckle_noise(x, 0.0, 0.0, zero) == x, "speckle_noise identity at fraction 0");
    }
    // gaussian_noise
    {
      const double a = gen.uniform(0.0, 0.2);
      const double b = gen.uniform(a, 0.5);
      const Chip y = run_twice([&](Rng& rng) { return gaussian_noise(x, a, b, rng); });
      check(same_shape(x, y) && in_range(y), "gaussian_noise range/shape");
      Rng zero(s);
      check(gaussian_noise(x, 0.0, 0.0, zero) == x, "gaussian_noise identity at std 0");
    }
    // gaussian_blur
    {
      const double sigma = gen.uniform(0.1, 2.0);
      const Chip y = run_twice([&](Rng&) { return gaussian_blur(x, sigma); });
      check(same_shape(x, y) && in_range(y), "gaussian_blur range/shape");
      if (d % 10 == 0) {
        const Chip ref = oracle::blur_direct(x, sigma);
        float worst = 0.0f;
        for (std::size_t i = 0; i < y.size(); ++i) worst = std::max(worst, std::abs(y.pixels[i] - ref.pixels[i]));
        check(worst <= 1e-5f, "gaussian_blur deviates from the direct 2-D oracle");
      }
      const Chip flat(x.height, x.width, static_cast<float>(gen.uniform()));
      const Chip yf = gaussian_blur(flat, sigma);
      for (std::size_t i = 0; i < flat.size(); ++i) {
        if (std::abs(yf.pixels[i] - flat.pixels[i]) > 1e-6f) {
          r.fail("gaussian_blur changes a constant chip");
          break;
        }
      }
    }
    // random_resized_crop
    {
      const int out = 8 + static_cast<int>(gen.below(25));
      const double lo = gen.uniform(0.05, 1.0);
      const double hi = gen.uniform(lo, 1.0);
      const Chip y = run_twice([&](Rng& rng) { return random_resized_crop(x, out, {lo, hi}, rng); });
      const float xmin = x.min_value();
      const float xmax = x.max_value();
      check(y.height == out && y.width == out, "random_resized_crop output shape");
      check(std::all_of(y.pixels.begin(), y.pixels.end(), [&](float v) { return v >= xmin && v <= xmax; }),
            "random_resized_crop leaves the input value range");
      const int side = 8 + static_cast<int>(gen.below(13));
      const Chip sq = random_chip(gen, side, side);
      Rng full(s);
      check(random_resized_crop(sq, side, {1.0, 1.0}, full) == sq, "random_resized_crop identity at full window");
    }
    // random_horizontal_flip
    {
      const double p = gen.uniform();
      const Chip y = run_twice([&](Rng& rng) { return random_horizontal_flip(x, p, rng); });
      check(same_shape(x, y) && in_range(y), "random_horizontal_flip range/shape");
      check(y == x || y == flip_columns(x), "random_horizontal_flip is neither identity nor mirror");
      Rng a(s), b(s);
      check(random_horizontal_flip(x, 0.0, a) == x, "flip identity at p = 0");
      check(random_horizontal_flip(random_horizontal_flip(x, 1.0, a), 1.0, b) == x, "double flip identity");
      check(random_horizontal_flip(x, 1.0, a).at(0, 0) == x.at(0, x.width - 1), "flip mirrors columns");
    }
  }
  if (r.pass) r.detail = std::to_string(draws) + " draws per transform";
  return r;
}

}  // namespace sarfsl::criteria
