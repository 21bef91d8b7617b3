#include "sarfsl/fsl/scratch.hpp"

#include <algorithm>
#include <set>

#include "sarfsl/augment/transforms.hpp"
#include "sarfsl/nn/loss.hpp"
#include "sarfsl/nn/optim.hpp"

namespace sarfsl::fsl {

using nn::Matrix;

nn::Sequential<float> build_scratch_net(const std::string& arch, int input_size, int ways, Rng& rng) {
  require(ways >= 2, ErrorKind::kParameter, "scratch: need at least two classes");
  require(input_size >= kMinChipSide && input_size % 8 == 0, ErrorKind::kConfig,
          "scratch: input size must be a multiple of 8 and >= " + std::to_string(kMinChipSide));
  nn::Sequential<float> net(nn::Shape{1, input_size, input_size});
  if (arch == kScratchSmall) {
    net.add<nn::Conv2d>(16, 5, 1, 2, rng);
    net.add<nn::ReLU>();
    net.add<nn::MaxPool2d>(2);
    net.add<nn::Conv2d>(32, 5, 1, 2, rng);
    net.add<nn::ReLU>();
    net.add<nn::MaxPool2d>(2);
    net.add<nn::Conv2d>(64, 3, 1, 1, rng);
    net.add<nn::ReLU>();
    net.add<nn::MaxPool2d>(2);
    net.add<nn::Flatten>();
  } else if (arch == kScratchDeep) {
    net.add<nn::Conv2d>(8, 3, 1, 1, rng);
    net.add<nn::ReLU>();
    const int widths[4] = {8, 16, 32, 64};
    for (int stage = 0; stage < 4; ++stage) ssl::add_basic_block(net, widths[stage], stage == 0 ? 1 : 2, rng);
    net.add<nn::GlobalAvgPool>();
  } else {
    fail(ErrorKind::kConfig, "scratch arch must be small_conv or deep_conv, got '" + arch + "'");
  }
  net.add<nn::Linear>(ways, rng);
  net.set_input_grad_required(false);
  return net;
}

ScratchModel train_scratch_baseline(const std::vector<const Chip*>& support, const std::vector<int>& labels,
                                    const std::string& arch, const FSLTrainConfig& cfg) {
  cfg.validate();
  require(!support.empty() && support.size() == labels.size(), ErrorKind::kShape,
          "scratch: support chips and labels differ in count");
  int ways = 0;
  std::set<int> distinct;
  for (int l : labels) {
    require(l >= 0, ErrorKind::kParameter, "scratch: negative label");
    ways = std::max(ways, l + 1);
    distinct.insert(l);
  }
  require(distinct.size() >= 2, ErrorKind::kParameter,
          "scratch: degenerate labels, the support set holds a single class");
  const int size = support.front()->height;

  ScratchModel model;
  model.arch = arch;
  model.input_size = size;
  model.ways = ways;
  Rng init_rng(derive_seed(cfg.seed, 20));
  model.net = build_scratch_net(arch, size, ways, init_rng);
  const auto params = model.net.parameters();
  nn::Adam<float> opt(nn::AdamOptions{.weight_decay = cfg.weight_decay});
  Rng batch_rng(derive_seed(cfg.seed, 21));
  Rng aug_rng(derive_seed(cfg.seed, 22));
  const std::size_t n = support.size();
  const bool full_batch = n <= static_cast<std::size_t>(cfg.id_batch_size);

  std::vector<Chip> views;
  std::vector<int> batch_labels;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<std::size_t> idx(n);
    if (full_batch) {
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    } else {
      idx = sample_without_replacement(n, static_cast<std::size_t>(cfg.id_batch_size), batch_rng);
    }
    views.clear();
    batch_labels.clear();
    for (std::size_t i : idx) {
      views.push_back(augment::stage2_augment(*support[i], cfg.stage2_noise_std, cfg.flip_prob, aug_rng));
      batch_labels.push_back(labels[i]);
    }
    model.net.zero_grad();
    const Matrix<float> logits = model.net.forward(ssl::chips_to_batch(views, size));
    const auto lg = nn::soft_cross_entropy<float>(
        logits, nn::smoothed_targets<float>(batch_labels, ways, cfg.label_smoothing));
    model.net.backward(lg.grad);
    opt.step(params, nn::cosine_lr(cfg.learning_rate, it, cfg.iterations));
  }
  return model;
}

FeatureMatrix predict(const ScratchModel& model, const std::vector<const Chip*>& chips, int batch_size) {
  FeatureMatrix out(static_cast<Eigen::Index>(chips.size()), model.ways);
  for (std::size_t start = 0; start < chips.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(chips.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const Chip*> slice(chips.begin() + static_cast<std::ptrdiff_t>(start),
                                   chips.begin() + static_cast<std::ptrdiff_t>(end));
    const Matrix<float> logits = model.net.infer(ssl::chips_to_batch(slice, model.input_size));
    out.middleRows(static_cast<Eigen::Index>(start), logits.cols()) = logits.transpose();
  }
  return out;
}

}  // namespace sarfsl::fsl
