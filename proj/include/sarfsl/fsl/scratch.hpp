#pragma once

#include <string>
#include <vector>

#include "sarfsl/fsl/classifier.hpp"

namespace sarfsl::fsl {

// End-to-end baselines trained on the support chips alone.
//   small_conv: conv5x5(16)-pool, conv5x5(32)-pool, conv3x3(64)-pool, linear.
//   deep_conv:  residual net, 3x3 stem then one basic block per stage at
//               widths 8/16/32/64 (9 convs), global average pool, linear.
inline constexpr const char* kScratchSmall = "small_conv";
inline constexpr const char* kScratchDeep = "deep_conv";

nn::Sequential<float> build_scratch_net(const std::string& arch, int input_size, int ways, Rng& rng);

struct ScratchModel {
  std::string arch;
  int input_size = 0;
  int ways = 0;
  nn::Sequential<float> net;
};

/// Trains the whole network for cfg.iterations Adam steps on label-smoothed
/// cross-entropy, with stage2_augment applied to every chip of every batch.
ScratchModel train_scratch_baseline(const std::vector<const Chip*>& support, const std::vector<int>& labels,
                                    const std::string& arch, const FSLTrainConfig& cfg);

/// Logits, rows = chips, cols = ways.
FeatureMatrix predict(const ScratchModel& model, const std::vector<const Chip*>& chips,
                      int batch_size = 256);

}  // namespace sarfsl::fsl
