#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sarfsl/core/json.hpp"
#include "sarfsl/data_io/chip.hpp"
#include "sarfsl/nn/sequential.hpp"

namespace sarfsl::ssl {

/// Rows are samples, columns are feature dimensions.
using FeatureMatrix = nn::Matrix<float>;

struct EncoderSpec {
  /// "small_conv": one (3x3 conv, ReLU, 2x2 max-pool) block per entry of
  /// `channels`, then flatten. With the defaults a 32x32 chip maps to
  /// 128 x 2 x 2 = 512 features.
  /// "resnet": 3x3 stem, four stages of residual basic blocks at widths
  /// w, 2w, 4w, 8w (stride 2 entering stages 2-4), global average pooling.
  /// resnet_blocks {2, 2, 2, 2} is the ResNet-18 layout; w = 64 gives 512
  /// features.
  std::string arch = "small_conv";
  int input_size = 32;
  std::vector<int> channels{16, 32, 64, 128};
  int resnet_width = 64;
  std::vector<int> resnet_blocks{2, 2, 2, 2};

  void validate() const;
  int feat_dim() const;
  std::string descriptor() const;
};

Json to_json(const EncoderSpec& spec);
EncoderSpec encoder_spec_from_json(const Json& j, const std::string& path);

/// Appends a basic residual block (conv-ReLU-conv plus shortcut, then ReLU).
/// The branch's last conv starts at zero so the block starts as its shortcut.
void add_basic_block(nn::Sequential<float>& net, int out_channels, int stride, Rng& rng);

/// Builds the convolutional backbone described by `spec` (no head).
nn::Sequential<float> build_backbone(const EncoderSpec& spec, Rng& rng);

/// Frozen-or-trainable feature extractor: a backbone plus its spec.
class Encoder {
 public:
  Encoder() = default;
  Encoder(EncoderSpec spec, std::uint64_t seed);
  Encoder(EncoderSpec spec, nn::Sequential<float> net);

  const EncoderSpec& spec() const { return spec_; }
  int feat_dim() const { return spec_.feat_dim(); }
  nn::Sequential<float>& net() { return net_; }
  const nn::Sequential<float>& net() const { return net_; }

  /// Spec plus layer-by-layer structure; equal descriptors load each other's
  /// parameters.
  std::string descriptor() const;
  std::uint64_t arch_hash() const;

 private:
  EncoderSpec spec_;
  nn::Sequential<float> net_;
};

/// Packs chips into the network activation layout (1 channel). Every chip
/// must be size x size.
nn::Matrix<float> chips_to_batch(const std::vector<const Chip*>& chips, int size);
nn::Matrix<float> chips_to_batch(const std::vector<Chip>& chips, int size);

/// Row i is the encoder output of chips[i]. Inference mode only; the encoder
/// is never modified. Shape error when a chip does not match the input size.
FeatureMatrix extract_features(const Encoder& encoder, const std::vector<Chip>& chips,
                               int batch_size = 256);
FeatureMatrix extract_features(const Encoder& encoder, const std::vector<const Chip*>& chips,
                               int batch_size = 256);

}  // namespace sarfsl::ssl
