#include "sarfsl/ssl/encoder.hpp"

#include <algorithm>

#include "sarfsl/core/io.hpp"

namespace sarfsl::ssl {

using nn::Conv2d;
using nn::Flatten;
using nn::GlobalAvgPool;
using nn::MaxPool2d;
using nn::ReLU;
using nn::Sequential;
using nn::Shape;

void EncoderSpec::validate() const {
  require(input_size >= kMinChipSide, ErrorKind::kConfig,
          "encoder.input_size must be >= " + std::to_string(kMinChipSide));
  if (arch == "small_conv") {
    require(!channels.empty(), ErrorKind::kConfig, "encoder.channels must be nonempty");
    int side = input_size;
    for (int c : channels) {
      require(c >= 1, ErrorKind::kConfig, "encoder.channels entries must be positive");
      require(side >= 2, ErrorKind::kConfig, "encoder: too many pooling blocks for the input size");
      side /= 2;
    }
  } else if (arch == "resnet") {
    require(resnet_width >= 1, ErrorKind::kConfig, "encoder.resnet_width must be positive");
    require(resnet_blocks.size() == 4, ErrorKind::kConfig, "encoder.resnet_blocks needs four entries");
    for (int b : resnet_blocks) {
      require(b >= 1, ErrorKind::kConfig, "encoder.resnet_blocks entries must be positive");
    }
  } else {
    fail(ErrorKind::kConfig, "encoder.arch must be small_conv or resnet, got '" + arch + "'");
  }
}

int EncoderSpec::feat_dim() const {
  if (arch == "resnet") return 8 * resnet_width;
  int side = input_size;
  for (std::size_t i = 0; i < channels.size(); ++i) side /= 2;
  return channels.empty() ? 0 : channels.back() * side * side;
}

std::string EncoderSpec::descriptor() const { return to_json(*this).dump(); }

Json to_json(const EncoderSpec& spec) {
  return Json{{"arch", spec.arch},
              {"input_size", spec.input_size},
              {"channels", spec.channels},
              {"resnet_width", spec.resnet_width},
              {"resnet_blocks", spec.resnet_blocks}};
}

EncoderSpec encoder_spec_from_json(const Json& j, const std::string& path) {
  EncoderSpec spec;
  JsonReader r(j, path);
  r.get("arch", spec.arch);
  r.get("input_size", spec.input_size);
  r.get("channels", spec.channels);
  r.get("resnet_width", spec.resnet_width);
  r.get("resnet_blocks", spec.resnet_blocks);
  r.finish();
  return spec;
}

void add_basic_block(Sequential<float>& net, int out_channels, int stride, Rng& rng) {
  const Shape in = net.output_shape();
  Sequential<float> branch(in);
  branch.add<Conv2d>(out_channels, 3, stride, 1, rng);
  branch.add<ReLU>();
  // No normalisation layers in the stack; the zero start keeps it trainable.
  branch.add<Conv2d>(out_channels, 3, 1, 1, rng, 0.0);
  Sequential<float> shortcut(in);
  if (stride != 1 || in.channels != out_channels) shortcut.add<Conv2d>(out_channels, 1, stride, 0, rng);
  net.push(std::make_unique<nn::Residual<float>>(in, std::move(branch), std::move(shortcut)));
  net.add<ReLU>();
}

Sequential<float> build_backbone(const EncoderSpec& spec, Rng& rng) {
  spec.validate();
  Sequential<float> net(Shape{1, spec.input_size, spec.input_size});
  if (spec.arch == "small_conv") {
    for (int c : spec.channels) {
      net.add<Conv2d>(c, 3, 1, 1, rng);
      net.add<ReLU>();
      net.add<MaxPool2d>(2);
    }
    net.add<Flatten>();
  } else {
    const int w = spec.resnet_width;
    net.add<Conv2d>(w, 3, 1, 1, rng);
    net.add<ReLU>();
    const int widths[4] = {w, 2 * w, 4 * w, 8 * w};
    for (int stage = 0; stage < 4; ++stage) {
      for (int b = 0; b < spec.resnet_blocks[stage]; ++b) {
        add_basic_block(net, widths[stage], stage > 0 && b == 0 ? 2 : 1, rng);
      }
    }
    net.add<GlobalAvgPool>();
  }
  net.set_input_grad_required(false);
  return net;
}

Encoder::Encoder(EncoderSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  Rng rng(seed);
  net_ = build_backbone(spec_, rng);
}

Encoder::Encoder(EncoderSpec spec, Sequential<float> net) : spec_(std::move(spec)), net_(std::move(net)) {
  require(net_.output_shape().numel() == spec_.feat_dim(), ErrorKind::kShape,
          "encoder: network output does not match EncoderSpec::feat_dim");
}

std::string Encoder::descriptor() const { return spec_.descriptor() + "|" + net_.describe(); }

std::uint64_t Encoder::arch_hash() const { return fnv1a(descriptor()); }

nn::Matrix<float> chips_to_batch(const std::vector<const Chip*>& chips, int size) {
  const Eigen::Index per = static_cast<Eigen::Index>(size) * size;
  nn::Matrix<float> x(1, per * static_cast<Eigen::Index>(chips.size()));
  for (std::size_t i = 0; i < chips.size(); ++i) {
    const Chip& c = *chips[i];
    require(c.height == size && c.width == size, ErrorKind::kShape,
            "chip " + std::to_string(i) + " is " + std::to_string(c.height) + "x" +
                std::to_string(c.width) + ", network expects " + std::to_string(size) + "x" +
                std::to_string(size));
    std::copy(c.pixels.begin(), c.pixels.end(), x.data() + per * static_cast<Eigen::Index>(i));
  }
  return x;
}

nn::Matrix<float> chips_to_batch(const std::vector<Chip>& chips, int size) {
  std::vector<const Chip*> ptrs;
  ptrs.reserve(chips.size());
  for (const Chip& c : chips) ptrs.push_back(&c);
  return chips_to_batch(ptrs, size);
}

FeatureMatrix extract_features(const Encoder& encoder, const std::vector<const Chip*>& chips,
                               int batch_size) {
  require(batch_size >= 1, ErrorKind::kParameter, "extract_features: batch_size must be positive");
  const int size = encoder.spec().input_size;
  FeatureMatrix out(static_cast<Eigen::Index>(chips.size()), encoder.feat_dim());
  for (std::size_t start = 0; start < chips.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(chips.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const Chip*> slice(chips.begin() + static_cast<std::ptrdiff_t>(start),
                                   chips.begin() + static_cast<std::ptrdiff_t>(end));
    const nn::Matrix<float> f = encoder.net().infer(chips_to_batch(slice, size));
    out.middleRows(static_cast<Eigen::Index>(start), f.cols()) = f.transpose();
  }
  return out;
}

FeatureMatrix extract_features(const Encoder& encoder, const std::vector<Chip>& chips, int batch_size) {
  std::vector<const Chip*> ptrs;
  ptrs.reserve(chips.size());
  for (const Chip& c : chips) ptrs.push_back(&c);
  return extract_features(encoder, ptrs, batch_size);
}

}  // namespace sarfsl::ssl
