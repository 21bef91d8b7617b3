#pragma once

#include <cstdint>
#include <filesystem>

#include "sarfsl/ssl/pretrain.hpp"

namespace sarfsl::ssl {

struct EncoderCheckpoint {
  Encoder encoder;
  SSLConfig ssl;
  std::uint64_t aug_hash = 0;
  std::uint64_t seed = 0;
};

/// Header records the architecture descriptor and its hash, the SSL config,
/// the augmentation-config hash, the seed, every parameter's name and shape,
/// and a checksum over the parameter bytes.
void save_encoder_checkpoint(const std::filesystem::path& path, const Encoder& encoder,
                             const SSLConfig& ssl, std::uint64_t aug_hash);
/// Rebuilds the architecture from the stored spec and verifies that the
/// descriptor hash, every parameter shape and the checksum match.
EncoderCheckpoint load_encoder_checkpoint(const std::filesystem::path& path);

}  // namespace sarfsl::ssl
