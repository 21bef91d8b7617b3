#include "sarfsl/ssl/checkpoint.hpp"

#include "sarfsl/core/container.hpp"
#include "sarfsl/core/io.hpp"

namespace sarfsl::ssl {

namespace {
constexpr const char* kKind = "encoder";
}

void save_encoder_checkpoint(const std::filesystem::path& path, const Encoder& encoder,
                             const SSLConfig& ssl, std::uint64_t aug_hash) {
  Container c;
  c.kind = kKind;
  Json params = Json::array();
  for (const nn::Param<float>* p : encoder.net().parameters()) {
    params.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  }
  c.header = {{"encoder_spec", to_json(encoder.spec())},
              {"arch_descriptor", encoder.descriptor()},
              {"arch_hash", hex64(encoder.arch_hash())},
              {"ssl_config", to_json(ssl)},
              {"aug_hash", hex64(aug_hash)},
              {"seed", ssl.seed},
              {"params", params},
              {"param_checksum", hex64(nn::parameter_checksum(encoder.net()))}};
  c.values = nn::flatten_parameters(encoder.net());
  save_container(path, c);
}

EncoderCheckpoint load_encoder_checkpoint(const std::filesystem::path& path) {
  const Container c = load_container(path, kKind);
  const std::string origin = path.string();
  EncoderCheckpoint out;
  try {
    const Json& h = c.header;
    const EncoderSpec spec = encoder_spec_from_json(h.at("encoder_spec"), "encoder_spec");
    out.ssl = ssl_config_from_json(h.at("ssl_config"), "ssl_config");
    out.aug_hash = std::stoull(h.at("aug_hash").get<std::string>(), nullptr, 16);
    out.seed = h.at("seed").get<std::uint64_t>();
    out.encoder = Encoder(spec, std::uint64_t{0});
    require(hex64(out.encoder.arch_hash()) == h.at("arch_hash").get<std::string>(), ErrorKind::kSchema,
            origin + ": architecture hash mismatch");
    const auto params = out.encoder.net().parameters();
    const Json& shapes = h.at("params");
    require(shapes.size() == params.size(), ErrorKind::kSchema, origin + ": parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      require(shapes[i].at("rows").get<Eigen::Index>() == params[i]->value.rows() &&
                  shapes[i].at("cols").get<Eigen::Index>() == params[i]->value.cols(),
              ErrorKind::kSchema, origin + ": shape mismatch for parameter " + std::to_string(i));
    }
    require(c.values.size() == out.encoder.net().num_parameters(), ErrorKind::kSchema,
            origin + ": parameter data size mismatch");
    nn::assign_parameters(out.encoder.net(), c.values);
    require(hex64(nn::parameter_checksum(out.encoder.net())) == h.at("param_checksum").get<std::string>(),
            ErrorKind::kSchema, origin + ": parameter checksum mismatch");
  } catch (const Json::exception& e) {
    fail(ErrorKind::kSchema, origin + ": malformed checkpoint header: " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) fail(ErrorKind::kSchema, origin + ": " + e.what());
    throw;
  }
  return out;
}

}  // namespace sarfsl::ssl
