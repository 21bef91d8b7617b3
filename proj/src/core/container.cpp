#include "sarfsl/core/container.hpp"

#include <cstring>

#include "sarfsl/core/io.hpp"

namespace sarfsl {

namespace {

constexpr char kMagic[8] = {'S', 'A', 'R', 'F', 'S', 'L', 'C', 'K'};

template <typename U>
void put(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

class Cursor {
 public:
  Cursor(const std::string& bytes, std::string origin) : bytes_(bytes), origin_(std::move(origin)) {}

  template <typename U>
  U take() {
    need(sizeof(U));
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      value |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return value;
  }

  std::string take_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    require(n <= bytes_.size() - pos_, ErrorKind::kSchema, origin_ + ": truncated checkpoint");
  }

  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_container(const std::filesystem::path& path, const Container& container) {
  Json header = container.header;
  header["kind"] = container.kind;
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  put<std::uint64_t>(out, container.values.size());
  for (float v : container.values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put<std::uint32_t>(out, bits);
  }
  write_file_atomic(path, out);
}

Container load_container(const std::filesystem::path& path, const std::string& expected_kind) {
  const std::string bytes = read_text_file(path);
  const std::string origin = path.string();
  Cursor cur(bytes, origin);
  require(cur.take_bytes(sizeof(kMagic)) == std::string(kMagic, sizeof(kMagic)), ErrorKind::kSchema,
          origin + ": not a checkpoint file");
  const auto version = cur.take<std::uint32_t>();
  require(version == kContainerVersion, ErrorKind::kSchema,
          origin + ": unsupported checkpoint version " + std::to_string(version));
  const auto header_len = cur.take<std::uint64_t>();
  Container c;
  try {
    c.header = Json::parse(cur.take_bytes(static_cast<std::size_t>(header_len)));
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::kSchema, origin + ": corrupt checkpoint header: " + e.what());
  }
  require(c.header.is_object() && c.header.contains("kind") && c.header["kind"].is_string(),
          ErrorKind::kSchema, origin + ": checkpoint header lacks a kind");
  c.kind = c.header["kind"].get<std::string>();
  require(c.kind == expected_kind, ErrorKind::kSchema,
          origin + ": expected a " + expected_kind + " checkpoint, found " + c.kind);
  const auto count = cur.take<std::uint64_t>();
  require(count <= bytes.size() / 4, ErrorKind::kSchema, origin + ": implausible value count");
  c.values.resize(static_cast<std::size_t>(count));
  for (float& v : c.values) {
    const auto bits = cur.take<std::uint32_t>();
    std::memcpy(&v, &bits, sizeof(v));
  }
  require(cur.done(), ErrorKind::kSchema, origin + ": trailing bytes after checkpoint data");
  return c;
}

}  // namespace sarfsl
