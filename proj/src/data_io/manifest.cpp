#include "sarfsl/data_io/manifest.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "sarfsl/core/error.hpp"
#include "sarfsl/core/io.hpp"

namespace sarfsl {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 8> kGridMagic = {'S', 'A', 'R', 'G', 'R', 'I', 'D', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

Chip read_grid(const fs::path& path) {
  const std::string bytes = read_text_file(path);
  require(bytes.size() >= 16 && std::equal(kGridMagic.begin(), kGridMagic.end(), bytes.begin()),
          ErrorKind::kSchema, "not a grid image: " + path.string());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t h = get_u32(p + 8);
  const std::uint32_t w = get_u32(p + 12);
  require(h >= 1 && w >= 1 && bytes.size() == 16 + 4ULL * h * w, ErrorKind::kSchema,
          "grid image has inconsistent size: " + path.string());
  std::vector<float> values(static_cast<std::size_t>(h) * w);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t bits = get_u32(p + 16 + 4 * i);
    std::memcpy(&values[i], &bits, 4);
  }
  return Chip(static_cast<int>(h), static_cast<int>(w), std::move(values));
}

void write_grid(const fs::path& path, const Chip& chip) {
  std::string out(kGridMagic.begin(), kGridMagic.end());
  put_u32(out, static_cast<std::uint32_t>(chip.height));
  put_u32(out, static_cast<std::uint32_t>(chip.width));
  for (float v : chip.pixels) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
  }
  write_file_atomic(path, out);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

Chip read_png(const fs::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  require(file != nullptr, ErrorKind::kLoad, "cannot open image: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kRuntime, "libpng initialisation failed");
  }
  Chip chip;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kSchema, "malformed PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  depth = png_get_bit_depth(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  chip = Chip(static_cast<int>(h), static_cast<int>(w));
  for (png_uint_32 y = 0; y < h; ++y) {
    for (png_uint_32 x = 0; x < w; ++x) {
      float v;
      if (depth == 16) {
        const unsigned char* px = rows[y] + 2 * x;
        v = static_cast<float>((px[0] << 8) | px[1]);  // PNG stores big-endian
      } else {
        v = static_cast<float>(rows[y][x]);
      }
      chip.at(static_cast<int>(y), static_cast<int>(x)) = v;
    }
  }
  return chip;
}

void write_png16(const fs::path& path, const Chip& chip) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  require(file != nullptr, ErrorKind::kRuntime, "cannot write image: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::kRuntime, "libpng initialisation failed");
  }
  std::vector<unsigned char> buffer(static_cast<std::size_t>(chip.width) * 2 * chip.height);
  std::vector<png_bytep> rows(static_cast<std::size_t>(chip.height));
  for (int y = 0; y < chip.height; ++y) {
    rows[static_cast<std::size_t>(y)] = buffer.data() + static_cast<std::size_t>(y) * chip.width * 2;
    for (int x = 0; x < chip.width; ++x) {
      const double v = std::clamp(static_cast<double>(chip.at(y, x)), 0.0, 1.0);
      const auto q = static_cast<unsigned>(std::lround(v * 65535.0));
      rows[static_cast<std::size_t>(y)][2 * x] = static_cast<unsigned char>(q >> 8);
      rows[static_cast<std::size_t>(y)][2 * x + 1] = static_cast<unsigned char>(q & 0xFF);
    }
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::kRuntime, "PNG encoding failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(chip.width), static_cast<png_uint_32>(chip.height),
               16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename Number>
bool parse_number(const std::string& text, Number& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

std::string extension_of(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

Chip read_image(const fs::path& path) {
  require(fs::exists(path), ErrorKind::kLoad, "image not found: " + path.string());
  const std::string ext = extension_of(path);
  if (ext == ".grid") return read_grid(path);
  if (ext == ".png") return read_png(path);
  fail(ErrorKind::kSchema, "unsupported image format: " + path.string());
}

void write_image(const fs::path& path, const Chip& chip, ImageFormat format) {
  switch (format) {
    case ImageFormat::kGrid: write_grid(path, chip); return;
    case ImageFormat::kPng16: write_png16(path, chip); return;
  }
}

DatasetPool load_manifest(const fs::path& path) {
  require(fs::exists(path), ErrorKind::kLoad, "manifest not found: " + path.string());
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kLoad, "cannot open manifest: " + path.string());
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

  DatasetPool pool;
  std::vector<std::string> header;
  int path_col = -1;
  int label_col = -1;
  int max_col = -1;
  std::vector<std::pair<int, std::string>> tag_cols;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (line[0] == '#') {
      auto fields = split_tabs(line);
      if (fields[0] == "#class_names") pool.class_names.assign(fields.begin() + 1, fields.end());
      continue;
    }
    auto fields = split_tabs(line);
    if (header.empty()) {
      header = fields;
      for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        const std::string& name = header[static_cast<std::size_t>(i)];
        if (name == "path") path_col = i;
        else if (name == "label") label_col = i;
        else if (name == "max") max_col = i;
        else if (name.rfind("tag.", 0) == 0 && name.size() > 4) tag_cols.emplace_back(i, name.substr(4));
        else fail(ErrorKind::kSchema, where + ": unknown manifest column '" + name + "'");
      }
      require(path_col >= 0, ErrorKind::kSchema, where + ": manifest header lacks a 'path' column");
      if (label_col >= 0) pool.labels.emplace();
      continue;
    }
    require(fields.size() == header.size(), ErrorKind::kSchema,
            where + ": expected " + std::to_string(header.size()) + " fields, got " +
                std::to_string(fields.size()));

    fs::path image_path = fields[static_cast<std::size_t>(path_col)];
    if (image_path.is_relative()) image_path = base / image_path;
    require(fs::exists(image_path), ErrorKind::kLoad, where + ": image not found: " + image_path.string());

    if (label_col >= 0) {
      int label = 0;
      require(parse_number(fields[static_cast<std::size_t>(label_col)], label) && label >= 0,
              ErrorKind::kSchema,
              where + ": label '" + fields[static_cast<std::size_t>(label_col)] +
                  "' is not a nonnegative integer");
      pool.labels->push_back(label);
    }
    double declared_max = 0.0;
    if (max_col >= 0 && !fields[static_cast<std::size_t>(max_col)].empty()) {
      require(parse_number(fields[static_cast<std::size_t>(max_col)], declared_max) && declared_max > 0.0,
              ErrorKind::kSchema, where + ": max must be a positive number");
    }

    Chip chip = read_image(image_path);
    require(chip.height >= kMinChipSide && chip.width >= kMinChipSide, ErrorKind::kShape,
            where + ": chip smaller than " + std::to_string(kMinChipSide) + " px per side");
    const double scale = declared_max > 0.0 ? declared_max : static_cast<double>(chip.max_value());
    for (float& v : chip.pixels) {
      const double x = scale > 0.0 ? static_cast<double>(v) / scale : 0.0;
      v = static_cast<float>(std::clamp(x, 0.0, 1.0));
    }
    pool.chips.push_back(std::move(chip));

    TagMap tag;
    for (const auto& [col, key] : tag_cols) {
      const std::string& value = fields[static_cast<std::size_t>(col)];
      if (!value.empty()) tag[key] = value;
    }
    pool.tags.push_back(std::move(tag));
  }
  require(!pool.chips.empty(), ErrorKind::kEmptyPool, "manifest has no records: " + path.string());
  pool.validate();
  return pool;
}

void save_manifest(const DatasetPool& pool, const fs::path& path, ImageFormat format,
                   const std::string& image_subdir) {
  pool.validate();
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::vector<std::string> tag_keys;
  for (const auto& t : pool.tags) {
    for (const auto& [k, v] : t) {
      if (std::find(tag_keys.begin(), tag_keys.end(), k) == tag_keys.end()) tag_keys.push_back(k);
    }
  }
  std::sort(tag_keys.begin(), tag_keys.end());

  std::ostringstream out;
  out << "#sarfsl-manifest v1\n";
  if (!pool.class_names.empty()) {
    out << "#class_names";
    for (const auto& name : pool.class_names) out << '\t' << name;
    out << '\n';
  }
  out << "path";
  if (pool.labeled()) out << "\tlabel";
  out << "\tmax";
  for (const auto& k : tag_keys) out << "\ttag." << k;
  out << '\n';

  const std::string ext = format == ImageFormat::kGrid ? ".grid" : ".png";
  for (std::size_t i = 0; i < pool.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu", i);
    const fs::path rel = fs::path(image_subdir) / (std::string(name) + ext);
    write_image(base / rel, pool.chips[i], format);
    out << rel.generic_string();
    if (pool.labeled()) out << '\t' << (*pool.labels)[i];
    out << (format == ImageFormat::kGrid ? "\t1" : "\t65535");  // full scale of the stored values
    for (const auto& k : tag_keys) out << '\t' << pool.tag(i, k);
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace sarfsl
