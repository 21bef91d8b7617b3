#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace sarfsl {

/// FNV-1a 64-bit.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

std::string read_text_file(const std::filesystem::path& path);

/// Writes through a sibling temporary and renames, so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// printf-style "%.*g" with a fixed significant-digit count; used wherever
/// output must be byte-reproducible.
std::string format_real(double value, int significant_digits = 17);
std::string format_fixed(double value, int decimals);

}  // namespace sarfsl
