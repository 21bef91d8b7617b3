#pragma once

#include <filesystem>

#include "sarfsl/data_io/chip.hpp"

namespace sarfsl {

// On-disk images.
//
// Dense grid (.grid): 8-byte magic "SARGRID1", uint32 height, uint32 width
// (little-endian), then height*width little-endian float32 values, row-major.
// PNG (.png): 8- or 16-bit grayscale (RGB/palette inputs are converted).

enum class ImageFormat { kGrid, kPng16 };

/// Raw (un-normalised) intensities.
Chip read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Chip& chip, ImageFormat format);

// Manifest: tab-separated text. Lines starting with '#' are comments, except
// the optional "#class_names<TAB>name0<TAB>name1..." directive. The first
// non-comment line is the header; recognised columns are `path` (required,
// relative to the manifest directory unless absolute), `label` (integer),
// `max` (declared normalisation maximum) and any number of `tag.<key>`
// columns. One row per chip.

/// Loads every referenced image and normalises it to [0, 1] by dividing by
/// the declared `max` or, when absent, by the observed maximum.
DatasetPool load_manifest(const std::filesystem::path& path);

/// Writes images under `<manifest dir>/<image_subdir>/` and a manifest that
/// declares max=1 for each row, so load_manifest reproduces the pool.
void save_manifest(const DatasetPool& pool, const std::filesystem::path& path,
                   ImageFormat format = ImageFormat::kGrid,
                   const std::string& image_subdir = "images");

}  // namespace sarfsl
