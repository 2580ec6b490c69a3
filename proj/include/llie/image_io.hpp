#pragma once

#include <filesystem>

#include "llie/tensor.hpp"

namespace llie {

struct ImageSize {
  int height = 0;
  int width = 0;
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Decodes an 8- or 16-bit RGB PNG or a baseline RGB JPEG into a 1x3xHxW
/// tensor scaled by the bit-depth maximum. Alpha is dropped with a warning;
/// grayscale throws NonRGBError; anything undecodable throws DecodeError.
Tensor<float> load_image(const std::filesystem::path& path);

/// Reads only the header.
ImageSize read_image_size(const std::filesystem::path& path);

/// Writes the first sample of an N x 3 x H x W tensor as an RGB PNG, values
/// clamped to [0,1] and rounded to the nearest code.
void save_png(const std::filesystem::path& path, const Tensor<float>& image, int bit_depth = 8);

bool is_image_file(const std::filesystem::path& path);

}  // namespace llie
