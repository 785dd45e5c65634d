#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ear::bench {

// blobs8 layout: token j is the 2x2 pixel block at block row j / 4 and
// block column j % 4; channel c is pixel (c / 2, c % 2) inside the block.

/// 16 x 4 tokens -> 64 row-major pixel values.
std::vector<float> patches_to_image(std::span<const float> tokens);
/// 64 row-major pixel values -> 16 x 4 tokens.
std::vector<float> image_to_patches(std::span<const float> image);

/// Affinely maps the image range onto [0, 255]. A constant image maps to
/// mid grey.
std::vector<std::uint8_t> render(std::span<const float> tokens);

/// Binary 8-bit greyscale (P5) image file.
std::vector<std::uint8_t> encode_pgm(std::span<const std::uint8_t> pixels, std::size_t width,
                                     std::size_t height);
void write_pgm(const std::string& path, std::span<const std::uint8_t> pixels, std::size_t width,
               std::size_t height);

}  // namespace ear::bench
