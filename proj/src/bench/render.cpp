#include "ear/bench/render.hpp"

#include <algorithm>
#include <cmath>

#include "ear/bench/io.hpp"
#include "ear/common/errors.hpp"

namespace ear::bench {

namespace {

std::size_t pixel_of(std::size_t j, std::size_t c) {
  const std::size_t y = (j / 4) * 2 + c / 2;
  const std::size_t x = (j % 4) * 2 + c % 2;
  return y * 8 + x;
}

}  // namespace

std::vector<float> patches_to_image(std::span<const float> tokens) {
  if (tokens.size() != 64) {
    throw DimensionError("blobs8 render needs 16 tokens of 4 channels, got " +
                         std::to_string(tokens.size()) + " values");
  }
  std::vector<float> image(64);
  for (std::size_t j = 0; j < 16; ++j) {
    for (std::size_t c = 0; c < 4; ++c) image[pixel_of(j, c)] = tokens[j * 4 + c];
  }
  return image;
}

std::vector<float> image_to_patches(std::span<const float> image) {
  if (image.size() != 64) throw DimensionError("blobs8 image must be 8x8");
  std::vector<float> tokens(64);
  for (std::size_t j = 0; j < 16; ++j) {
    for (std::size_t c = 0; c < 4; ++c) tokens[j * 4 + c] = image[pixel_of(j, c)];
  }
  return tokens;
}

std::vector<std::uint8_t> render(std::span<const float> tokens) {
  const auto image = patches_to_image(tokens);
  const auto [lo, hi] = std::minmax_element(image.begin(), image.end());
  std::vector<std::uint8_t> out(64, 128);
  if (!(*hi > *lo)) return out;
  const double range = double(*hi) - double(*lo);
  for (std::size_t i = 0; i < 64; ++i) {
    out[i] = std::uint8_t(std::lround(255.0 * (double(image[i]) - double(*lo)) / range));
  }
  return out;
}

std::vector<std::uint8_t> encode_pgm(std::span<const std::uint8_t> pixels, std::size_t width,
                                     std::size_t height) {
  if (pixels.size() != width * height) throw DimensionError("pixel count does not match size");
  const std::string header =
      "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

void write_pgm(const std::string& path, std::span<const std::uint8_t> pixels, std::size_t width,
               std::size_t height) {
  write_file(path, encode_pgm(pixels, width, height));
}

}  // namespace ear::bench
