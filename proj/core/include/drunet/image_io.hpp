#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace drunet {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit raster, `channels` interleaved samples per pixel (1 or 3).
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  Raster() = default;
  Raster(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  friend bool operator==(const Raster&, const Raster&) = default;
};

// Binary netpbm: P5 (grayscale) and P6 (RGB), maxval 255. Header comments
// are accepted on read and never written.
std::string encode_pnm(const Raster& image);
Raster decode_pnm(const std::string& bytes);

void write_pnm(const Raster& image, const std::filesystem::path& path);
Raster read_pnm(const std::filesystem::path& path);

}  // namespace drunet
