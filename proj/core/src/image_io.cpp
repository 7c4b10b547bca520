#include "drunet/image_io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace drunet {

namespace {

constexpr long kMaxDim = 1 << 15;

class HeaderParser {
 public:
  explicit HeaderParser(const std::string& b) : b_(b) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      const char c = b_[pos_];
      if (c == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  long integer(const char* what) {
    skip_space_and_comments();
    if (pos_ >= b_.size() || !std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      throw ImageIoError(std::string("pnm header: expected ") + what);
    }
    long v = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > kMaxDim) throw ImageIoError(std::string("pnm header: ") + what + " too large");
    }
    return v;
  }

  /// Exactly one whitespace byte separates the header from the raster.
  void single_space() {
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_]))) {
      throw ImageIoError("pnm header: missing separator before pixel data");
    }
    ++pos_;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::string& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_pnm(const Raster& image) {
  if (image.channels != 1 && image.channels != 3) throw ImageIoError("pnm: channels must be 1 or 3");
  if (image.width <= 0 || image.height <= 0) throw ImageIoError("pnm: empty image");
  if (image.data.size() != static_cast<std::size_t>(image.width) * image.height * image.channels) {
    throw ImageIoError("pnm: pixel buffer size does not match dimensions");
  }
  std::string out = (image.channels == 1 ? "P5\n" : "P6\n") + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.data.data()), image.data.size());
  return out;
}

Raster decode_pnm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ImageIoError("not a binary PGM/PPM file (expected P5 or P6 magic)");
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  std::string body = bytes.substr(2);
  HeaderParser h(body);
  if (body.empty() || !(std::isspace(static_cast<unsigned char>(body[0])) || body[0] == '#')) {
    throw ImageIoError("pnm header: magic must be followed by whitespace");
  }
  const long w = h.integer("width");
  const long ht = h.integer("height");
  const long maxval = h.integer("maxval");
  if (w <= 0 || ht <= 0) throw ImageIoError("pnm header: zero width or height");
  if (maxval != 255) {
    throw ImageIoError("pnm header: maxval " + std::to_string(maxval) + " unsupported (only 8-bit 255)");
  }
  h.single_space();
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(ht) * channels;
  const std::size_t have = body.size() - h.pos();
  if (have < need) {
    throw ImageIoError("pnm: truncated pixel data (" + std::to_string(have) + " of " + std::to_string(need) +
                       " bytes)");
  }
  if (have > need) throw ImageIoError("pnm: " + std::to_string(have - need) + " trailing bytes after pixel data");
  Raster r(static_cast<int>(w), static_cast<int>(ht), channels);
  std::copy(body.begin() + static_cast<std::ptrdiff_t>(h.pos()), body.end(), r.data.begin());
  return r;
}

void write_pnm(const Raster& image, const std::filesystem::path& path) {
  const std::string bytes = encode_pnm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageIoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageIoError("failed writing " + path.string());
}

Raster read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open image " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_pnm(ss.str());
  } catch (const ImageIoError& e) {
    throw ImageIoError(path.string() + ": " + e.what());
  }
}

}  // namespace drunet
