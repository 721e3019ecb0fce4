#include "bahop/pnm.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

#include "bahop/errors.hpp"

namespace bahop::pnm {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::string& s) : s_(s) {}

  // Skips whitespace and '#' comments, then parses an unsigned decimal.
  int next_int() {
    skip();
    if (pos_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      throw InvalidInput("pnm: malformed header");
    }
    long v = 0;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      v = v * 10 + (s_[pos_++] - '0');
      if (v > 1'000'000'000L) throw InvalidInput("pnm: header value too large");
    }
    return static_cast<int>(v);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= s_.size() || !std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      throw InvalidInput("pnm: missing separator before raster");
    }
    return pos_ + 1;
  }

  std::size_t pos_ = 2;

 private:
  void skip() {
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& s_;
};

}  // namespace

std::string encode(const RasterImage& img) {
  std::ostringstream out;
  out << (img.channels() == 3 ? "P6" : "P5") << '\n'
      << img.width() << ' ' << img.height() << '\n'
      << 255 << '\n';
  std::string bytes = out.str();
  auto data = img.data();
  bytes.append(reinterpret_cast<const char*>(data.data()), data.size());
  return bytes;
}

RasterImage decode(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw InvalidInput("pnm: only binary P5/P6 supported");
  }
  const int channels = bytes[1] == '6' ? 3 : 1;
  HeaderReader hr(bytes);
  const int w = hr.next_int();
  const int h = hr.next_int();
  const int maxval = hr.next_int();
  if (maxval != 255) throw InvalidInput("pnm: maxval must be 255");
  if (w < 1 || h < 1) throw InvalidInput("pnm: empty raster");
  const std::size_t start = hr.raster_start();
  const std::size_t n = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() - start != n) throw InvalidInput("pnm: raster length mismatch");
  std::vector<std::uint8_t> data(bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.end());
  return RasterImage(w, h, channels, std::move(data));
}

void write(const std::filesystem::path& path, const RasterImage& img) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  const std::string bytes = encode(img);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

RasterImage read(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

void write_mask(const std::filesystem::path& path, const BitMask& mask) {
  write(path, mask_to_image(mask));
}

BitMask read_mask(const std::filesystem::path& path) { return image_to_mask(read(path)); }

}  // namespace bahop::pnm
