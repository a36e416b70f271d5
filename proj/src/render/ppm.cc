#include <algorithm>
#include <cmath>
#include <string>

#include "adcgs/error.h"
#include "adcgs/io/bytes.h"
#include "adcgs/render/renderer.h"

namespace adcgs {

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.rgb.size());
  for (double v : img.rgb) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return out;
}

void write_ppm(const std::string& path, const Image& img) {
  io::write_file(path, encode_ppm(img));
}

Image read_ppm(const std::string& path) {
  const auto bytes = io::read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P6") throw DataError(path + ": not a binary PPM");
  const int w = std::stoi(token());
  const int h = std::stoi(token());
  const int maxv = std::stoi(token());
  if (maxv != 255 || w <= 0 || h <= 0) throw DataError(path + ": unsupported PPM header");
  ++pos;  // single whitespace after maxval
  Image img(w, h);
  if (bytes.size() - pos < img.rgb.size()) throw DataError(path + ": truncated PPM");
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = bytes[pos + i] / 255.0;
  return img;
}

}  // namespace adcgs
