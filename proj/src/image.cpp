#include "mgm/image.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include "mgm/error.hpp"

namespace mgm {

namespace {

// Next header token, skipping whitespace and '#' comments.
int next_header_int(std::istream& in, const std::string& path, const char* what) {
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  if (c == EOF) throw FormatError(path + ": header ended before " + what);
  if (!std::isdigit(c)) {
    throw FormatError(path + ": expected digit for " + what + ", got '" +
                      std::string(1, static_cast<char>(c)) + "'");
  }
  long value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    if (value > 1 << 20) throw FormatError(path + ": unreasonable " + std::string(what));
    c = in.get();
  }
  if (c != EOF) in.unget();
  return static_cast<int>(value);
}

}  // namespace

Image make_image(int height, int width, int channels, float fill) {
  if (height < 1 || width < 1 || (channels != 1 && channels != 3)) {
    throw InvalidParameterError("make_image: bad dims " + std::to_string(height) + "x" +
                                std::to_string(width) + "x" + std::to_string(channels));
  }
  Image img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.pixels.assign(static_cast<std::size_t>(height) * width * channels, fill);
  return img;
}

Image read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);

  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  int channels = 0;
  if (m0 == 'P' && m1 == '5') channels = 1;
  else if (m0 == 'P' && m1 == '6') channels = 3;
  else throw FormatError(path + ": not a binary PGM/PPM (magic '" + m0 + m1 + "')");

  const int width = next_header_int(in, path, "width");
  const int height = next_header_int(in, path, "height");
  const int maxval = next_header_int(in, path, "maxval");
  if (width < 1 || height < 1) throw FormatError(path + ": non-positive dimensions");
  if (maxval < 1 || maxval > 255) {
    throw FormatError(path + ": unsupported maxval " + std::to_string(maxval));
  }
  in.get();  // single whitespace byte after maxval

  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  std::vector<unsigned char> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    throw FormatError(path + ": truncated pixel data (" + std::to_string(in.gcount()) + " of " +
                      std::to_string(count) + " bytes)");
  }

  Image img = make_image(height, width, channels);
  const float scale = static_cast<float>(maxval);
  for (std::size_t i = 0; i < count; ++i) img.pixels[i] = static_cast<float>(raw[i]) / scale;
  return img;
}

void write_image(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw InvalidParameterError("write_image: channels must be 1 or 3, got " +
                                std::to_string(img.channels));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const float v = std::fmin(1.0f, std::fmax(0.0f, img.pixels[i]));
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace mgm
