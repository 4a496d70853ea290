// SPDX-License-Identifier: Apache-2.0

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "rankdist/error.hpp"
#include "rankdist/imaging.hpp"

namespace rankdist {

namespace fs = std::filesystem;

unsigned char quantize_sample(double v) {
  const double scaled = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<unsigned char>(scaled);
}

namespace {

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reads one whitespace-delimited header token, skipping '#' comments.
bool next_token(std::span<const unsigned char> bytes, std::size_t& pos, std::string& token) {
  token.clear();
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    token.push_back(static_cast<char>(bytes[pos++]));
  }
  return !token.empty();
}

int parse_header_int(std::span<const unsigned char> bytes, std::size_t& pos) {
  std::string token;
  if (!next_token(bytes, pos, token)) throw Error(ErrorCode::CorruptData, "truncated PPM header");
  int value = 0;
  for (char c : token) {
    if (!std::isdigit(static_cast<unsigned char>(c)) || value > 1'000'000) {
      throw Error(ErrorCode::CorruptData, "bad PPM header field '" + token + "'");
    }
    value = value * 10 + (c - '0');
  }
  return value;
}

ImageRGB decode_png(std::span<const unsigned char> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::CorruptData, image.message);
  }
  if (image.format & (PNG_FORMAT_FLAG_ALPHA | PNG_FORMAT_FLAG_LINEAR)) {
    png_image_free(&image);
    throw Error(ErrorCode::UnsupportedFormat, "only 8-bit RGB or grayscale PNG without alpha");
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> raw(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
    throw Error(ErrorCode::CorruptData, image.message);
  }
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);
  std::vector<double> samples(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) samples[i] = raw[i] / 255.0;
  return ImageRGB(w, h, std::move(samples));
}

}  // namespace

ImageRGB decode_ppm(std::span<const unsigned char> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
    throw Error(ErrorCode::UnsupportedFormat, "not a binary PPM/PGM stream");
  }
  const int channels = bytes[1] == '6' ? 3 : 1;
  std::size_t pos = 2;
  const int w = parse_header_int(bytes, pos);
  const int h = parse_header_int(bytes, pos);
  const int maxval = parse_header_int(bytes, pos);
  if (w <= 0 || h <= 0) throw Error(ErrorCode::CorruptData, "PPM dimensions must be positive");
  if (maxval != 255) throw Error(ErrorCode::UnsupportedFormat, "only 8-bit PPM (maxval 255)");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error(ErrorCode::CorruptData, "truncated PPM header");
  }
  ++pos;  // single whitespace before the raster
  const std::size_t pixels = static_cast<std::size_t>(w) * h;
  if (bytes.size() - pos != pixels * channels) {
    throw Error(ErrorCode::CorruptData, "PPM raster size does not match header dimensions");
  }
  std::vector<double> samples(pixels * kChannels);
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < kChannels; ++c) {
      const unsigned char v = bytes[pos + p * channels + (channels == 3 ? c : 0)];
      samples[p * kChannels + c] = v / 255.0;
    }
  }
  return ImageRGB(w, h, std::move(samples));
}

ImageRGB load_image(const fs::path& path) {
  const auto bytes = read_bytes(path);
  static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5')) {
    return decode_ppm(bytes);
  }
  throw Error(ErrorCode::UnsupportedFormat, path.string());
}

void save_image(const ImageRGB& img, const fs::path& path, ImageFormat format) {
  if (img.empty()) throw Error(ErrorCode::InvalidArgument, "cannot save an empty image");
  std::vector<unsigned char> raw(img.samples().size());
  std::transform(img.samples().begin(), img.samples().end(), raw.begin(), quantize_sample);

  if (format == ImageFormat::Ppm) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
    return;
  }

  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, raw.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, image.message);
  }
  std::vector<unsigned char> encoded(size);
  if (!png_image_write_to_memory(&image, encoded.data(), &size, 0, raw.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, image.message);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(encoded.data()), static_cast<std::streamsize>(size));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void save_image(const ImageRGB& img, const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return save_image(img, path, ImageFormat::Png);
  if (ext == ".ppm") return save_image(img, path, ImageFormat::Ppm);
  throw Error(ErrorCode::UnsupportedFormat, "unknown image extension '" + ext + "'");
}

}  // namespace rankdist
