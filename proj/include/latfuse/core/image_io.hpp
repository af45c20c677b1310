#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "latfuse/core/error.hpp"
#include "latfuse/core/fs.hpp"
#include "latfuse/core/image.hpp"

namespace latfuse::io {

inline std::uint8_t to_byte(float v) {
  const float c = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

/// Reads an 8-bit PNG, converting to `channels` (1 gray, 3 RGB or 4 RGBA), values /255.
inline ImageBuffer read_png(const std::filesystem::path& path, int channels = 3) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + img.message);
  switch (channels) {
    case 1: img.format = PNG_FORMAT_GRAY; break;
    case 3: img.format = PNG_FORMAT_RGB; break;
    case 4: img.format = PNG_FORMAT_RGBA; break;
    default: png_image_free(&img); throw ValueError("read_png: channels must be 1, 3 or 4");
  }
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, bytes.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  std::vector<float> values(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) values[i] = static_cast<float>(bytes[i]) / 255.0f;
  return ImageBuffer(static_cast<int>(img.height), static_cast<int>(img.width), channels, std::move(values));
}

/// Writes an 8-bit PNG with round(v·255), clamped. Written to a temp name then renamed.
inline void write_png(const std::filesystem::path& path, const ImageBuffer& image) {
  const int ch = image.channels();
  if (ch != 1 && ch != 3 && ch != 4) throw ValueError("write_png: channels must be 1, 3 or 4");
  std::vector<std::uint8_t> bytes(image.size());
  const auto v = image.values();
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(v[i]);

  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = ch == 1 ? PNG_FORMAT_GRAY : ch == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_RGBA;
  AtomicFile out(path);
  if (!png_image_write_to_file(&img, out.temp_path().string().c_str(), 0, bytes.data(), 0, nullptr))
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  out.commit();
}

// Float container: 8-byte magic, uint32 height, width, channels (little-endian),
// then height·width·channels float32 values in interleaved row-major order.
inline constexpr std::array<char, 8> kFloatMagic = {'L', 'F', 'I', 'M', 'G', '0', '0', '1'};

inline void write_float_image(const std::filesystem::path& path, const ImageBuffer& image) {
  AtomicFile out(path);
  {
    std::ofstream f(out.temp_path(), std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(kFloatMagic.data(), kFloatMagic.size());
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(image.height()),
                                   static_cast<std::uint32_t>(image.width()),
                                   static_cast<std::uint32_t>(image.channels())};
    f.write(reinterpret_cast<const char*>(dims), sizeof dims);
    f.write(reinterpret_cast<const char*>(image.values().data()),
            static_cast<std::streamsize>(image.size() * sizeof(float)));
    if (!f) throw IoError("short write to " + path.string());
  }
  out.commit();
}

inline ImageBuffer read_float_image(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::array<char, 8> magic{};
  f.read(magic.data(), magic.size());
  if (!f || magic != kFloatMagic) throw IoError(path.string() + " is not a float image container");
  std::uint32_t dims[3] = {};
  f.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!f || dims[0] == 0 || dims[1] == 0 || dims[2] == 0 || dims[0] > 65536 || dims[1] > 65536 || dims[2] > 64)
    throw IoError(path.string() + ": bad float image header");
  std::vector<float> values(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  f.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!f) throw IoError(path.string() + ": truncated float image");
  return ImageBuffer(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]),
                     std::move(values));
}

/// Dispatches on extension: `.png` or the float container (anything else).
inline ImageBuffer read_image(const std::filesystem::path& path) {
  if (path.extension() == ".png") return read_png(path, 3);
  return read_float_image(path);
}

inline void write_image(const std::filesystem::path& path, const ImageBuffer& image) {
  if (path.extension() == ".png") return write_png(path, image);
  write_float_image(path, image);
}

}  // namespace latfuse::io
