#pragma once

#include <png.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hg/error.hpp"

namespace hg {

struct Rgb8Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // HWC, 3 channels
};

inline void write_png(const std::filesystem::path& path, const Rgb8Image& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("write_png: " + path.string() + ": " + msg);
  }
}

inline Rgb8Image read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw IoError("read_png: " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  Rgb8Image out;
  out.height = static_cast<int>(image.height);
  out.width = static_cast<int>(image.width);
  out.data.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("read_png: " + path.string() + ": " + msg);
  }
  return out;
}

}  // namespace hg
