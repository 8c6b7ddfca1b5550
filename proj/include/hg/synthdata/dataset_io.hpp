#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "hg/error.hpp"
#include "hg/synthdata/image.hpp"
#include "hg/synthdata/png.hpp"

namespace hg::synth {

enum class Split { train, query, gallery };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::query: return "query";
    case Split::gallery: return "gallery";
  }
  return "train";
}

struct FileLabel {
  int identity = 0;
  int camera = 0;
  bool occluded_flag = false;
  int index = 0;
};

// Grammar: <id:04d>_c<camera:int>_o<0|1>_<index:06d>.png
inline std::optional<FileLabel> parse_filename(const std::string& name) {
  static const std::regex re(R"(^(\d{4})_c(\d+)_o([01])_(\d{6})\.png$)");
  std::smatch m;
  if (!std::regex_match(name, m, re)) return std::nullopt;
  FileLabel l;
  l.identity = std::stoi(m[1].str());
  l.camera = std::stoi(m[2].str());
  l.occluded_flag = m[3].str() == "1";
  l.index = std::stoi(m[4].str());
  return l;
}

inline std::string format_filename(const FileLabel& l) {
  require(l.identity >= 0 && l.identity <= 9999, "format_filename: identity must fit 4 digits");
  require(l.index >= 0 && l.index <= 999999, "format_filename: index must fit 6 digits");
  require(l.camera >= 0, "format_filename: negative camera");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d_c%d_o%d_%06d.png", l.identity, l.camera, l.occluded_flag ? 1 : 0, l.index);
  return buf;
}

inline Rgb8Image quantize(const LabeledImage& img) {
  Rgb8Image out{img.height, img.width, std::vector<std::uint8_t>(img.pixels.size())};
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    out.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0));
  return out;
}

// Writes images into `dir` (created if needed); file index is the position in the list.
inline void write_image_dir(const std::filesystem::path& dir, const std::vector<LabeledImage>& images) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("write_image_dir: cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    const FileLabel l{img.identity, img.camera, img.occluded_flag, static_cast<int>(i)};
    write_png(dir / format_filename(l), quantize(img));
  }
}

// Reads every PNG in `dir`, sorted by file name.
inline std::vector<LabeledImage> read_image_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw NotFound("dataset directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<LabeledImage> out;
  out.reserve(files.size());
  for (const auto& f : files) {
    const auto label = parse_filename(f.filename().string());
    if (!label) throw ParseError("malformed dataset file name: " + f.string());
    const Rgb8Image raw = read_png(f);
    LabeledImage img(raw.height, raw.width);
    for (std::size_t i = 0; i < raw.data.size(); ++i) img.pixels[i] = raw.data[i] / 255.0;
    img.identity = label->identity;
    img.camera = label->camera;
    img.occluded_flag = label->occluded_flag;
    img.domain = label->occluded_flag ? Domain::occluded : Domain::holistic;
    out.push_back(std::move(img));
  }
  return out;
}

inline void write_split(const std::filesystem::path& root, Split split, const std::vector<LabeledImage>& images) {
  write_image_dir(root / split_name(split), images);
}

inline std::vector<LabeledImage> read_split(const std::filesystem::path& root, Split split) {
  return read_image_dir(root / split_name(split));
}

}  // namespace hg::synth
