#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hg/error.hpp"
#include "hg/evalkit/dcd_analysis.hpp"
#include "hg/evalkit/retrieval.hpp"
#include "hg/synthdata/png.hpp"

namespace hg::eval {

using Color = std::array<std::uint8_t, 3>;

inline constexpr Color kWhite{255, 255, 255};
inline constexpr Color kGrey{200, 200, 200};
inline constexpr Color kBlack{0, 0, 0};
inline constexpr Color kWithin{40, 90, 200};
inline constexpr Color kBetween{210, 60, 40};

// Minimal raster target for the static plots.
class Canvas {
 public:
  Canvas(int height, int width, Color bg = kWhite) : img_{height, width, {}} {
    img_.data.resize(static_cast<std::size_t>(height) * width * 3);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) set(y, x, bg);
  }

  int height() const { return img_.height; }
  int width() const { return img_.width; }

  void set(int y, int x, Color c) {
    if (y < 0 || y >= img_.height || x < 0 || x >= img_.width) return;
    auto* p = img_.data.data() + (static_cast<std::size_t>(y) * img_.width + x) * 3;
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  // Alpha-blends c over the pixel.
  void blend(int y, int x, Color c, double alpha) {
    if (y < 0 || y >= img_.height || x < 0 || x >= img_.width) return;
    auto* p = img_.data.data() + (static_cast<std::size_t>(y) * img_.width + x) * 3;
    for (int k = 0; k < 3; ++k) p[k] = static_cast<std::uint8_t>(std::lround((1 - alpha) * p[k] + alpha * c[k]));
  }

  void fill(int y0, int x0, int y1, int x1, Color c, double alpha = 1.0) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
      for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) alpha >= 1.0 ? set(y, x, c) : blend(y, x, c, alpha);
  }

  void line(int y0, int x0, int y1, int x1, Color c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(y0, x0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void frame(int y0, int x0, int y1, int x1, Color c) {
    line(y0, x0, y0, x1, c);
    line(y1, x0, y1, x1, c);
    line(y0, x0, y1, x0, c);
    line(y0, x1, y1, x1, c);
  }

  const Rgb8Image& image() const { return img_; }
  void save(const std::filesystem::path& path) const { write_png(path, img_); }

 private:
  Rgb8Image img_;
};

// Shared equal-width bins over [min, max] of both lists.
struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<long> within;
  std::vector<long> between;

  int bins() const { return static_cast<int>(within.size()); }
  double edge(int b) const { return lo + (hi - lo) * b / static_cast<double>(bins()); }
};

inline Histogram histogram(const std::vector<double>& within, const std::vector<double>& between, int num_bins) {
  require(num_bins >= 1, "histogram: num_bins must be >= 1");
  Histogram h;
  h.within.assign(static_cast<std::size_t>(num_bins), 0);
  h.between.assign(static_cast<std::size_t>(num_bins), 0);
  if (within.empty() && between.empty()) return h;
  bool first = true;
  for (const auto* v : {&within, &between})
    for (double x : *v) {
      h.lo = first ? x : std::min(h.lo, x);
      h.hi = first ? x : std::max(h.hi, x);
      first = false;
    }
  const double width = h.hi - h.lo;
  const auto bin = [&](double x) {
    if (!(width > 0.0)) return 0;
    return std::clamp(static_cast<int>((x - h.lo) / width * num_bins), 0, num_bins - 1);
  };
  for (double x : within) ++h.within[static_cast<std::size_t>(bin(x))];
  for (double x : between) ++h.between[static_cast<std::size_t>(bin(x))];
  return h;
}

namespace detail {

inline std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

inline void close_out(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace detail

inline nlohmann::json report_to_json(const EvalReport& r) {
  return {{"r1", r.rank(1)},
          {"r5", r.rank(5)},
          {"r10", r.rank(10)},
          {"map", r.map},
          {"cmc", r.cmc},
          {"dcd_overlap", r.dcd_overlap},
          {"metric", r.metric},
          {"exclusion_rule", r.exclusion_rule},
          {"valid_queries", r.valid_queries},
          {"skipped_queries", r.skipped_queries},
          {"rank_lists", r.rank_lists}};
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << "\n";
  detail::close_out(out, path);
}

// cmc.csv (rank, cmc) and a step plot of the curve.
inline void export_cmc(const std::filesystem::path& dir, const EvalReport& r) {
  const auto csv = dir / "cmc.csv";
  auto out = detail::open_out(csv);
  out << "rank,cmc\n";
  for (std::size_t k = 0; k < r.cmc.size(); ++k) out << k + 1 << "," << detail::num(r.cmc[k]) << "\n";
  detail::close_out(out, csv);

  const int H = 240, W = 400, m = 20;
  Canvas c(H, W);
  c.frame(m, m, H - m, W - m, kBlack);
  for (int t = 1; t < 4; ++t) c.line(m + (H - 2 * m) * t / 4, m + 1, m + (H - 2 * m) * t / 4, W - m - 1, kGrey);
  const int n = std::max<int>(1, static_cast<int>(r.cmc.size()));
  int py = H - m, px = m;
  for (int k = 0; k < n; ++k) {
    const double v = r.cmc.empty() ? 0.0 : r.cmc[static_cast<std::size_t>(k)];
    const int x = m + static_cast<int>(std::lround((W - 2.0 * m) * (k + 1) / n));
    const int y = H - m - static_cast<int>(std::lround((H - 2.0 * m) * v));
    c.line(py, px, y, px, kWithin);
    c.line(y, px, y, x, kWithin);
    py = y;
    px = x;
  }
  c.save(dir / "cmc.png");
}

// dcd.csv (every distance sample), dcd_hist.csv (plotted bin counts) and one histogram panel per domain.
inline void export_dcd(const std::filesystem::path& dir, const std::vector<DomainDistances>& domains, int num_bins) {
  const auto csv = dir / "dcd.csv";
  auto out = detail::open_out(csv);
  out << "part,domain,kind,distance\n";
  for (const auto& d : domains)
    for (const auto& p : d.parts) {
      for (double v : p.within) out << p.part << "," << d.name << ",wc," << detail::num(v) << "\n";
      for (double v : p.between) out << p.part << "," << d.name << ",bc," << detail::num(v) << "\n";
    }
  detail::close_out(out, csv);

  const auto hcsv = dir / "dcd_hist.csv";
  auto hout = detail::open_out(hcsv);
  hout << "domain,bin,lo,hi,within,between\n";
  const int PH = 160, W = 400, m = 10;
  Canvas c(PH * std::max<int>(1, static_cast<int>(domains.size())), W);
  for (std::size_t di = 0; di < domains.size(); ++di) {
    const Histogram h = histogram(domains[di].pooled(true), domains[di].pooled(false), num_bins);
    for (int b = 0; b < h.bins(); ++b)
      hout << domains[di].name << "," << b << "," << detail::num(h.edge(b)) << "," << detail::num(h.edge(b + 1)) << ","
           << h.within[static_cast<std::size_t>(b)] << "," << h.between[static_cast<std::size_t>(b)] << "\n";
    long nw = 0, nb = 0;
    for (long v : h.within) nw += v;
    for (long v : h.between) nb += v;
    double peak = 1e-12;
    for (int b = 0; b < h.bins(); ++b) {
      if (nw > 0) peak = std::max(peak, static_cast<double>(h.within[static_cast<std::size_t>(b)]) / nw);
      if (nb > 0) peak = std::max(peak, static_cast<double>(h.between[static_cast<std::size_t>(b)]) / nb);
    }
    const int top = static_cast<int>(di) * PH + m, bottom = static_cast<int>(di + 1) * PH - m;
    c.frame(top, m, bottom, W - m, kBlack);
    const double bw = (W - 2.0 * m) / h.bins();
    for (int b = 0; b < h.bins(); ++b) {
      const int x0 = m + static_cast<int>(std::lround(b * bw)) + 1;
      const int x1 = m + static_cast<int>(std::lround((b + 1) * bw)) - 1;
      const auto bar = [&](long count, long total, Color col) {
        if (total == 0 || count == 0) return;
        const double f = static_cast<double>(count) / total / peak;
        c.fill(bottom - 1, x0, bottom - 1 - static_cast<int>(std::lround(f * (bottom - top - 2))), x1, col, 0.5);
      };
      bar(h.between[static_cast<std::size_t>(b)], nb, kBetween);
      bar(h.within[static_cast<std::size_t>(b)], nw, kWithin);
    }
  }
  detail::close_out(hout, hcsv);
  c.save(dir / "dcd_hist.png");
}

// Per-part attention magnitude |A^i|_1 / C drawn as p horizontal bands over each image.
// Each sample is shown as the image and its heat overlay side by side.
template <typename S>
void export_attention(const std::filesystem::path& dir, const std::vector<synth::LabeledImage>& images,
                      const Tensor<S>& attention, int max_samples = 8) {
  require(attention.rank() == 3 && attention.dim(0) == static_cast<int>(images.size()),
          "export_attention: attention does not match the image list");
  const int n = std::min<int>(max_samples, static_cast<int>(images.size()));
  const int p = attention.dim(1), C = attention.dim(2);
  const auto csv = dir / "attention.csv";
  auto out = detail::open_out(csv);
  out << "sample,identity,part,magnitude\n";
  if (n == 0) {
    detail::close_out(out, csv);
    return;
  }
  const int h = images.front().height, w = images.front().width, gap = 4;
  Canvas c(h + 2 * gap, n * (2 * w + 3 * gap));
  for (int s = 0; s < n; ++s) {
    const auto& im = images[static_cast<std::size_t>(s)];
    const int x0 = s * (2 * w + 3 * gap) + gap, x1 = x0 + w + gap;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        Color px;
        for (int k = 0; k < 3; ++k)
          px[static_cast<std::size_t>(k)] =
              static_cast<std::uint8_t>(std::lround(std::clamp(im.px(y, x, k), 0.0, 1.0) * 255.0));
        c.set(gap + y, x0 + x, px);
        c.set(gap + y, x1 + x, px);
      }
    for (int i = 0; i < p; ++i) {
      double mag = 0.0;
      for (int k = 0; k < C; ++k) mag += std::abs(static_cast<double>(attention.at(s, i, k)));
      mag /= C;
      out << s << "," << im.identity << "," << i << "," << detail::num(mag) << "\n";
      const double t = std::clamp(mag, 0.0, 1.0);
      const Color heat{static_cast<std::uint8_t>(std::lround(255 * t)), 40,
                       static_cast<std::uint8_t>(std::lround(255 * (1 - t)))};
      const int y0 = gap + i * h / p, y1 = gap + (i + 1) * h / p - 1;
      c.fill(y0, x1, y1, x1 + w - 1, heat, 0.55);
    }
  }
  detail::close_out(out, csv);
  c.save(dir / "attention.png");
}

}  // namespace hg::eval
