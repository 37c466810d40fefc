#include "slicer/plot.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include <png.h>

#include "slicer/error.h"

namespace slicer {

namespace {

constexpr int kMargin = 48;

// 3x5 glyphs for tick labels, one row per entry, bit 2 = left column.
const std::array<std::array<std::uint8_t, 5>, 13> kGlyphs = {{
    {7, 5, 5, 5, 7},  // 0
    {2, 6, 2, 2, 7},  // 1
    {7, 1, 7, 4, 7},  // 2
    {7, 1, 7, 1, 7},  // 3
    {5, 5, 7, 1, 1},  // 4
    {7, 4, 7, 1, 7},  // 5
    {7, 4, 7, 5, 7},  // 6
    {7, 1, 1, 1, 1},  // 7
    {7, 5, 7, 5, 7},  // 8
    {7, 5, 7, 1, 7},  // 9
    {0, 0, 0, 0, 2},  // .
    {0, 0, 7, 0, 0},  // -
    {5, 1, 2, 4, 5},  // %
}};

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h * 3, 255) {}

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    auto i = (static_cast<std::size_t>(y) * w_ + x) * 3;
    px_[i] = c[0];
    px_[i + 1] = c[1];
    px_[i + 2] = c[2];
  }

  void line(double x0, double y0, double x1, double y1, Rgb c, bool dashed) {
    const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
    for (int s = 0; s <= steps; ++s) {
      if (dashed && (s / 4) % 2 == 1) continue;
      double t = static_cast<double>(s) / steps;
      int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
      int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
      set(x, y, c);
      set(x, y + 1, c);
    }
  }

  void text(int x, int y, const std::string& s, Rgb c) {
    for (char ch : s) {
      int g = -1;
      if (ch >= '0' && ch <= '9') g = ch - '0';
      else if (ch == '.') g = 10;
      else if (ch == '-') g = 11;
      else if (ch == '%') g = 12;
      if (g >= 0) {
        for (int row = 0; row < 5; ++row) {
          for (int col = 0; col < 3; ++col) {
            if (kGlyphs[g][row] & (4 >> col)) {
              for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) set(x + 2 * col + dx, y + 2 * row + dy, c);
            }
          }
        }
      }
      x += 8;
    }
  }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp) throw IoError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      png_destroy_write_struct(&png, &info);
      throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw IoError("failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w_), static_cast<png_uint_32>(h_), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h_; ++y) {
      png_write_row(png, const_cast<png_bytep>(px_.data() + static_cast<std::size_t>(y) * w_ * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), std::abs(v) >= 100 ? "%.0f" : "%.2g", v);
  return buf;
}

}  // namespace

void write_line_plot(const LinePlot& plot, const std::filesystem::path& path) {
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  auto extend = [&](const std::vector<double>& xs, const std::vector<double>& ys) {
    for (double x : xs) x_min = std::min(x_min, x), x_max = std::max(x_max, x);
    for (double y : ys) {
      if (std::isfinite(y)) y_min = std::min(y_min, y), y_max = std::max(y_max, y);
    }
  };
  for (const auto& s : plot.series) extend(s.x, s.y);
  for (const auto& b : plot.bands) {
    extend(b.x, b.lo);
    extend(b.x, b.hi);
  }
  if (!std::isfinite(x_min)) x_min = 0.0, x_max = 1.0;
  if (!std::isfinite(y_min)) y_min = 0.0, y_max = 1.0;
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_max = y_min + 1.0;

  Canvas canvas(plot.width, plot.height);
  const double left = kMargin, right = plot.width - 16.0;
  const double top = 16.0, bottom = plot.height - 32.0;
  auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * (right - left); };
  auto py = [&](double y) { return bottom - (y - y_min) / (y_max - y_min) * (bottom - top); };

  const Rgb grid{225, 225, 225};
  for (int i = 1; i < 4; ++i) {
    double gy = top + i * (bottom - top) / 4.0;
    canvas.line(left, gy, right, gy, grid, false);
  }
  for (const auto& b : plot.bands) {
    for (std::size_t i = 0; i + 1 < b.x.size(); ++i) {
      int xa = static_cast<int>(px(b.x[i])), xb = static_cast<int>(px(b.x[i + 1]));
      for (int x = xa; x <= xb; ++x) {
        double t = xb == xa ? 0.0 : static_cast<double>(x - xa) / (xb - xa);
        double lo = b.lo[i] + t * (b.lo[i + 1] - b.lo[i]);
        double hi = b.hi[i] + t * (b.hi[i + 1] - b.hi[i]);
        for (int y = static_cast<int>(py(hi)); y <= static_cast<int>(py(lo)); ++y) canvas.set(x, y, b.color);
      }
    }
  }
  const Rgb axis{0, 0, 0};
  canvas.line(left, top, left, bottom, axis, false);
  canvas.line(left, bottom, right, bottom, axis, false);
  for (const auto& s : plot.series) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (n == 1) canvas.line(px(s.x[0]) - 2, py(s.y[0]), px(s.x[0]) + 2, py(s.y[0]), s.color, false);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      canvas.line(px(s.x[i]), py(s.y[i]), px(s.x[i + 1]), py(s.y[i + 1]), s.color, s.dashed);
    }
  }
  canvas.text(4, static_cast<int>(top), tick(y_max), axis);
  canvas.text(4, static_cast<int>(bottom) - 10, tick(y_min), axis);
  canvas.text(static_cast<int>(left), static_cast<int>(bottom) + 8, tick(x_min), axis);
  canvas.text(static_cast<int>(right) - 40, static_cast<int>(bottom) + 8, tick(x_max), axis);
  canvas.save(path);
}

}  // namespace slicer
