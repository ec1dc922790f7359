#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "app.hpp"

namespace mlkrim::cli {

std::vector<std::uint8_t> grayscale_frame(const ComplexTensor3& x, std::size_t t, double lo,
                                          double hi) {
  const auto& d = x.dims();
  std::vector<std::uint8_t> px(d.n_k());
  const double span = hi - lo;
  for (std::size_t r = 0; r < d.n_f; ++r) {
    for (std::size_t i = 0; i < d.n_p; ++i) {
      const double v = span > 0.0 ? (std::abs(x(r, i, t)) - lo) / span : 0.0;
      px[r * d.n_p + i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
  }
  return px;
}

namespace {

void write_png(const fs::path& path, const std::vector<std::uint8_t>& px, std::size_t width,
               std::size_t height) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < height; ++r) {
    png_write_row(png, const_cast<png_bytep>(px.data() + r * width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_series(const ComplexTensor3& x, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& v : x.data()) {
    lo = std::min(lo, std::abs(v));
    hi = std::max(hi, std::abs(v));
  }
  const auto& d = x.dims();
  for (std::size_t t = 0; t < d.n_fr; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "_frame%03zu.png", t);
    write_png(dir / (stem + name), grayscale_frame(x, t, lo, hi), d.n_p, d.n_f);
  }
}

}  // namespace mlkrim::cli
