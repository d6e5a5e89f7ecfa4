#include "bpm/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "bpm/error.hpp"

namespace bpm {

Image::Image(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels),
      data_(static_cast<std::size_t>(width) * height * channels, fill) {}

Image reflect_about_vertical_axis(const Image& img) {
  Image out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(img.width() - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

Image reflect_about_horizontal_axis(const Image& img) {
  Image out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(x, img.height() - 1 - y, c) = img.at(x, y, c);
  return out;
}

Image rotate_180(const Image& img) {
  return reflect_about_horizontal_axis(reflect_about_vertical_axis(img));
}

void flip_region_vertically(Image& img, int x0, int y0, int x1, int y1) {
  x0 = std::clamp(x0, 0, img.width());
  x1 = std::clamp(x1, 0, img.width());
  y0 = std::clamp(y0, 0, img.height());
  y1 = std::clamp(y1, 0, img.height());
  for (int top = y0, bottom = y1 - 1; top < bottom; ++top, --bottom)
    for (int x = x0; x < x1; ++x)
      for (int c = 0; c < img.channels(); ++c) std::swap(img.at(x, top, c), img.at(x, bottom, c));
}

Image resize_nearest(const Image& img, int width, int height) {
  Image out(width, height, img.channels());
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(img.height() - 1, static_cast<int>((y + 0.5) * img.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(img.width() - 1, static_cast<int>((x + 0.5) * img.width() / width));
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

Image to_rgb(const Image& img) {
  if (img.channels() == 3) return img;
  Image out(img.width(), img.height(), 3);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c)
        out.at(x, y, c) = img.channels() == 1 ? img.at(x, y) : img.at(x, y, c);
  return out;
}

// ---------------------------------------------------------------------------
// rasterization

void fill_polygon(Image& img, std::span<const Point> poly, std::uint8_t value) {
  if (poly.size() < 3) return;
  double ymin = poly[0].y, ymax = poly[0].y;
  for (const auto& p : poly) {
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const int y0 = std::max(0, static_cast<int>(std::floor(ymin)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(ymax)));
  std::vector<double> xs;
  for (int y = y0; y <= y1; ++y) {
    const double sy = y + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Point& a = poly[i];
      const Point& b = poly[(i + 1) % poly.size()];
      // half-open rule on y avoids double counting shared vertices
      if ((a.y <= sy && b.y > sy) || (b.y <= sy && a.y > sy)) {
        xs.push_back(a.x + (sy - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int xa = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int xb = std::min(img.width() - 1, static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1);
      for (int x = xa; x <= xb; ++x) img.at(x, y) = value;
    }
  }
}

void fill_rect(Image& img, double x0, double y0, double x1, double y1, std::uint8_t value) {
  const Point poly[] = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  fill_polygon(img, poly, value);
}

void fill_ellipse(Image& img, Point center, double rx, double ry, std::uint8_t value) {
  if (rx <= 0 || ry <= 0) return;
  const int y0 = std::max(0, static_cast<int>(std::floor(center.y - ry)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(center.y + ry)));
  const int x0 = std::max(0, static_cast<int>(std::floor(center.x - rx)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(center.x + rx)));
  for (int y = y0; y <= y1; ++y) {
    const double dy = (y + 0.5 - center.y) / ry;
    for (int x = x0; x <= x1; ++x) {
      const double dx = (x + 0.5 - center.x) / rx;
      if (dx * dx + dy * dy <= 1.0) img.at(x, y) = value;
    }
  }
}

void draw_segment(Image& img, Point a, Point b, double thickness, std::uint8_t value) {
  const double r = thickness / 2.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - r)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r)));
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5 - a.x, py = y + 0.5 - a.y;
      double t = len2 > 0 ? (px * vx + py * vy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double dx = px - t * vx, dy = py - t * vy;
      if (dx * dx + dy * dy <= r * r) img.at(x, y) = value;
    }
  }
}

void draw_ellipse_outline(Image& img, Point center, double rx, double ry, double thickness,
                          std::uint8_t value) {
  const double h = thickness / 2.0;
  const int y0 = std::max(0, static_cast<int>(std::floor(center.y - ry - h)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(center.y + ry + h)));
  const int x0 = std::max(0, static_cast<int>(std::floor(center.x - rx - h)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(center.x + rx + h)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - center.x, dy = y + 0.5 - center.y;
      const double outer = (dx * dx) / ((rx + h) * (rx + h)) + (dy * dy) / ((ry + h) * (ry + h));
      const double ix = std::max(rx - h, 1e-9), iy = std::max(ry - h, 1e-9);
      const double inner = (dx * dx) / (ix * ix) + (dy * dy) / (iy * iy);
      if (outer <= 1.0 && inner >= 1.0) img.at(x, y) = value;
    }
  }
}

// ---------------------------------------------------------------------------
// PNG

namespace {

png_uint_32 png_format_for(int channels) {
  switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
    default: throw Error(ErrorCode::InvariantViolation, "unsupported channel count");
  }
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image info;
  std::memset(&info, 0, sizeof(info));
  info.version = PNG_IMAGE_VERSION;
  info.width = static_cast<png_uint_32>(img.width());
  info.height = static_cast<png_uint_32>(img.height());
  info.format = png_format_for(img.channels());
  if (!png_image_write_to_file(&info, path.c_str(), 0, img.bytes().data(), 0, nullptr)) {
    const std::string msg = info.message;
    png_image_free(&info);
    throw Error(ErrorCode::IoError, "png write " + path.string() + ": " + msg);
  }
}

Image read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingImageFile, path.string());
  png_image info;
  std::memset(&info, 0, sizeof(info));
  info.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&info, path.c_str())) {
    throw Error(ErrorCode::IoError, "png read " + path.string() + ": " + info.message);
  }
  int channels = 1;
  if (info.format & PNG_FORMAT_FLAG_COLOR) channels = 3;
  if (info.format & PNG_FORMAT_FLAG_ALPHA) channels = 4;
  info.format = png_format_for(channels);
  Image img(static_cast<int>(info.width), static_cast<int>(info.height), channels);
  if (!png_image_finish_read(&info, nullptr, img.bytes().data(), 0, nullptr)) {
    const std::string msg = info.message;
    png_image_free(&info);
    throw Error(ErrorCode::IoError, "png decode " + path.string() + ": " + msg);
  }
  return img;
}

}  // namespace bpm
