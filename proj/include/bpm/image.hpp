#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace bpm {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// 8-bit raster, row-major, interleaved channels (1 = gray, 3 = RGB, 4 = RGBA).
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, std::uint8_t fill = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }

  std::uint8_t& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<const std::uint8_t> bytes() const { return data_; }
  std::span<std::uint8_t> bytes() { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<std::uint8_t> data_;
};

// Geometric transforms. "About the vertical axis" swaps left and right.
Image reflect_about_vertical_axis(const Image& img);
Image reflect_about_horizontal_axis(const Image& img);
Image rotate_180(const Image& img);
// Flips the rectangle [x0,x1) x [y0,y1) upside down in place.
void flip_region_vertically(Image& img, int x0, int y0, int x1, int y1);
Image resize_nearest(const Image& img, int width, int height);
Image to_rgb(const Image& img);

// Rasterization on gray (single-channel) canvases. A pixel is covered when
// its center lies inside the shape; no antialiasing, so output is exact and
// platform independent.
void fill_polygon(Image& img, std::span<const Point> poly, std::uint8_t value);
void fill_rect(Image& img, double x0, double y0, double x1, double y1, std::uint8_t value);
void fill_ellipse(Image& img, Point center, double rx, double ry, std::uint8_t value);
void draw_segment(Image& img, Point a, Point b, double thickness, std::uint8_t value);
void draw_ellipse_outline(Image& img, Point center, double rx, double ry, double thickness,
                          std::uint8_t value);

void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

}  // namespace bpm
