#pragma once

#include <Eigen/Dense>
#include <string>

namespace lfr {

/// RGB image in linear light, pixels stored row-major as an (H*W) x 3
/// matrix so feature maps and im2col blocks share the same layout.
struct Image {
  int width = 0;
  int height = 0;
  Eigen::MatrixXd pixels;  // (height*width) x 3, values in [0, 1]

  static Image zeros(int width, int height) {
    return {width, height, Eigen::MatrixXd::Zero(height * width, 3)};
  }

  int index(int x, int y) const { return y * width + x; }

  Eigen::Vector3d pixel(int x, int y) const {
    return pixels.row(index(x, y)).transpose();
  }

  void set_pixel(int x, int y, const Eigen::Vector3d& rgb) {
    pixels.row(index(x, y)) = rgb.transpose();
  }
};

double srgb_to_linear(double u);
double linear_to_srgb(double v);

/// Snaps a linear value onto the 8-bit sRGB grid (what a PNG round trip
/// preserves).
double quantize_srgb8(double v);

/// 8-bit sRGB PNG I/O. Throws IoError / MissingImage.
void write_png(const std::string& path, const Image& image);
Image read_png(const std::string& path);

/// Raw little-endian float32 dump of a scalar image (row-major), plus a
/// loader for test oracles.
void write_f32(const std::string& path, const Eigen::MatrixXd& values);
Eigen::MatrixXd read_f32(const std::string& path, int rows, int cols);

/// Normalizes a scalar map to [0,1] and writes a grayscale preview PNG.
void write_gray_preview(const std::string& path, const Eigen::MatrixXd& values,
                        int width, int height);

}  // namespace lfr
