#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lfr/io/image.hpp"

namespace lfr {

/// Peak signal-to-noise ratio in dB for images in [0,1] (peak 1.0),
/// capped at 99 dB when the MSE vanishes. Throws ShapeMismatch.
double psnr(const Image& a, const Image& b);

/// Channel-averaged SSIM with an 11x11 Gaussian window (sigma 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range 1.0), evaluated only where the
/// window fits inside the image. Throws ShapeMismatch, ImageTooSmall.
double ssim(const Image& a, const Image& b);

/// Geometric mean of 10^(-psnr/10), sqrt(1 - ssim), and lpips when given.
double avg_metric(double psnr_db, double ssim_value,
                  std::optional<double> lpips = std::nullopt);

struct EvalRow {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> lpips;
  double average = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  EvalRow mean;  // name "mean"; metrics averaged, average recomputed

  void finalize();
  std::string to_text() const;
};

}  // namespace lfr
