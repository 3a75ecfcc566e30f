#include "lfr/metrics/metrics.hpp"

#include <cmath>
#include <sstream>

#include "lfr/core/error.hpp"

namespace lfr {

namespace {

void check_shapes(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorCode::ShapeMismatch,
                "image sizes differ: " + std::to_string(a.width) + "x" +
                    std::to_string(a.height) + " vs " + std::to_string(b.width) +
                    "x" + std::to_string(b.height));
  }
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2 with L = 1
constexpr double kC2 = 0.03 * 0.03;

Eigen::Matrix<double, kWindow, kWindow> gaussian_window() {
  Eigen::Matrix<double, kWindow, kWindow> w;
  const int half = kWindow / 2;
  double sum = 0.0;
  for (int y = 0; y < kWindow; ++y) {
    for (int x = 0; x < kWindow; ++x) {
      double dx = x - half, dy = y - half;
      w(y, x) = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
      sum += w(y, x);
    }
  }
  w /= sum;
  return w;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  check_shapes(a, b);
  double mse = (a.pixels - b.pixels).squaredNorm() /
               static_cast<double>(a.pixels.size());
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, -10.0 * std::log10(mse));
}

double ssim(const Image& a, const Image& b) {
  check_shapes(a, b);
  if (a.width < kWindow || a.height < kWindow) {
    throw Error(ErrorCode::ImageTooSmall,
                "SSIM needs at least " + std::to_string(kWindow) + "x" +
                    std::to_string(kWindow) + " pixels");
  }
  static const auto window = gaussian_window();
  const int half = kWindow / 2;
  double channel_sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    double map_sum = 0.0;
    int count = 0;
    for (int cy = half; cy < a.height - half; ++cy) {
      for (int cx = half; cx < a.width - half; ++cx) {
        double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
        for (int wy = 0; wy < kWindow; ++wy) {
          for (int wx = 0; wx < kWindow; ++wx) {
            double wgt = window(wy, wx);
            double va = a.pixels(a.index(cx + wx - half, cy + wy - half), c);
            double vb = b.pixels(b.index(cx + wx - half, cy + wy - half), c);
            mu_a += wgt * va;
            mu_b += wgt * vb;
            aa += wgt * va * va;
            bb += wgt * vb * vb;
            ab += wgt * va * vb;
          }
        }
        double var_a = aa - mu_a * mu_a;
        double var_b = bb - mu_b * mu_b;
        double cov = ab - mu_a * mu_b;
        double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
        double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
        map_sum += num / den;
        ++count;
      }
    }
    channel_sum += map_sum / count;
  }
  return channel_sum / 3.0;
}

double avg_metric(double psnr_db, double ssim_value,
                  std::optional<double> lpips) {
  double a = std::pow(10.0, -psnr_db / 10.0);
  double b = std::sqrt(std::max(0.0, 1.0 - ssim_value));
  if (lpips) {
    return std::cbrt(a * b * *lpips);
  }
  return std::sqrt(a * b);
}

void EvalReport::finalize() {
  mean = EvalRow{};
  mean.name = "mean";
  if (rows.empty()) return;
  bool all_lpips = true;
  double lpips_sum = 0.0;
  for (auto& row : rows) {
    row.average = avg_metric(row.psnr, row.ssim, row.lpips);
    mean.psnr += row.psnr;
    mean.ssim += row.ssim;
    if (row.lpips) {
      lpips_sum += *row.lpips;
    } else {
      all_lpips = false;
    }
  }
  mean.psnr /= rows.size();
  mean.ssim /= rows.size();
  if (all_lpips) mean.lpips = lpips_sum / rows.size();
  mean.average = avg_metric(mean.psnr, mean.ssim, mean.lpips);
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  bool any_lpips = mean.lpips.has_value();
  os << "# columns: image psnr_db ssim "
     << (any_lpips ? "lpips" : "lpips(absent)") << " average\n";
  auto emit = [&](const EvalRow& row) {
    os << row.name << "\t";
    char buf[96];
    if (row.lpips) {
      std::snprintf(buf, sizeof buf, "%.4f\t%.6f\t%.6f\t%.6f", row.psnr,
                    row.ssim, *row.lpips, row.average);
    } else {
      std::snprintf(buf, sizeof buf, "%.4f\t%.6f\t-\t%.6f", row.psnr, row.ssim,
                    row.average);
    }
    os << buf << "\n";
  };
  for (const auto& row : rows) emit(row);
  emit(mean);
  return os.str();
}

}  // namespace lfr
