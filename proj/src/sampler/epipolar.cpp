#include "lfr/sampler/epipolar.hpp"

#include <algorithm>
#include <cmath>

#include "lfr/core/error.hpp"

namespace lfr {

namespace {

std::vector<int> ranked_candidates(const Eigen::Vector3d& origin,
                                   const std::vector<CameraModel>& all,
                                   int exclude_view_id) {
  std::vector<std::pair<double, int>> ranked;
  for (const auto& cam : all) {
    if (cam.view_id == exclude_view_id) continue;
    ranked.emplace_back((cam.center() - origin).norm(), cam.view_id);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<int> ids;
  ids.reserve(ranked.size());
  for (const auto& [dist, id] : ranked) ids.push_back(id);
  return ids;
}

std::vector<int> choose_from_ranked(std::vector<int> ranked,
                                    const SamplerConfig& config, Rng& rng) {
  const int k = config.num_reference_views;
  if (static_cast<int>(ranked.size()) < k) {
    throw Error(ErrorCode::InsufficientViews,
                "need " + std::to_string(k) + " reference views, have " +
                    std::to_string(ranked.size()));
  }
  if (!config.training_mode) {
    ranked.resize(k);
    return ranked;
  }
  int pool = std::min<int>(config.candidate_pool, static_cast<int>(ranked.size()));
  pool = std::max(pool, k);
  ranked.resize(pool);
  // Partial Fisher-Yates for a uniform K-subset of the pool.
  for (int i = 0; i < k; ++i) {
    int j = i + static_cast<int>(rng.uniform_index(pool - i));
    std::swap(ranked[i], ranked[j]);
  }
  ranked.resize(k);
  return ranked;
}

}  // namespace

std::vector<int> select_reference_views(const CameraModel& target,
                                        const std::vector<CameraModel>& all,
                                        const SamplerConfig& config, Rng& rng) {
  return choose_from_ranked(
      ranked_candidates(target.center(), all, target.view_id), config, rng);
}

std::vector<int> select_reference_views_for_point(
    const Eigen::Vector3d& origin, const std::vector<CameraModel>& all,
    const SamplerConfig& config, Rng& rng) {
  return choose_from_ranked(ranked_candidates(origin, all, -1), config, rng);
}

std::array<std::pair<int, double>, 4> bilinear_taps(double x, double y,
                                                    int width, int height) {
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  x0 = std::clamp(x0, 0, width - 2 >= 0 ? width - 2 : 0);
  y0 = std::clamp(y0, 0, height - 2 >= 0 ? height - 2 : 0);
  int x1 = std::min(x0 + 1, width - 1);
  int y1 = std::min(y0 + 1, height - 1);
  double fx = std::clamp(x - x0, 0.0, 1.0);
  double fy = std::clamp(y - y0, 0.0, 1.0);
  return {{{y0 * width + x0, (1.0 - fx) * (1.0 - fy)},
           {y0 * width + x1, fx * (1.0 - fy)},
           {y1 * width + x0, (1.0 - fx) * fy},
           {y1 * width + x1, fx * fy}}};
}

EpipolarSampleGrid sample_epipolar_points(
    const Ray& ray, const SceneFrame& frame, Parametrization parametrization,
    const std::vector<CameraModel>& references,
    const std::vector<int>& view_ids, const SamplerConfig& config,
    CoordKind coord_kind) {
  const int p = config.points_per_view;
  const int k = static_cast<int>(view_ids.size());

  double lo = frame.near, hi = frame.far;
  if (parametrization == Parametrization::TwoSphere) {
    // Sample between the ray's sphere entry and exit, kept inside the
    // manifest delta bounds.
    try {
      auto [d1, d2] = sphere_intersection_deltas(ray, frame);
      lo = std::max(frame.near, d1);
      hi = std::min(frame.far, d2);
      if (!(lo < hi)) {
        lo = frame.near;
        hi = frame.far;
      }
    } catch (const Error&) {
      // Ray misses the sphere; fall back to the manifest range.
    }
  }

  EpipolarSampleGrid grid;
  grid.view_ids = view_ids;
  grid.deltas.resize(p);
  if (p == 1) {
    grid.deltas[0] = 0.5 * (lo + hi);
  } else {
    for (int i = 0; i < p; ++i) {
      double a = static_cast<double>(i) / (p - 1);
      if (config.depth_spacing == DepthSpacing::UniformInverseDepth) {
        double inv = (1.0 - a) / lo + a / hi;
        grid.deltas[i] = 1.0 / inv;
      } else {
        grid.deltas[i] = lo + a * (hi - lo);
      }
    }
  }

  grid.points3d.resize(p, 3);
  for (int i = 0; i < p; ++i) {
    grid.points3d.row(i) = point_at(ray, grid.deltas[i]).transpose();
  }

  const int coord_dim = coord_kind == CoordKind::Plucker ? 6 : 4;
  grid.pixels.assign(k, Eigen::MatrixXd::Zero(p, 2));
  grid.ray_coords.assign(k, Eigen::MatrixXd::Zero(p, coord_dim));
  grid.colors.assign(k, Eigen::MatrixXd::Zero(p, 3));
  grid.features.assign(k, Eigen::MatrixXd());
  grid.valid.assign(k, std::vector<uint8_t>(p, 0));

  for (int j = 0; j < k; ++j) {
    const CameraModel* cam = nullptr;
    for (const auto& c : references) {
      if (c.view_id == view_ids[j]) cam = &c;
    }
    if (!cam) {
      throw Error(ErrorCode::UnknownView,
                  "reference view " + std::to_string(view_ids[j]) +
                      " not in camera list");
    }
    for (int i = 0; i < p; ++i) {
      try {
        Projection proj = project(*cam, grid.points3d.row(i).transpose());
        // Pixel-area bounds: anything within half a pixel of the border
        // centers still lands on image content (bilinear taps clamp to the
        // edge). A strict center-to-center test would make the outermost
        // row/column flicker between valid and invalid from rounding alone
        // whenever the reference shares an axis with the target camera.
        bool inside = proj.depth > 0.0 && proj.pixel.x() >= -0.5 &&
                      proj.pixel.x() <= cam->width - 0.5 &&
                      proj.pixel.y() >= -0.5 &&
                      proj.pixel.y() <= cam->height - 0.5;
        if (!inside) continue;
        Ray epi_ray = ray_from_pixel(*cam, proj.pixel);
        Eigen::VectorXd coords;
        switch (coord_kind) {
          case CoordKind::Slab:
            coords = slab_coords(epi_ray, frame).vec() * frame.coord_scale;
            break;
          case CoordKind::TwoSphere:
            coords = sphere_coords(epi_ray, frame).vec();
            break;
          case CoordKind::Plucker:
            coords = plucker_coords(epi_ray).vec();
            break;
        }
        grid.pixels[j].row(i) = proj.pixel.transpose();
        grid.ray_coords[j].row(i) = coords.transpose();
        grid.valid[j][i] = 1;
      } catch (const Error&) {
        // Degenerate projection or parametrization for this point only.
        grid.valid[j][i] = 0;
      }
    }
  }
  return grid;
}

void gather_colors_and_features(
    EpipolarSampleGrid& grid, const std::vector<const Image*>& images,
    const std::vector<const Eigen::MatrixXd*>& feature_maps) {
  const int k = grid.num_views();
  if (static_cast<int>(images.size()) != k ||
      static_cast<int>(feature_maps.size()) != k) {
    throw Error(ErrorCode::ShapeMismatch,
                "expected one image and feature map per reference view");
  }
  const int p = grid.num_points();
  for (int j = 0; j < k; ++j) {
    const Image& img = *images[j];
    const Eigen::MatrixXd& fmap = *feature_maps[j];
    if (fmap.rows() != img.pixels.rows()) {
      throw Error(ErrorCode::ShapeMismatch,
                  "feature map spatial size differs from image for view " +
                      std::to_string(grid.view_ids[j]));
    }
    grid.colors[j] = Eigen::MatrixXd::Zero(p, 3);
    grid.features[j] = Eigen::MatrixXd::Zero(p, fmap.cols());
    for (int i = 0; i < p; ++i) {
      if (!grid.valid[j][i]) continue;
      auto taps = bilinear_taps(grid.pixels[j](i, 0), grid.pixels[j](i, 1),
                                img.width, img.height);
      for (const auto& [row, w] : taps) {
        grid.colors[j].row(i) += w * img.pixels.row(row);
        grid.features[j].row(i) += w * fmap.row(row);
      }
    }
  }
}

}  // namespace lfr
