#include "lfr/render/renderer.hpp"

#include <cmath>

#include "lfr/core/parallel.hpp"

namespace lfr {

RenderContext make_render_context(const Scene& scene, const ModelConfig& model,
                                  const SamplerConfig& sampler,
                                  const ModelParams& params) {
  RenderContext ctx;
  ctx.scene = &scene;
  ctx.model = model;
  ctx.sampler = sampler;
  ctx.sampler.training_mode = false;
  if (model.variant != ModelVariant::Vanilla) {
    for (int id : scene.train_ids) {
      ctx.feature_maps[id] = conv_features(scene.view(id).image, params, model);
    }
  }
  return ctx;
}

namespace {

struct RaySetup {
  std::vector<CameraModel> ref_cameras;
  std::vector<const Image*> ref_images;
  std::vector<const Eigen::MatrixXd*> ref_features;
};

RaySetup setup_for_refs(const RenderContext& ctx, const std::vector<int>& refs) {
  RaySetup s;
  for (int id : refs) {
    s.ref_cameras.push_back(ctx.scene->view(id).camera);
    s.ref_images.push_back(&ctx.scene->view(id).image);
    s.ref_features.push_back(&ctx.feature_maps.at(id));
  }
  return s;
}

PlainForward forward_with_refs(const ModelParams& params,
                               const RenderContext& ctx, const Ray& ray,
                               const std::vector<int>& refs,
                               const RaySetup& setup) {
  Eigen::VectorXd enc = encode_target_ray(ray, ctx.scene->frame, ctx.model);
  EpipolarSampleGrid grid;
  if (ctx.model.variant != ModelVariant::Vanilla) {
    grid = sample_epipolar_points(ray, ctx.scene->frame,
                                  ctx.scene->parametrization, setup.ref_cameras,
                                  refs, ctx.sampler, ctx.model.coord_kind());
    gather_colors_and_features(grid, setup.ref_images, setup.ref_features);
  }
  return forward_ray_plain(ctx.model, params, grid, enc);
}

}  // namespace

PlainForward render_ray(const ModelParams& params, const RenderContext& ctx,
                        const Ray& ray) {
  Rng rng(0);  // inference selection is deterministic
  std::vector<int> refs = select_reference_views_for_point(
      ray.origin, ctx.scene->cameras_for(ctx.scene->train_ids), ctx.sampler,
      rng);
  return forward_with_refs(params, ctx, ray, refs, setup_for_refs(ctx, refs));
}

RenderOutputs render_image(const ModelParams& params, const RenderContext& ctx,
                           const RenderRequest& request) {
  if (request.block_size < 1) {
    throw Error(ErrorCode::ConfigError, "block_size must be >= 1");
  }
  const CameraModel& cam = request.camera;
  const int total = cam.width * cam.height;

  std::vector<int> refs;
  RaySetup setup;
  if (ctx.model.variant != ModelVariant::Vanilla) {
    Rng rng(0);
    refs = select_reference_views(
        cam, ctx.scene->cameras_for(ctx.scene->train_ids), ctx.sampler, rng);
    setup = setup_for_refs(ctx, refs);
  }
  if (request.want_beta && ctx.sampler.num_reference_views != 3) {
    throw Error(ErrorCode::ConfigError,
                "view-attention images need exactly 3 reference views");
  }

  RenderOutputs out;
  out.color = Image::zeros(cam.width, cam.height);
  out.depth = Eigen::VectorXd::Zero(total);
  out.disparity = Eigen::VectorXd::Zero(total);
  if (request.want_beta) out.beta_map = Image::zeros(cam.width, cam.height);
  std::vector<uint8_t> flagged(total, 0);

  for (int begin = 0; begin < total; begin += request.block_size) {
    int end = std::min(total, begin + request.block_size);
    parallel_for(begin, end, [&](int64_t idx) {
      int x = static_cast<int>(idx) % cam.width;
      int y = static_cast<int>(idx) / cam.width;
      try {
        Ray ray = ray_from_pixel(cam, {double(x), double(y)});
        PlainForward fw = forward_with_refs(params, ctx, ray, refs, setup);
        out.color.pixels.row(idx) = fw.rgb.transpose();
        if (request.want_disparity && fw.trace.beta.size() > 0) {
          double depth = fw.trace.beta.dot(fw.trace.alpha * fw.trace.deltas);
          out.depth[idx] = depth;
          out.disparity[idx] = depth > 0.0 ? 1.0 / depth : 0.0;
        }
        if (request.want_beta) {
          out.beta_map.pixels.row(idx) = fw.trace.beta.transpose();
        }
      } catch (const Error&) {
        flagged[idx] = 1;
      }
    });
  }
  for (int idx = 0; idx < total; ++idx) {
    if (!flagged[idx]) continue;
    out.flagged.push_back(idx);
    if (request.debug_magenta) out.color.pixels.row(idx) << 1.0, 0.0, 1.0;
  }
  return out;
}

std::pair<int, Eigen::VectorXd> correspondence_map(const RenderTrace& trace,
                                                   int view_j) {
  if (view_j < 0 || view_j >= trace.alpha.rows() || !trace.view_valid[view_j]) {
    throw Error(ErrorCode::AllPointsMasked,
                "view " + std::to_string(view_j) +
                    " has no valid epipolar points");
  }
  Eigen::VectorXd dist = trace.alpha.row(view_j).transpose();
  int best = 0;
  for (int i = 1; i < dist.size(); ++i) {
    if (dist[i] > dist[best]) best = i;  // strict: ascending-index tie-break
  }
  return {best, dist};
}

Eigen::VectorXd log_normalized(const Eigen::VectorXd& distribution) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(distribution.size());
  double max_val = distribution.maxCoeff();
  if (max_val <= 0.0) return out;
  const double floor = std::log(1e-12);
  for (int i = 0; i < distribution.size(); ++i) {
    if (distribution[i] <= 0.0) continue;
    double l = std::log(distribution[i] / max_val);  // <= 0
    out[i] = std::max(0.0, 1.0 - l / floor);
  }
  return out;
}

void EpiRequest::validate() const {
  if (rows < 2 || cols < 2) {
    throw Error(ErrorCode::ConfigError, "EPI resolutions must be >= 2");
  }
  bool used[4] = {false, false, false, false};
  for (int i : {fixed_indices[0], fixed_indices[1], row_index, col_index}) {
    if (i < 0 || i > 3 || used[i]) {
      throw Error(ErrorCode::ConfigError,
                  "EPI indices must be a permutation of the 4 slab coords");
    }
    used[i] = true;
  }
  if (!(row_min < row_max) || !(col_min < col_max)) {
    throw Error(ErrorCode::ConfigError, "EPI ranges must have min < max");
  }
}

Image epi_slice(const ModelParams& params, const RenderContext& ctx,
                const EpiRequest& request) {
  request.validate();
  if (ctx.model.parametrization != Parametrization::Slab) {
    throw Error(ErrorCode::ConfigError,
                "EPI slices need slab ray coordinates");
  }
  const SceneFrame& frame = ctx.scene->frame;
  Image out = Image::zeros(request.cols, request.rows);

  parallel_for(0, request.rows, [&](int64_t r) {
    double row_val = request.row_min +
                     (request.row_max - request.row_min) * double(r) /
                         (request.rows - 1);
    for (int c = 0; c < request.cols; ++c) {
      double col_val = request.col_min +
                       (request.col_max - request.col_min) * double(c) /
                           (request.cols - 1);
      Eigen::Vector4d coords;
      coords[request.fixed_indices[0]] = request.fixed_values[0];
      coords[request.fixed_indices[1]] = request.fixed_values[1];
      coords[request.row_index] = row_val;
      coords[request.col_index] = col_val;
      Eigen::Vector3d a(coords[0], coords[1], frame.z_st);
      Eigen::Vector3d b(coords[2], coords[3], frame.z_uv);
      Eigen::Vector3d dir = b - a;
      try {
        if (std::abs(dir.z()) <= 1e-9) {
          throw Error(ErrorCode::ParallelRay, "ray parallel to slab planes");
        }
        // Normalize so delta equals depth: origin on z = 0, dir.z = 1.
        dir /= dir.z();
        Ray ray{a - a.z() * dir, dir, std::nullopt};
        PlainForward fw = render_ray(params, ctx, ray);
        out.pixels.row(out.index(c, static_cast<int>(r))) = fw.rgb.transpose();
      } catch (const Error&) {
        out.pixels.row(out.index(c, static_cast<int>(r))) << 1.0, 0.0, 1.0;
      }
    }
  });
  return out;
}

Image view_attention_image(const ModelParams& params, const RenderContext& ctx,
                           const CameraModel& camera) {
  if (ctx.sampler.num_reference_views != 3) {
    throw Error(ErrorCode::ConfigError,
                "view-attention images need exactly 3 reference views");
  }
  RenderRequest request;
  request.camera = camera;
  request.want_beta = true;
  return render_image(params, ctx, request).beta_map;
}

}  // namespace lfr
