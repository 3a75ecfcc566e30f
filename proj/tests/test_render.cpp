#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lfr/core/error.hpp"
#include "lfr/render/renderer.hpp"
#include "lfr/scene/synthetic.hpp"

using namespace lfr;

namespace {

Scene tiny_scene(int num_cameras = 5, int image_size = 16) {
  SyntheticSceneSpec spec;
  PlaneSpec plane;
  plane.depth = 2.0;
  plane.cell_size = 0.5;
  plane.color_a = {0.8, 0.6, 0.2};
  plane.color_b = {0.1, 0.2, 0.5};
  spec.planes = {plane};
  spec.rig = RigKind::Line;
  spec.num_cameras = num_cameras;
  spec.rig_extent = 0.3;
  spec.image_size = image_size;
  spec.focal = image_size;
  spec.frame.z_st = 1.0;
  spec.frame.z_uv = 3.0;
  spec.frame.near = 1.0;
  spec.frame.far = 3.5;
  spec.frame.sphere_center = {0.0, 0.0, 2.0};
  spec.frame.sphere_radius = 5.0;
  // Hold out the middle camera: its frustum is covered by references on
  // both sides, so a correct renderer flags nothing.
  spec.test_ids = {num_cameras / 2};
  return generate_synthetic(spec);
}

struct Fixture {
  Scene scene;
  ModelConfig model;
  SamplerConfig sampler;
  ModelParams params;
  RenderContext ctx;

  explicit Fixture(int refs = 2, uint64_t seed = 1)
      : scene(tiny_scene()) {
    model.model_dim = 16;
    model.num_blocks = 1;
    model.cam_embed_dim = 8;
    model.conv_channels = 4;
    model.num_views = static_cast<int>(scene.views.size());
    sampler.num_reference_views = refs;
    sampler.candidate_pool = refs + 1;
    sampler.points_per_view = 4;
    Rng rng(seed);
    params = ModelParams::init(model, rng);
    ctx = make_render_context(scene, model, sampler, params);
  }
};

}  // namespace

TEST_CASE("rendered images have the right shape and valid colors") {
  Fixture f;
  RenderRequest request;
  request.camera = f.scene.view(f.scene.test_ids[0]).camera;
  request.want_disparity = true;
  RenderOutputs out = render_image(f.params, f.ctx, request);
  CHECK(out.color.width == 16);
  CHECK(out.color.height == 16);
  CHECK(out.flagged.empty());
  CHECK(out.color.pixels.minCoeff() > 0.0);
  CHECK(out.color.pixels.maxCoeff() < 1.0);
  REQUIRE(out.depth.size() == 16 * 16);
  REQUIRE(out.disparity.size() == 16 * 16);
  // Weighted putative depth stays within the sampling range, and disparity
  // is its reciprocal.
  for (int i = 0; i < out.depth.size(); ++i) {
    CHECK(out.depth[i] >= f.scene.frame.near - 1e-9);
    CHECK(out.depth[i] <= f.scene.frame.far + 1e-9);
    CHECK(out.disparity[i] == doctest::Approx(1.0 / out.depth[i]).epsilon(1e-12));
  }
}

TEST_CASE("block size never changes the rendered values") {
  Fixture f;
  RenderRequest a;
  a.camera = f.scene.view(f.scene.test_ids[0]).camera;
  a.block_size = 1;
  a.want_disparity = true;
  RenderRequest b = a;
  b.block_size = 4096;
  RenderRequest c = a;
  c.block_size = 37;
  RenderOutputs ra = render_image(f.params, f.ctx, a);
  RenderOutputs rb = render_image(f.params, f.ctx, b);
  RenderOutputs rc = render_image(f.params, f.ctx, c);
  CHECK((ra.color.pixels - rb.color.pixels).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ra.color.pixels - rc.color.pixels).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ra.disparity - rb.disparity).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("repeated renders are bitwise identical") {
  Fixture f;
  RenderRequest request;
  request.camera = f.scene.view(f.scene.test_ids[0]).camera;
  RenderOutputs a = render_image(f.params, f.ctx, request);
  RenderOutputs b = render_image(f.params, f.ctx, request);
  CHECK((a.color.pixels - b.color.pixels).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("render_ray agrees with trace invariants") {
  Fixture f;
  Ray ray{Eigen::Vector3d(0.0, 0.0, 0.0), Eigen::Vector3d(0.01, 0.0, 1.0), {}};
  PlainForward out = render_ray(f.params, f.ctx, ray);
  CHECK(out.trace.alpha.rows() == 2);
  for (int j = 0; j < out.trace.alpha.rows(); ++j) {
    if (out.trace.view_valid[j]) {
      CHECK(std::abs(out.trace.alpha.row(j).sum() - 1.0) < 1e-5);
    }
  }
  CHECK(std::abs(out.trace.beta.sum() - 1.0) < 1e-5);
}

TEST_CASE("correspondence uses the strongest weight with ascending ties") {
  RenderTrace trace;
  trace.alpha = Eigen::MatrixXd(2, 4);
  trace.alpha << 0.1, 0.6, 0.2, 0.1, 0.25, 0.25, 0.25, 0.25;
  trace.view_valid = {1, 1};
  auto [idx0, dist0] = correspondence_map(trace, 0);
  CHECK(idx0 == 1);
  CHECK(dist0.size() == 4);
  CHECK(dist0[1] == doctest::Approx(0.6));
  // Uniform distribution: ties break to the lowest index.
  auto [idx1, dist1] = correspondence_map(trace, 1);
  CHECK(idx1 == 0);

  trace.view_valid = {1, 0};
  CHECK_THROWS_AS(correspondence_map(trace, 1), Error);
  try {
    correspondence_map(trace, 1);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AllPointsMasked);
  }
}

TEST_CASE("log normalization maps the peak to one and keeps zeros at zero") {
  Eigen::VectorXd dist(4);
  dist << 0.0, 1e-4, 1e-2, 1.0;
  Eigen::VectorXd out = log_normalized(dist);
  CHECK(out[0] == 0.0);
  CHECK(out[3] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out[1] < out[2]);
  CHECK(out[2] < out[3]);
  CHECK(out.minCoeff() >= 0.0);
}

TEST_CASE("epi request validation rejects index clashes and tiny grids") {
  EpiRequest ok;
  CHECK_NOTHROW(ok.validate());
  EpiRequest clash = ok;
  clash.row_index = 1;  // collides with fixed_indices {1, 3}
  CHECK_THROWS_AS(clash.validate(), Error);
  EpiRequest dup = ok;
  dup.fixed_indices = {0, 0};
  CHECK_THROWS_AS(dup.validate(), Error);
  EpiRequest tiny = ok;
  tiny.rows = 1;
  CHECK_THROWS_AS(tiny.validate(), Error);
  EpiRequest inverted = ok;
  inverted.row_min = 1.0;
  inverted.row_max = -1.0;
  CHECK_THROWS_AS(inverted.validate(), Error);
}

TEST_CASE("epi slices render on slab scenes and reject others") {
  Fixture f;
  EpiRequest request;
  request.rows = 8;
  request.cols = 8;
  request.fixed_values = {0.0, 0.0};
  request.row_min = -0.2;
  request.row_max = 0.2;
  request.col_min = -0.2;
  request.col_max = 0.2;
  Image epi = epi_slice(f.params, f.ctx, request);
  CHECK(epi.width == 8);
  CHECK(epi.height == 8);
  CHECK(epi.pixels.allFinite());

  RenderContext sphere_ctx = f.ctx;
  sphere_ctx.model.parametrization = Parametrization::TwoSphere;
  CHECK_THROWS_AS(epi_slice(f.params, sphere_ctx, request), Error);
}

TEST_CASE("view attention images require exactly three references") {
  Fixture two(2);
  CHECK_THROWS_AS(view_attention_image(
                      two.params, two.ctx,
                      two.scene.view(two.scene.test_ids[0]).camera),
                  Error);

  Fixture three(3);
  Image beta = view_attention_image(
      three.params, three.ctx, three.scene.view(three.scene.test_ids[0]).camera);
  CHECK(beta.width == 16);
  CHECK(beta.height == 16);
  // Each pixel's channels are view weights summing to one.
  for (int i = 0; i < beta.pixels.rows(); ++i) {
    CHECK(std::abs(beta.pixels.row(i).sum() - 1.0) < 1e-5);
    CHECK(beta.pixels.row(i).minCoeff() >= 0.0);
  }
}

TEST_CASE("unrenderable rays become flagged pixels, not failures") {
  Fixture f;
  // A camera pointing away from the slab planes: every ray is degenerate.
  RenderRequest request;
  request.camera = f.scene.view(f.scene.test_ids[0]).camera;
  Eigen::Matrix3d flip;
  flip << 1, 0, 0, 0, -1, 0, 0, 0, -1;  // 180-degree turn, looking down -z
  request.camera.rotation = flip * request.camera.rotation;
  request.debug_magenta = true;
  RenderOutputs out = render_image(f.params, f.ctx, request);
  CHECK(out.flagged.size() == 16 * 16);
  // Magenta debug fill.
  int i = out.flagged[0];
  CHECK(out.color.pixels(i, 0) == 1.0);
  CHECK(out.color.pixels(i, 1) == 0.0);
  CHECK(out.color.pixels(i, 2) == 1.0);
  CHECK(out.depth[i] == 0.0);

  request.debug_magenta = false;
  RenderOutputs zero = render_image(f.params, f.ctx, request);
  CHECK(zero.color.pixels.row(i).norm() == 0.0);
}
