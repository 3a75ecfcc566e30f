#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "lfr/core/error.hpp"
#include "lfr/core/rng.hpp"
#include "lfr/sampler/epipolar.hpp"

using namespace lfr;

namespace {

CameraModel make_camera(int view_id, const Eigen::Vector3d& center,
                        double focal = 50.0, int size = 32) {
  CameraModel cam;
  cam.fx = cam.fy = focal;
  cam.cx = cam.cy = (size - 1) / 2.0;
  cam.width = cam.height = size;
  cam.view_id = view_id;
  cam.rotation = Eigen::Matrix3d::Identity();
  cam.translation = -center;  // looking down +z
  return cam;
}

std::vector<CameraModel> line_rig(int count, double spacing) {
  std::vector<CameraModel> cams;
  for (int i = 0; i < count; ++i) {
    cams.push_back(make_camera(i, Eigen::Vector3d(i * spacing, 0.0, 0.0)));
  }
  return cams;
}

SceneFrame default_frame() {
  SceneFrame frame;
  frame.z_st = 1.0;
  frame.z_uv = 3.0;
  frame.near = 1.0;
  frame.far = 3.0;
  frame.sphere_center = Eigen::Vector3d(0.0, 0.0, 2.0);
  frame.sphere_radius = 4.0;
  return frame;
}

}  // namespace

TEST_CASE("inference mode selects the K nearest views") {
  auto cams = line_rig(6, 1.0);
  CameraModel target = make_camera(99, Eigen::Vector3d(2.2, 0.0, 0.0));
  SamplerConfig config;
  config.num_reference_views = 3;
  config.candidate_pool = 5;
  config.training_mode = false;
  Rng rng(0);
  std::vector<int> ids = select_reference_views(target, cams, config, rng);
  std::set<int> got(ids.begin(), ids.end());
  CHECK(got == std::set<int>({1, 2, 3}));
}

TEST_CASE("distance ties break by ascending view id") {
  auto cams = line_rig(4, 1.0);
  // Equidistant from cameras 1 and 2.
  CameraModel target = make_camera(99, Eigen::Vector3d(1.5, 0.0, 0.0));
  SamplerConfig config;
  config.num_reference_views = 1;
  config.candidate_pool = 1;
  Rng rng(0);
  std::vector<int> ids = select_reference_views(target, cams, config, rng);
  REQUIRE(ids.size() == 1);
  CHECK(ids[0] == 1);
}

TEST_CASE("training mode draws K-subsets of the N nearest candidates") {
  auto cams = line_rig(8, 1.0);
  CameraModel target = make_camera(99, Eigen::Vector3d(0.1, 0.0, 0.0));
  SamplerConfig config;
  config.num_reference_views = 2;
  config.candidate_pool = 4;
  config.training_mode = true;
  Rng rng(7);
  // The 4 nearest to x = 0.1 are views 0..3.
  std::set<int> pool = {0, 1, 2, 3};
  std::set<int> seen;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<int> ids = select_reference_views(target, cams, config, rng);
    REQUIRE(ids.size() == 2);
    CHECK(ids[0] != ids[1]);
    for (int id : ids) {
      CHECK(pool.count(id) == 1);
      seen.insert(id);
    }
  }
  CHECK(seen == pool);  // every candidate gets picked eventually
}

TEST_CASE("selection never includes the target view and is seed-deterministic") {
  auto cams = line_rig(6, 1.0);
  SamplerConfig config;
  config.num_reference_views = 3;
  config.candidate_pool = 5;
  config.training_mode = true;
  for (int trial = 0; trial < 200; ++trial) {
    Rng rng(trial);
    std::vector<int> ids = select_reference_views(cams[2], cams, config, rng);
    CHECK(std::find(ids.begin(), ids.end(), 2) == ids.end());
  }
  Rng a(11), b(11);
  for (int trial = 0; trial < 50; ++trial) {
    CHECK(select_reference_views(cams[0], cams, config, a) ==
          select_reference_views(cams[0], cams, config, b));
  }
}

TEST_CASE("too few usable views raises InsufficientViews") {
  auto cams = line_rig(2, 1.0);
  SamplerConfig config;
  config.num_reference_views = 3;
  config.candidate_pool = 4;
  Rng rng(0);
  CHECK_THROWS_AS(select_reference_views(cams[0], cams, config, rng), Error);
  try {
    select_reference_views(cams[0], cams, config, rng);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientViews);
  }
}

TEST_CASE("free-point selection ranks by distance from the origin") {
  auto cams = line_rig(5, 1.0);
  SamplerConfig config;
  config.num_reference_views = 2;
  config.candidate_pool = 2;
  Rng rng(0);
  std::vector<int> ids = select_reference_views_for_point(
      Eigen::Vector3d(3.1, 0.0, 0.0), cams, config, rng);
  std::set<int> got(ids.begin(), ids.end());
  CHECK(got == std::set<int>({3, 4}));
}

TEST_CASE("uniform delta spacing hits the exact endpoints") {
  SceneFrame frame = default_frame();
  SamplerConfig config;
  config.points_per_view = 3;
  config.depth_spacing = DepthSpacing::UniformDelta;
  auto cams = line_rig(2, 0.5);
  Ray ray{Eigen::Vector3d(0.25, 0.0, 0.0), Eigen::Vector3d(0.0, 0.0, 1.0), {}};
  EpipolarSampleGrid grid = sample_epipolar_points(
      ray, frame, Parametrization::Slab, cams, {0, 1}, config, CoordKind::Slab);
  REQUIRE(grid.num_points() == 3);
  CHECK(grid.deltas[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grid.deltas[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(grid.deltas[2] == doctest::Approx(3.0).epsilon(1e-12));
  // 3D points live on the ray.
  for (int p = 0; p < 3; ++p) {
    Eigen::Vector3d expect = point_at(ray, grid.deltas[p]);
    CHECK((grid.points3d.row(p).transpose() - expect).norm() < 1e-12);
  }
}

TEST_CASE("a single sample sits at the range midpoint") {
  SceneFrame frame = default_frame();
  SamplerConfig config;
  config.points_per_view = 1;
  config.depth_spacing = DepthSpacing::UniformDelta;
  auto cams = line_rig(2, 0.5);
  Ray ray{Eigen::Vector3d::Zero(), Eigen::Vector3d(0.0, 0.0, 1.0), {}};
  EpipolarSampleGrid grid = sample_epipolar_points(
      ray, frame, Parametrization::Slab, cams, {0, 1}, config, CoordKind::Slab);
  REQUIRE(grid.num_points() == 1);
  CHECK(grid.deltas[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("inverse-depth spacing is uniform in one over delta") {
  SceneFrame frame = default_frame();
  SamplerConfig config;
  config.points_per_view = 5;
  config.depth_spacing = DepthSpacing::UniformInverseDepth;
  auto cams = line_rig(2, 0.5);
  Ray ray{Eigen::Vector3d::Zero(), Eigen::Vector3d(0.0, 0.0, 1.0), {}};
  EpipolarSampleGrid grid = sample_epipolar_points(
      ray, frame, Parametrization::Slab, cams, {0, 1}, config, CoordKind::Slab);
  REQUIRE(grid.num_points() == 5);
  CHECK(grid.deltas[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grid.deltas[4] == doctest::Approx(3.0).epsilon(1e-12));
  double step = 1.0 / grid.deltas[1] - 1.0 / grid.deltas[0];
  for (int p = 2; p < 5; ++p) {
    double s = 1.0 / grid.deltas[p] - 1.0 / grid.deltas[p - 1];
    CHECK(std::abs(s - step) < 1e-12);
  }
  // Deltas strictly increase even though inverse depth decreases.
  for (int p = 1; p < 5; ++p) CHECK(grid.deltas[p] > grid.deltas[p - 1]);
}

TEST_CASE("projected pixels obey the stereo disparity relation") {
  SceneFrame frame = default_frame();
  SamplerConfig config;
  config.points_per_view = 4;
  config.depth_spacing = DepthSpacing::UniformDelta;
  double baseline = 0.2;
  auto cams = std::vector<CameraModel>{
      make_camera(0, Eigen::Vector3d::Zero()),
      make_camera(1, Eigen::Vector3d(baseline, 0.0, 0.0))};
  // Target ray straight down the first camera's axis.
  Ray ray{Eigen::Vector3d::Zero(), Eigen::Vector3d(0.0, 0.0, 1.0), {}};
  EpipolarSampleGrid grid = sample_epipolar_points(
      ray, frame, Parametrization::Slab, cams, {0, 1}, config, CoordKind::Slab);
  for (int p = 0; p < 4; ++p) {
    double z = grid.deltas[p];
    // View 0 sees the point at the principal pixel for every depth.
    CHECK(grid.pixels[0](p, 0) == doctest::Approx(cams[0].cx).epsilon(1e-12));
    // View 1 sees it shifted by the classic fx * b / z disparity.
    double expect = cams[1].cx - cams[1].fx * baseline / z;
    CHECK(grid.pixels[1](p, 0) == doctest::Approx(expect).epsilon(1e-10));
    CHECK(grid.pixels[1](p, 1) == doctest::Approx(cams[1].cy).epsilon(1e-10));
  }
}

TEST_CASE("ray coordinates match the reference pixel's own ray") {
  SceneFrame frame = default_frame();
  SamplerConfig config;
  config.points_per_view = 3;
  config.depth_spacing = DepthSpacing::UniformDelta;
  auto cams = line_rig(2, 0.4);
  Ray ray{Eigen::Vector3d(0.1, 0.05, 0.0), Eigen::Vector3d(0.02, -0.01, 1.0), {}};
  EpipolarSampleGrid grid = sample_epipolar_points(
      ray, frame, Parametrization::Slab, cams, {0, 1}, config, CoordKind::Slab);
  for (int j = 0; j < 2; ++j) {
    for (int p = 0; p < 3; ++p) {
      if (!grid.valid[j][p]) continue;
      Ray ref_ray = ray_from_pixel(cams[j], grid.pixels[j].row(p).transpose());
      SlabCoords expect = slab_coords(ref_ray, frame);
      CHECK((grid.ray_coords[j].row(p).transpose() - expect.vec()).norm() <
            1e-10);
    }
  }
}

TEST_CASE("plucker override produces six canonical columns") {
  SceneFrame frame = default_frame();
  SamplerConfig config;
  config.points_per_view = 2;
  auto cams = line_rig(2, 0.4);
  Ray ray{Eigen::Vector3d::Zero(), Eigen::Vector3d(0.0, 0.0, 1.0), {}};
  EpipolarSampleGrid grid =
      sample_epipolar_points(ray, frame, Parametrization::Slab, cams, {0, 1},
                             config, CoordKind::Plucker);
  for (int j = 0; j < 2; ++j) {
    REQUIRE(grid.ray_coords[j].cols() == 6);
    for (int p = 0; p < 2; ++p) {
      if (!grid.valid[j][p]) continue;
      CHECK(grid.ray_coords[j].row(p).head(3).norm() ==
            doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("out-of-bounds or behind-camera samples are marked invalid") {
  SceneFrame frame = default_frame();
  SamplerConfig config;
  config.points_per_view = 4;
  config.depth_spacing = DepthSpacing::UniformDelta;
  // A reference camera far off to the side: the ray's samples fall outside
  // its narrow field of view.
  auto cams = std::vector<CameraModel>{
      make_camera(0, Eigen::Vector3d::Zero()),
      make_camera(1, Eigen::Vector3d(100.0, 0.0, 0.0))};
  Ray ray{Eigen::Vector3d::Zero(), Eigen::Vector3d(0.0, 0.0, 1.0), {}};
  EpipolarSampleGrid grid = sample_epipolar_points(
      ray, frame, Parametrization::Slab, cams, {0, 1}, config, CoordKind::Slab);
  for (int p = 0; p < 4; ++p) {
    CHECK(grid.valid[0][p] == 1);
    CHECK(grid.valid[1][p] == 0);
  }
  CHECK(grid.view_has_valid_point(0));
  CHECK(!grid.view_has_valid_point(1));

  // A camera behind the samples sees them at negative depth: invalid too.
  auto cams2 = std::vector<CameraModel>{
      make_camera(0, Eigen::Vector3d::Zero()),
      make_camera(1, Eigen::Vector3d(0.0, 0.0, 10.0))};
  EpipolarSampleGrid grid2 = sample_epipolar_points(
      ray, frame, Parametrization::Slab, cams2, {0, 1}, config, CoordKind::Slab);
  for (int p = 0; p < 4; ++p) CHECK(grid2.valid[1][p] == 0);
}

TEST_CASE("a reference camera on the target ray stays well defined") {
  // Degenerate epipole: the reference center lies on the target ray, so all
  // samples project to (nearly) the same pixel. That must not throw, and
  // validity must reflect plain bounds/depth checks.
  SceneFrame frame = default_frame();
  SamplerConfig config;
  config.points_per_view = 4;
  config.depth_spacing = DepthSpacing::UniformDelta;
  auto cams = std::vector<CameraModel>{
      make_camera(0, Eigen::Vector3d(0.0, 0.0, -1.0)),
      make_camera(1, Eigen::Vector3d(0.3, 0.0, 0.0))};
  Ray ray{Eigen::Vector3d::Zero(), Eigen::Vector3d(0.0, 0.0, 1.0), {}};
  EpipolarSampleGrid grid = sample_epipolar_points(
      ray, frame, Parametrization::Slab, cams, {0, 1}, config, CoordKind::Slab);
  for (int p = 0; p < 4; ++p) {
    CHECK(grid.valid[0][p] == 1);
    CHECK(grid.pixels[0](p, 0) == doctest::Approx(cams[0].cx).epsilon(1e-9));
    CHECK(grid.pixels[0](p, 1) == doctest::Approx(cams[0].cy).epsilon(1e-9));
  }
}

TEST_CASE("bilinear taps match a brute-force oracle") {
  Rng rng(9);
  const int width = 7, height = 5;
  for (int trial = 0; trial < 2000; ++trial) {
    double x = rng.uniform(0.0, width - 1.0);
    double y = rng.uniform(0.0, height - 1.0);
    auto taps = bilinear_taps(x, y, width, height);
    double wsum = 0.0, fx = 0.0, fy = 0.0;
    for (const auto& [row, w] : taps) {
      CHECK(row >= 0);
      CHECK(row < width * height);
      CHECK(w >= -1e-15);
      wsum += w;
      fx += w * (row % width);
      fy += w * (row / width);
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
    // Bilinear interpolation reproduces affine functions exactly.
    CHECK(fx == doctest::Approx(x).epsilon(1e-10));
    CHECK(fy == doctest::Approx(y).epsilon(1e-10));
  }
  // Integer coordinates collapse to a single unit tap.
  auto taps = bilinear_taps(3.0, 2.0, width, height);
  double total = 0.0;
  for (const auto& [row, w] : taps) {
    if (row == 2 * width + 3) total += w;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gather fills colors and features only at valid samples") {
  SceneFrame frame = default_frame();
  SamplerConfig config;
  config.points_per_view = 4;
  config.depth_spacing = DepthSpacing::UniformDelta;
  auto cams = std::vector<CameraModel>{
      make_camera(0, Eigen::Vector3d::Zero()),
      make_camera(1, Eigen::Vector3d(100.0, 0.0, 0.0))};
  Ray ray{Eigen::Vector3d::Zero(), Eigen::Vector3d(0.0, 0.0, 1.0), {}};
  EpipolarSampleGrid grid = sample_epipolar_points(
      ray, frame, Parametrization::Slab, cams, {0, 1}, config, CoordKind::Slab);

  Image img0 = Image::zeros(32, 32);
  img0.pixels.setConstant(0.7);
  Image img1 = Image::zeros(32, 32);
  img1.pixels.setConstant(0.3);
  Eigen::MatrixXd feat0 = Eigen::MatrixXd::Constant(32 * 32, 2, 1.5);
  Eigen::MatrixXd feat1 = Eigen::MatrixXd::Constant(32 * 32, 2, -2.0);
  gather_colors_and_features(grid, {&img0, &img1}, {&feat0, &feat1});

  for (int p = 0; p < 4; ++p) {
    CHECK(grid.colors[0](p, 0) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(grid.features[0](p, 1) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(grid.colors[1].row(p).norm() == 0.0);
    CHECK(grid.features[1].row(p).norm() == 0.0);
  }
}

TEST_CASE("gather at pixel centers reads node values exactly") {
  SceneFrame frame = default_frame();
  SamplerConfig config;
  config.points_per_view = 1;
  config.depth_spacing = DepthSpacing::UniformDelta;
  CameraModel cam = make_camera(0, Eigen::Vector3d::Zero());
  // Aim the target ray so the midpoint sample projects exactly onto the
  // center of pixel (10, 7) of the reference camera.
  Ray pixel_ray = ray_from_pixel(cam, Eigen::Vector2d(10.0, 7.0));
  EpipolarSampleGrid grid = sample_epipolar_points(
      pixel_ray, frame, Parametrization::Slab, {cam}, {0}, config,
      CoordKind::Slab);
  REQUIRE(grid.valid[0][0] == 1);

  Rng rng(12);
  Image img = Image::zeros(32, 32);
  for (int i = 0; i < img.pixels.size(); ++i) {
    img.pixels.data()[i] = rng.uniform();
  }
  Eigen::MatrixXd feat = Eigen::MatrixXd::Zero(32 * 32, 1);
  gather_colors_and_features(grid, {&img}, {&feat});
  CHECK((grid.colors[0].row(0).transpose() - img.pixel(10, 7)).norm() < 1e-9);
}

TEST_CASE("mismatched feature map shapes raise ShapeMismatch") {
  SceneFrame frame = default_frame();
  SamplerConfig config;
  config.points_per_view = 2;
  auto cams = line_rig(1, 1.0);
  Ray ray{Eigen::Vector3d::Zero(), Eigen::Vector3d(0.0, 0.0, 1.0), {}};
  EpipolarSampleGrid grid = sample_epipolar_points(
      ray, frame, Parametrization::Slab, cams, {0}, config, CoordKind::Slab);
  Image img = Image::zeros(32, 32);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(10, 2);
  CHECK_THROWS_AS(gather_colors_and_features(grid, {&img}, {&bad}), Error);
}
