// Compares the serial reference path (1 thread) against the OpenMP path
// for full-image rendering and one training step, and verifies that both
// produce bitwise-identical results.

#include <chrono>
#include <iostream>

#include "lfr/core/parallel.hpp"
#include "lfr/render/renderer.hpp"
#include "lfr/scene/synthetic.hpp"
#include "lfr/train/trainer.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  int threads = argc > 1 ? std::atoi(argv[1]) : 0;  // 0 = OpenMP default

  lfr::SyntheticSceneSpec spec;
  lfr::PlaneSpec plane;
  plane.depth = 2.0;
  plane.cell_size = 0.3;
  spec.planes.push_back(plane);
  lfr::SphereSpec sphere;
  sphere.center = {0.2, 0.0, 2.5};
  sphere.radius = 0.4;
  spec.spheres.push_back(sphere);
  spec.num_cameras = 6;
  spec.rig_extent = 0.4;
  spec.image_size = 48;
  spec.focal = 48.0;
  spec.frame.z_st = 1.0;
  spec.frame.z_uv = 3.5;
  spec.frame.near = 1.0;
  spec.frame.far = 3.5;
  lfr::Scene scene = lfr::generate_synthetic(spec);

  lfr::ModelConfig model;
  model.model_dim = 32;
  model.num_blocks = 2;
  model.num_views = spec.num_cameras;
  lfr::SamplerConfig sampler;
  sampler.num_reference_views = 2;
  sampler.candidate_pool = 4;
  sampler.points_per_view = 8;
  lfr::TrainConfig train;
  train.batch_size = 64;
  train.total_steps = 4;
  train.warmup_steps = 1;

  auto run_once = [&](int n) {
    lfr::set_num_threads(n);
    lfr::Trainer trainer(scene, model, sampler, train);
    auto t0 = Clock::now();
    double loss = 0.0;
    for (int i = 0; i < train.total_steps; ++i) loss = trainer.step();
    double train_time = seconds_since(t0);

    lfr::RenderContext ctx = lfr::make_render_context(
        scene, trainer.model_config(), sampler, trainer.params());
    lfr::RenderRequest request;
    request.camera = scene.view(0).camera;
    t0 = Clock::now();
    lfr::RenderOutputs out = lfr::render_image(trainer.params(), ctx, request);
    double render_time = seconds_since(t0);
    return std::tuple{loss, train_time, render_time, out.color.pixels};
  };

  auto [loss1, train1, render1, pixels1] = run_once(1);
  auto [lossN, trainN, renderN, pixelsN] = run_once(threads);

  bool loss_match = loss1 == lossN;
  bool pixels_match = (pixels1 - pixelsN).cwiseAbs().maxCoeff() == 0.0;

  std::cout << "serial:   train " << train1 << " s, render " << render1
            << " s\n";
  std::cout << "parallel: train " << trainN << " s, render " << renderN
            << " s (threads=" << (threads == 0 ? -1 : threads) << ")\n";
  std::cout << "speedup:  train " << train1 / trainN << "x, render "
            << render1 / renderN << "x\n";
  std::cout << "loss bitwise match:   " << (loss_match ? "yes" : "NO") << "\n";
  std::cout << "pixels bitwise match: " << (pixels_match ? "yes" : "NO")
            << "\n";
  return loss_match && pixels_match ? 0 : 1;
}
