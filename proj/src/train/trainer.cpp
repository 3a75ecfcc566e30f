#include "lfr/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <set>

#include "lfr/core/parallel.hpp"
#include "lfr/scene/checkpoint.hpp"

namespace lfr {

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error(ErrorCode::ConfigError, "batch_size must be >= 1");
  if (total_steps < 1) throw Error(ErrorCode::ConfigError, "total_steps must be >= 1");
  if (warmup_steps < 0 || warmup_steps >= total_steps) {
    throw Error(ErrorCode::ConfigError, "need 0 <= warmup_steps < total_steps");
  }
  if (base_lr <= 0.0) throw Error(ErrorCode::ConfigError, "base_lr must be positive");
  if (aux_weight < 0.0) throw Error(ErrorCode::ConfigError, "aux_weight must be >= 0");
}

double lr_schedule(int64_t step, const TrainConfig& config) {
  if (step <= 0) return 0.0;
  if (step <= config.warmup_steps) {
    return config.base_lr * static_cast<double>(step) / config.warmup_steps;
  }
  double remain = static_cast<double>(config.total_steps - step) /
                  (config.total_steps - config.warmup_steps);
  return config.base_lr * std::max(0.0, remain);
}

OptState OptState::init(const ModelParams& params) {
  OptState opt;
  for (const auto& [name, t] : params.tensors) {
    opt.m[name] = Eigen::MatrixXd::Zero(t.rows(), t.cols());
    opt.v[name] = Eigen::MatrixXd::Zero(t.rows(), t.cols());
  }
  return opt;
}

std::map<std::string, Eigen::MatrixXd> OptState::to_tensors() const {
  std::map<std::string, Eigen::MatrixXd> out;
  for (const auto& [name, t] : m) out.emplace("adam.m." + name, t);
  for (const auto& [name, t] : v) out.emplace("adam.v." + name, t);
  return out;
}

OptState OptState::from_tensors(
    const std::map<std::string, Eigen::MatrixXd>& tensors, int64_t step) {
  OptState opt;
  opt.step = step;
  for (const auto& [name, t] : tensors) {
    if (name.rfind("adam.m.", 0) == 0) opt.m[name.substr(7)] = t;
    if (name.rfind("adam.v.", 0) == 0) opt.v[name.substr(7)] = t;
  }
  return opt;
}

void adam_step(ModelParams& params, OptState& opt, const GradMap& grads,
               const TrainConfig& config, double lr) {
  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (auto& [name, theta] : params.tensors) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Eigen::MatrixXd& g = git->second;
    Eigen::MatrixXd& m = opt.m.at(name);
    Eigen::MatrixXd& v = opt.v.at(name);
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    Eigen::MatrixXd mhat = m / bc1;
    Eigen::MatrixXd vhat = v / bc2;
    theta.array() -= lr * mhat.array() / (vhat.array().sqrt() + config.eps);
  }
}

Eigen::Vector3d aux_color(const RenderTrace& trace,
                          const std::vector<Eigen::MatrixXd>& colors) {
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (int j = 0; j < trace.alpha.rows(); ++j) {
    Eigen::RowVector3d view_color = trace.alpha.row(j) * colors[j];
    out += trace.beta[j] * view_color.transpose();
  }
  return out;
}

double loss_value(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& aux,
                  const Eigen::MatrixXd& gt, double lambda) {
  double main_term = (pred - gt).squaredNorm();
  double aux_term = aux.size() > 0 ? (aux - gt).squaredNorm() : 0.0;
  return (main_term + lambda * aux_term) / static_cast<double>(gt.size());
}

RayBatch make_batch(const Scene& scene, int target_view,
                    const std::vector<std::pair<int, int>>& pixels,
                    const std::vector<int>& ref_ids, const ModelConfig& model,
                    const SamplerConfig& sampler, const ModelParams& params) {
  RayBatch batch;
  batch.ref_view_ids = ref_ids;
  const SceneView& target = scene.view(target_view);
  const int b = static_cast<int>(pixels.size());
  batch.gt.resize(b, 3);
  for (int i = 0; i < b; ++i) {
    batch.gt.row(i) =
        target.image.pixel(pixels[i].first, pixels[i].second).transpose();
  }

  if (model.variant != ModelVariant::Vanilla) {
    std::vector<CameraModel> refs;
    std::vector<const Image*> images;
    for (int id : ref_ids) {
      refs.push_back(scene.view(id).camera);
      images.push_back(&scene.view(id).image);
      batch.patches.push_back(im2col(scene.view(id).image, model.conv_kernel));
    }
    batch.ref_images = images;
    std::vector<Eigen::MatrixXd> feats;
    feats.reserve(refs.size());
    for (size_t j = 0; j < refs.size(); ++j) {
      feats.push_back(batch.patches[j] * params.at("conv.filter"));
      feats.back().rowwise() += params.at("conv.bias").row(0);
    }
    // Take addresses only once the vector has stopped growing.
    std::vector<const Eigen::MatrixXd*> feat_ptrs;
    for (const auto& f : feats) feat_ptrs.push_back(&f);
    batch.grids.resize(b);
    for (int i = 0; i < b; ++i) {
      Ray ray = ray_from_pixel(target.camera, {double(pixels[i].first),
                                               double(pixels[i].second)});
      batch.grids[i] = sample_epipolar_points(ray, scene.frame,
                                              scene.parametrization, refs,
                                              ref_ids, sampler,
                                              model.coord_kind());
      gather_colors_and_features(batch.grids[i], images, feat_ptrs);
    }
  } else {
    batch.grids.resize(b);
  }

  batch.target_encodings.resize(b);
  for (int i = 0; i < b; ++i) {
    Ray ray = ray_from_pixel(target.camera, {double(pixels[i].first),
                                             double(pixels[i].second)});
    batch.target_encodings[i] = encode_target_ray(ray, scene.frame, model);
  }
  return batch;
}

namespace {

std::vector<Eigen::MatrixXd> feature_values(const ModelConfig& model,
                                            const ModelParams& params,
                                            const RayBatch& batch) {
  std::vector<Eigen::MatrixXd> feats;
  for (const auto& patches : batch.patches) {
    feats.push_back(patches * params.at("conv.filter"));
    feats.back().rowwise() += params.at("conv.bias").row(0);
  }
  return feats;
}

// True if at least one reference view sees at least one epipolar sample of
// the ray through (px, py). Rays without coverage cannot be supervised.
bool ray_covered(const Scene& scene, const CameraModel& cam,
                 const std::vector<CameraModel>& ref_cams,
                 const std::vector<int>& ref_ids, const ModelConfig& model,
                 const SamplerConfig& sampler, int px, int py) {
  if (model.variant == ModelVariant::Vanilla) return true;
  try {
    Ray ray = ray_from_pixel(cam, {double(px), double(py)});
    EpipolarSampleGrid grid =
        sample_epipolar_points(ray, scene.frame, scene.parametrization,
                               ref_cams, ref_ids, sampler, model.coord_kind());
    for (int j = 0; j < grid.num_views(); ++j) {
      if (grid.view_has_valid_point(j)) return true;
    }
  } catch (const Error&) {
  }
  return false;
}

std::vector<std::pair<int, int>> map_sizes_for(const RayBatch& batch) {
  std::vector<std::pair<int, int>> sizes;
  for (const Image* img : batch.ref_images) {
    sizes.emplace_back(img->width, img->height);
  }
  return sizes;
}

}  // namespace

double batch_loss(const ModelConfig& model, const ModelParams& params,
                  const RayBatch& batch, double aux_weight) {
  const int b = static_cast<int>(batch.grids.size());
  const bool vanilla = model.variant == ModelVariant::Vanilla;
  std::vector<Eigen::MatrixXd> feats =
      vanilla ? std::vector<Eigen::MatrixXd>() : feature_values(model, params, batch);
  auto sizes = map_sizes_for(batch);

  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    ad::Tape tape;
    ParamVars pv = bind_params(tape, params, false);
    std::vector<ad::Var> feat_vars;
    for (const auto& f : feats) feat_vars.push_back(tape.leaf(f, false));
    ForwardResult fr = forward_ray(
        tape, model, pv, batch.grids[i], batch.target_encodings[i],
        vanilla ? nullptr : &feat_vars, vanilla ? nullptr : &sizes);
    Eigen::MatrixXd gt_row = batch.gt.row(i);
    double ray_loss = (tape.value(fr.rgb) - gt_row).squaredNorm() / 3.0;
    if (fr.aux.valid() && aux_weight > 0.0) {
      ray_loss += aux_weight * (tape.value(fr.aux) - gt_row).squaredNorm() / 3.0;
    }
    total += ray_loss;
  }
  return total / b;
}

LossAndGrads batch_gradients(const ModelConfig& model, const ModelParams& params,
                             const RayBatch& batch, double aux_weight,
                             int chunks) {
  const int b = static_cast<int>(batch.grids.size());
  const bool vanilla = model.variant == ModelVariant::Vanilla;
  std::vector<Eigen::MatrixXd> feats =
      vanilla ? std::vector<Eigen::MatrixXd>() : feature_values(model, params, batch);
  auto sizes = map_sizes_for(batch);
  const int k = static_cast<int>(feats.size());
  // Fixed chunk count (not the thread count) so the reduction order, and
  // therefore the result, is bitwise identical for any number of workers.
  if (chunks <= 0) chunks = 8;
  chunks = std::min(chunks, b);

  struct ChunkAccum {
    double loss = 0.0;
    GradMap grads;
    std::vector<Eigen::MatrixXd> feat_grads;
  };
  std::vector<ChunkAccum> accums(chunks);
  for (auto& acc : accums) {
    for (int j = 0; j < k; ++j) {
      acc.feat_grads.push_back(
          Eigen::MatrixXd::Zero(feats[j].rows(), feats[j].cols()));
    }
  }

  parallel_chunks(0, b, chunks, [&](int chunk, int64_t begin, int64_t end) {
    ChunkAccum& acc = accums[chunk];
    for (int64_t i = begin; i < end; ++i) {
      ad::Tape tape;
      ParamVars pv = bind_params(tape, params, true);
      std::vector<ad::Var> feat_vars;
      for (const auto& f : feats) feat_vars.push_back(tape.leaf(f, true));
      ForwardResult fr = forward_ray(
          tape, model, pv, batch.grids[i], batch.target_encodings[i],
          vanilla ? nullptr : &feat_vars, vanilla ? nullptr : &sizes);
      Eigen::MatrixXd gt_row = batch.gt.row(i);
      ad::Var ray_loss = tape.mean_sq(fr.rgb, gt_row);
      if (fr.aux.valid() && aux_weight > 0.0) {
        ray_loss = tape.add(ray_loss,
                            tape.scale(tape.mean_sq(fr.aux, gt_row), aux_weight));
      }
      acc.loss += tape.value(ray_loss)(0, 0);
      tape.backward(ray_loss, 1.0 / b);
      for (const auto& [name, var] : pv.vars) {
        const Eigen::MatrixXd& g = tape.grad(var);
        if (g.size() == 0) continue;
        auto [it, inserted] = acc.grads.try_emplace(name, g);
        if (!inserted) it->second += g;
      }
      for (int j = 0; j < k; ++j) {
        const Eigen::MatrixXd& g = tape.grad(feat_vars[j]);
        if (g.size() > 0) acc.feat_grads[j] += g;
      }
    }
  });

  LossAndGrads out;
  std::vector<Eigen::MatrixXd> feat_grads;
  for (int j = 0; j < k; ++j) {
    feat_grads.push_back(Eigen::MatrixXd::Zero(feats[j].rows(), feats[j].cols()));
  }
  for (const auto& acc : accums) {  // chunk order: deterministic reduction
    out.loss += acc.loss;
    for (const auto& [name, g] : acc.grads) {
      auto [it, inserted] = out.grads.try_emplace(name, g);
      if (!inserted) it->second += g;
    }
    for (int j = 0; j < k; ++j) feat_grads[j] += acc.feat_grads[j];
  }
  out.loss /= b;

  if (!vanilla && k > 0) {
    Eigen::MatrixXd dfilter = Eigen::MatrixXd::Zero(
        params.at("conv.filter").rows(), params.at("conv.filter").cols());
    Eigen::MatrixXd dbias =
        Eigen::MatrixXd::Zero(1, params.at("conv.bias").cols());
    for (int j = 0; j < k; ++j) {
      dfilter += batch.patches[j].transpose() * feat_grads[j];
      dbias += feat_grads[j].colwise().sum();
    }
    auto add_into = [&](const std::string& name, const Eigen::MatrixXd& g) {
      auto [it, inserted] = out.grads.try_emplace(name, g);
      if (!inserted) it->second += g;
    };
    add_into("conv.filter", dfilter);
    add_into("conv.bias", dbias);
  }
  return out;
}

GradCheckReport grad_check(const ModelConfig& model, const SamplerConfig& sampler,
                           const Scene& scene, const GradCheckOptions& options) {
  Rng rng(options.seed);
  ModelParams params = ModelParams::init(model, rng);
  if (options.init_scale != 1.0) {
    // Rescale the randomly initialized weights only; LayerNorm affines and
    // biases keep their structured initialization.
    for (auto& [name, t] : params.tensors) {
      bool is_ln = name.find(".ln") != std::string::npos;
      bool is_bias = name.size() > 5 && name.rfind(".bias") == name.size() - 5;
      // Pooling weights produce softmax logits directly: scaling them up
      // saturates the softmax and kills those gradients, which makes the
      // finite-difference quotient pure rounding noise.
      bool is_pool = name.find(".pool.") != std::string::npos;
      if (!is_ln && !is_bias && !is_pool) t *= options.init_scale;
    }
  }

  // Fixed tiny batch from the first training view.
  int target = scene.train_ids.front();
  const CameraModel& cam = scene.view(target).camera;
  std::vector<int> refs = select_reference_views(
      cam, scene.cameras_for(scene.train_ids), sampler, rng);
  std::vector<CameraModel> ref_cams = scene.cameras_for(refs);
  std::vector<std::pair<int, int>> pixels;
  for (int i = 0; i < options.batch_rays; ++i) {
    int px = 0, py = 0;
    int attempts = 0;
    do {
      px = int(rng.uniform_index(cam.width));
      py = int(rng.uniform_index(cam.height));
    } while (!ray_covered(scene, cam, ref_cams, refs, model, sampler, px, py) &&
             ++attempts < 256);
    if (attempts >= 256) {
      throw Error(ErrorCode::AllViewsMasked,
                  "gradient-check view " + std::to_string(target) +
                      " has no rays visible from its reference views");
    }
    pixels.emplace_back(px, py);
  }
  RayBatch batch = make_batch(scene, target, pixels, refs, model, sampler, params);

  LossAndGrads analytic = batch_gradients(model, params, batch, 1.0, 1);
  if (!options.corrupt_tensor.empty()) {
    Eigen::MatrixXd& g = analytic.grads.at(options.corrupt_tensor);
    g(options.corrupt_index / g.cols(), options.corrupt_index % g.cols()) *= 1.01;
  }

  // Sample coordinates per parameter group (forced to include a corrupted
  // coordinate so the sensitivity check cannot miss it).
  std::map<std::string, std::vector<std::pair<std::string, int>>> group_coords;
  for (const auto& [name, t] : params.tensors) {
    group_coords[param_group(name)];  // ensure every group appears
  }
  for (auto& [group, coords] : group_coords) {
    // Only coordinates with a non-negligible analytic gradient are useful
    // probes: where the gradient is (near) zero the central difference is
    // pure floating-point cancellation noise, so the comparison would
    // measure rounding, not correctness.
    double gmax = 0.0;
    for (const auto& [name, t] : params.tensors) {
      if (param_group(name) != group) continue;
      auto git = analytic.grads.find(name);
      if (git == analytic.grads.end()) continue;
      gmax = std::max(gmax, git->second.cwiseAbs().maxCoeff());
    }
    const double floor = 0.03 * gmax;
    std::vector<std::pair<std::string, int>> pool;
    for (const auto& [name, t] : params.tensors) {
      if (param_group(name) != group) continue;
      auto git = analytic.grads.find(name);
      if (git == analytic.grads.end()) continue;
      const Eigen::MatrixXd& g = git->second;
      for (long i = 0; i < g.size(); ++i) {
        int r = static_cast<int>(i % g.rows());
        int c = static_cast<int>(i / g.rows());
        if (std::abs(g(r, c)) >= floor && gmax > 0.0) {
          pool.emplace_back(name, r * static_cast<int>(g.cols()) + c);
        }
      }
    }
    int want = static_cast<int>(
        std::min<size_t>(options.coords_per_group, pool.size()));
    std::set<size_t> chosen;
    while (static_cast<int>(chosen.size()) < want) {
      chosen.insert(rng.uniform_index(pool.size()));
    }
    for (size_t i : chosen) coords.push_back(pool[i]);
  }
  if (!options.corrupt_tensor.empty()) {
    group_coords[param_group(options.corrupt_tensor)].push_back(
        {options.corrupt_tensor, options.corrupt_index});
  }

  GradCheckReport report;
  for (const auto& [group, coords] : group_coords) {
    double group_max = 0.0;
    for (const auto& [name, flat] : coords) {
      Eigen::MatrixXd& t = params.at(name);
      int r = flat / static_cast<int>(t.cols());
      int c = flat % static_cast<int>(t.cols());
      double saved = t(r, c);
      t(r, c) = saved + options.h;
      double up = batch_loss(model, params, batch, 1.0);
      t(r, c) = saved - options.h;
      double down = batch_loss(model, params, batch, 1.0);
      t(r, c) = saved;
      double fd = (up - down) / (2.0 * options.h);
      double an = 0.0;
      auto git = analytic.grads.find(name);
      if (git != analytic.grads.end()) an = git->second(r, c);
      double rel = std::abs(fd - an) /
                   std::max({std::abs(fd), std::abs(an), 1e-8});
      group_max = std::max(group_max, rel);
    }
    report.group_max[group] = group_max;
    report.max_rel_error = std::max(report.max_rel_error, group_max);
  }
  return report;
}

Trainer::Trainer(const Scene& scene, ModelConfig model, SamplerConfig sampler,
                 TrainConfig config)
    : scene_(scene),
      model_(std::move(model)),
      sampler_(sampler),
      config_(config),
      rng_(config.seed) {
  config_.validate();
  sampler_.training_mode = true;
  if (model_.num_views == 0) {
    model_.num_views = static_cast<int>(scene.views.size());
  }
  params_ = ModelParams::init(model_, rng_);
  opt_ = OptState::init(params_);
  train_cameras_ = scene.cameras_for(scene.train_ids);
}

double Trainer::step() {
  int target = scene_.train_ids[rng_.uniform_index(scene_.train_ids.size())];
  const SceneView& view = scene_.view(target);
  std::vector<int> refs;
  if (model_.variant != ModelVariant::Vanilla) {
    refs = select_reference_views(view.camera, train_cameras_, sampler_, rng_);
  }
  // A random pixel on an edge camera can be invisible to every reference
  // view (all its epipolar samples fall outside their frusta). Such rays
  // carry no signal, so redraw instead of failing the whole batch.
  std::vector<CameraModel> ref_cams = scene_.cameras_for(refs);
  std::vector<std::pair<int, int>> pixels;
  pixels.reserve(config_.batch_size);
  for (int i = 0; i < config_.batch_size; ++i) {
    int px = 0, py = 0;
    int attempts = 0;
    do {
      px = int(rng_.uniform_index(view.camera.width));
      py = int(rng_.uniform_index(view.camera.height));
    } while (!ray_covered(scene_, view.camera, ref_cams, refs, model_,
                          sampler_, px, py) &&
             ++attempts < 256);
    if (attempts >= 256) {
      throw Error(ErrorCode::AllViewsMasked,
                  "target view " + std::to_string(target) +
                      " has no rays visible from its reference views");
    }
    pixels.emplace_back(px, py);
  }
  RayBatch batch =
      make_batch(scene_, target, pixels, refs, model_, sampler_, params_);
  LossAndGrads lg = batch_gradients(model_, params_, batch, config_.aux_weight);
  if (!std::isfinite(lg.loss)) {
    throw Error(ErrorCode::NonFiniteLoss,
                "loss is not finite at step " + std::to_string(opt_.step) +
                    " (target view " + std::to_string(target) + ")");
  }
  double lr = lr_schedule(opt_.step + 1, config_);
  adam_step(params_, opt_, lg.grads, config_, lr);
  return lg.loss;
}

void Trainer::train(std::ostream* log, const std::string& checkpoint_path) {
  auto start = std::chrono::steady_clock::now();
  if (log) (*log) << "step\tloss\tlr\tseconds\n";
  while (opt_.step < config_.total_steps) {
    double loss = step();
    bool last = opt_.step == config_.total_steps;
    if (log && (opt_.step % config_.log_every == 0 || last)) {
      double seconds = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - start)
                           .count();
      (*log) << opt_.step << "\t" << loss << "\t"
             << lr_schedule(opt_.step, config_) << "\t" << seconds << "\n";
      log->flush();
    }
    if (!checkpoint_path.empty() && config_.checkpoint_every > 0 &&
        (opt_.step % config_.checkpoint_every == 0 || last)) {
      Checkpoint ckpt{model_, sampler_, params_, opt_.to_tensors(), opt_.step};
      save_checkpoint(ckpt, checkpoint_path);
    }
  }
}

}  // namespace lfr
