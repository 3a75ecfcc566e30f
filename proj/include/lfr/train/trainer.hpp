#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "lfr/model/network.hpp"
#include "lfr/scene/scene.hpp"

namespace lfr {

struct TrainConfig {
  int batch_size = 512;
  int total_steps = 20000;
  int warmup_steps = 500;
  double base_lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double aux_weight = 1.0;
  uint64_t seed = 0;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  int log_every = 100;

  void validate() const;  // throws ConfigError
};

/// Linear ramp 0 -> base_lr over the warmup, then linear decay to 0 at
/// total_steps.
double lr_schedule(int64_t step, const TrainConfig& config);

struct OptState {
  std::map<std::string, Eigen::MatrixXd> m;  // first moments
  std::map<std::string, Eigen::MatrixXd> v;  // second moments
  int64_t step = 0;

  static OptState init(const ModelParams& params);
  std::map<std::string, Eigen::MatrixXd> to_tensors() const;
  static OptState from_tensors(const std::map<std::string, Eigen::MatrixXd>& t,
                               int64_t step);
};

using GradMap = std::map<std::string, Eigen::MatrixXd>;

/// One bias-corrected Adam update at the given learning rate. Parameters
/// without a gradient entry are left unchanged.
void adam_step(ModelParams& params, OptState& opt, const GradMap& grads,
               const TrainConfig& config, double lr);

/// Attention-weighted color: sum_j beta_j sum_i alpha_ij color_ij.
Eigen::Vector3d aux_color(const RenderTrace& trace,
                          const std::vector<Eigen::MatrixXd>& colors);

/// Mean over rays and channels of |pred-gt|^2 + lambda |aux-gt|^2.
double loss_value(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& aux,
                  const Eigen::MatrixXd& gt, double lambda);

/// A fixed ray batch from one target image: shared reference views (with
/// cached convolution patches), per-ray sample grids with gathered colors,
/// encoded target rays, and ground-truth colors.
struct RayBatch {
  std::vector<int> ref_view_ids;
  std::vector<const Image*> ref_images;
  std::vector<Eigen::MatrixXd> patches;      // K im2col matrices
  std::vector<EpipolarSampleGrid> grids;     // B
  std::vector<Eigen::VectorXd> target_encodings;
  Eigen::MatrixXd gt;                        // B x 3, linear
};

RayBatch make_batch(const Scene& scene, int target_view,
                    const std::vector<std::pair<int, int>>& pixels,
                    const std::vector<int>& ref_ids, const ModelConfig& model,
                    const SamplerConfig& sampler, const ModelParams& params);

/// Batch loss with the same forward as training (features recomputed from
/// the patches so finite differences see the convolution parameters).
double batch_loss(const ModelConfig& model, const ModelParams& params,
                  const RayBatch& batch, double aux_weight);

struct LossAndGrads {
  double loss = 0.0;
  GradMap grads;
};

/// Reverse-mode gradients of batch_loss for every parameter tensor.
/// Per-ray tapes run over `chunks` deterministic reduction chunks.
LossAndGrads batch_gradients(const ModelConfig& model, const ModelParams& params,
                             const RayBatch& batch, double aux_weight,
                             int chunks = 0);

struct GradCheckOptions {
  int coords_per_group = 200;
  double h = 1e-5;
  uint64_t seed = 0;
  double init_scale = 1.0;       // scales the evaluation-point weights
  std::string corrupt_tensor;    // when set, that gradient coordinate is
  int corrupt_index = 0;         // multiplied by 1.01 before comparison
  int batch_rays = 4;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::map<std::string, double> group_max;  // per parameter group
};

/// Central finite differences against reverse-mode gradients on a tiny
/// batch; relative error uses denominator max(|a|, |b|, 1e-8).
GradCheckReport grad_check(const ModelConfig& model, const SamplerConfig& sampler,
                           const Scene& scene, const GradCheckOptions& options);

class Trainer {
 public:
  Trainer(const Scene& scene, ModelConfig model, SamplerConfig sampler,
          TrainConfig config);

  /// One optimization step; returns the batch loss. Throws NonFiniteLoss.
  double step();

  /// Runs the remaining steps, logging "step loss lr seconds" lines and
  /// writing periodic checkpoints when configured.
  void train(std::ostream* log = nullptr,
             const std::string& checkpoint_path = "");

  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  OptState& opt_state() { return opt_; }
  const ModelConfig& model_config() const { return model_; }
  const SamplerConfig& sampler_config() const { return sampler_; }

 private:
  const Scene& scene_;
  ModelConfig model_;
  SamplerConfig sampler_;
  TrainConfig config_;
  ModelParams params_;
  OptState opt_;
  Rng rng_;
  std::vector<CameraModel> train_cameras_;
};

}  // namespace lfr
