#include "lfr/model/params.hpp"

#include "lfr/core/error.hpp"

namespace lfr {

Eigen::MatrixXd& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw Error(ErrorCode::ShapeMismatch, "missing parameter tensor " + name);
  }
  return it->second;
}

const Eigen::MatrixXd& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw Error(ErrorCode::ShapeMismatch, "missing parameter tensor " + name);
  }
  return it->second;
}

bool ModelParams::all_finite() const {
  for (const auto& [name, t] : tensors) {
    if (!t.allFinite()) return false;
  }
  return true;
}

namespace {

Eigen::MatrixXd trunc_normal(int rows, int cols, Rng& rng, double sigma = 0.02) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.truncated_normal(sigma);
  }
  return m;
}

void add_linear(ModelParams& p, const std::string& name, int in, int out,
                Rng& rng) {
  p.tensors[name + ".weight"] = trunc_normal(in, out, rng);
  p.tensors[name + ".bias"] = Eigen::MatrixXd::Zero(1, out);
}

void add_layernorm(ModelParams& p, const std::string& name, int dim) {
  p.tensors[name + ".gamma"] = Eigen::MatrixXd::Ones(1, dim);
  p.tensors[name + ".beta"] = Eigen::MatrixXd::Zero(1, dim);
}

void add_stack(ModelParams& p, const std::string& prefix,
               const ModelConfig& config, bool with_attention, Rng& rng) {
  const int d = config.model_dim;
  const int h = config.hidden_dim();
  for (int b = 0; b < config.num_blocks; ++b) {
    std::string base = prefix + ".block" + std::to_string(b);
    if (with_attention) {
      add_linear(p, base + ".attn.q", d, d, rng);
      add_linear(p, base + ".attn.k", d, d, rng);
      add_linear(p, base + ".attn.v", d, d, rng);
      add_linear(p, base + ".attn.out", d, d, rng);
      add_layernorm(p, base + ".ln1", d);
    }
    add_linear(p, base + ".mlp.fc1", d, h, rng);
    add_linear(p, base + ".mlp.fc2", h, d, rng);
    add_layernorm(p, base + ".ln2", d);
  }
  p.tensors[prefix + ".pool.w"] = trunc_normal(1, 2 * d, rng);
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  ModelParams p;
  const int d = config.model_dim;
  const int ray_enc = config.ray_encoding_dim();

  if (config.variant == ModelVariant::Vanilla) {
    add_linear(p, "vanilla.layer0", ray_enc, d, rng);
    for (int i = 1; i < config.vanilla_layers; ++i) {
      add_linear(p, "vanilla.layer" + std::to_string(i), d, d, rng);
    }
    add_linear(p, "head", d, 3, rng);
    return p;
  }

  const int kk = config.conv_kernel;
  p.tensors["conv.filter"] = trunc_normal(kk * kk * 3, config.conv_channels, rng);
  p.tensors["conv.bias"] = Eigen::MatrixXd::Zero(1, config.conv_channels);
  p.tensors["embed.table"] =
      trunc_normal(config.num_views, config.cam_embed_dim, rng);

  if (config.variant == ModelVariant::OneMlp) {
    const int f = config.token_dim() + ray_enc;
    add_linear(p, "onemlp.layer0", f, d, rng);
    for (int i = 1; i <= config.one_mlp_layers; ++i) {
      add_linear(p, "onemlp.layer" + std::to_string(i), d, d, rng);
    }
    p.tensors["onemlp.reduce_p.weight"] =
        trunc_normal(config.one_mlp_points, 1, rng);
    p.tensors["onemlp.reduce_p.bias"] = Eigen::MatrixXd::Zero(1, d);
    p.tensors["onemlp.reduce_n.weight"] =
        trunc_normal(config.one_mlp_views, 1, rng);
    p.tensors["onemlp.reduce_n.bias"] = Eigen::MatrixXd::Zero(1, d);
    add_linear(p, "head", d, 3, rng);
    return p;
  }

  add_linear(p, "token_proj", config.token_dim(), d, rng);
  add_linear(p, "target_proj", ray_enc, d, rng);
  bool attention = config.variant == ModelVariant::Full;
  add_stack(p, "epi", config, attention, rng);
  add_stack(p, "view", config, attention, rng);
  add_linear(p, "head", d, 3, rng);
  return p;
}

std::string param_group(const std::string& name) {
  auto starts = [&](const char* prefix) { return name.rfind(prefix, 0) == 0; };
  if (starts("epi.pool")) return "epi.pool";
  if (starts("view.pool")) return "view.pool";
  if (starts("epi.")) return "epi.stack";
  if (starts("view.")) return "view.stack";
  auto dot = name.find('.');
  return name.substr(0, dot);
}

}  // namespace lfr
