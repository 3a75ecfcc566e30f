#include "lfr/model/network.hpp"

#include <cmath>

#include "lfr/core/error.hpp"

namespace lfr {

namespace {
constexpr double kMaskLogit = -1e9;
}

ad::Var ParamVars::at(const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter not bound: " + name);
  }
  return it->second;
}

ParamVars bind_params(ad::Tape& tape, const ModelParams& params,
                      bool requires_grad) {
  ParamVars pv;
  for (const auto& [name, tensor] : params.tensors) {
    pv.vars.emplace(name, tape.leaf(tensor, requires_grad));
  }
  return pv;
}

Eigen::MatrixXd im2col(const Image& image, int kernel) {
  const int w = image.width, h = image.height;
  const int half = kernel / 2;
  Eigen::MatrixXd patches = Eigen::MatrixXd::Zero(w * h, kernel * kernel * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int row = y * w + x;
      for (int dy = -half; dy <= half; ++dy) {
        int sy = y + dy;
        if (sy < 0 || sy >= h) continue;
        for (int dx = -half; dx <= half; ++dx) {
          int sx = x + dx;
          if (sx < 0 || sx >= w) continue;
          int col = ((dy + half) * kernel + (dx + half)) * 3;
          patches.block<1, 3>(row, col) = image.pixels.row(sy * w + sx);
        }
      }
    }
  }
  return patches;
}

Eigen::MatrixXd conv_features(const Image& image, const ModelParams& params,
                              const ModelConfig& config) {
  Eigen::MatrixXd out = im2col(image, config.conv_kernel) * params.at("conv.filter");
  out.rowwise() += params.at("conv.bias").row(0);
  return out;
}

ad::Var conv_features_var(ad::Tape& tape, const Eigen::MatrixXd& patches,
                          const ParamVars& params) {
  ad::Var p = tape.leaf(patches, false);
  return tape.add_row_broadcast(tape.matmul(p, params.at("conv.filter")),
                                params.at("conv.bias"));
}

namespace {

Eigen::VectorXd encode_ray_coords(const Eigen::VectorXd& coords,
                                  const ModelConfig& config) {
  if (!config.use_plucker &&
      config.parametrization == Parametrization::TwoSphere) {
    SphereCoords sc{coords[0], coords[1], coords[2], coords[3]};
    return sh_encode(sc, config.spherical);
  }
  return fourier_encode(coords, config.fourier);
}

ad::Var linear(ad::Tape& tape, ad::Var x, const ParamVars& pv,
               const std::string& name) {
  return tape.add_row_broadcast(tape.matmul(x, pv.at(name + ".weight")),
                                pv.at(name + ".bias"));
}

/// Transformer (or MLP-ablated) stack; mask_row marks keys that must not be
/// attended to with kMaskLogit entries.
ad::Var run_stack(ad::Tape& tape, ad::Var x, ad::Var mask_row,
                  const std::string& prefix, const ModelConfig& config,
                  const ParamVars& pv, bool attention) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(config.model_dim));
  for (int b = 0; b < config.num_blocks; ++b) {
    std::string base = prefix + ".block" + std::to_string(b);
    if (attention) {
      ad::Var q = linear(tape, x, pv, base + ".attn.q");
      ad::Var k = linear(tape, x, pv, base + ".attn.k");
      ad::Var v = linear(tape, x, pv, base + ".attn.v");
      ad::Var scores = tape.scale(tape.matmul_nt(q, k), inv_sqrt_d);
      scores = tape.add_row_broadcast(scores, mask_row);
      ad::Var attn = tape.softmax_rows(scores);
      ad::Var out = linear(tape, tape.matmul(attn, v), pv, base + ".attn.out");
      x = tape.layernorm_rows(tape.add(x, out), pv.at(base + ".ln1.gamma"),
                              pv.at(base + ".ln1.beta"));
    }
    ad::Var m = linear(tape, tape.gelu(linear(tape, x, pv, base + ".mlp.fc1")),
                       pv, base + ".mlp.fc2");
    x = tape.layernorm_rows(tape.add(x, m), pv.at(base + ".ln2.gamma"),
                            pv.at(base + ".ln2.beta"));
  }
  return x;
}

ad::GatherTaps identity_taps(int begin, int count) {
  ad::GatherTaps taps(count);
  for (int i = 0; i < count; ++i) taps[i] = {{begin + i, 1.0}};
  return taps;
}

ad::Var mlp_with_skips(ad::Tape& tape, ad::Var h, const ParamVars& pv,
                       const std::string& prefix, int first, int last) {
  std::vector<ad::Var> history;
  history.push_back(h);
  for (int i = first; i <= last; ++i) {
    h = tape.gelu(linear(tape, h, pv, prefix + std::to_string(i)));
    if ((i - first + 1) % 4 == 0) {
      h = tape.add(h, history[history.size() - 4]);
    }
    history.push_back(h);
  }
  return h;
}

ForwardResult vanilla_forward(ad::Tape& tape, const ModelConfig& config,
                              const ParamVars& pv,
                              const Eigen::VectorXd& target_encoding) {
  ad::Var x = tape.constant(target_encoding.transpose());
  ad::Var h = tape.gelu(linear(tape, x, pv, "vanilla.layer0"));
  h = mlp_with_skips(tape, h, pv, "vanilla.layer", 1, config.vanilla_layers - 1);
  ForwardResult result;
  result.rgb = tape.sigmoid(linear(tape, h, pv, "head"));
  return result;
}

struct TokenInputs {
  std::vector<Eigen::MatrixXd> encodings;  // K of P x (ray_enc + point_enc)
  Eigen::MatrixXd point_mask_logits;       // K x P, 0 or kMaskLogit
};

TokenInputs build_token_inputs(const ModelConfig& config,
                               const EpipolarSampleGrid& grid) {
  const int p = grid.num_points();
  const int k = grid.num_views();
  const int er = config.ray_encoding_dim();
  const int ep = config.point_encoding_dim();
  Eigen::MatrixXd point_enc(p, ep);
  for (int i = 0; i < p; ++i) {
    point_enc.row(i) =
        fourier_encode(grid.points3d.row(i).transpose(), config.fourier)
            .transpose();
  }
  TokenInputs inputs;
  inputs.point_mask_logits = Eigen::MatrixXd::Zero(k, p);
  inputs.encodings.reserve(k);
  for (int j = 0; j < k; ++j) {
    Eigen::MatrixXd enc = Eigen::MatrixXd::Zero(p, er + ep);
    for (int i = 0; i < p; ++i) {
      if (grid.valid[j][i]) {
        enc.row(i).head(er) =
            encode_ray_coords(grid.ray_coords[j].row(i).transpose(), config)
                .transpose();
      } else {
        inputs.point_mask_logits(j, i) = kMaskLogit;
      }
      enc.row(i).tail(ep) = point_enc.row(i);
    }
    inputs.encodings.push_back(std::move(enc));
  }
  return inputs;
}

ad::Var view_tokens(ad::Tape& tape, const ModelConfig& config,
                    const ParamVars& pv, const EpipolarSampleGrid& grid,
                    const TokenInputs& inputs, int j,
                    const std::vector<ad::Var>* feature_maps,
                    const std::vector<std::pair<int, int>>* map_sizes) {
  const int p = grid.num_points();
  if (grid.view_ids[j] >= config.num_views || grid.view_ids[j] < 0) {
    throw Error(ErrorCode::UnknownView,
                "view " + std::to_string(grid.view_ids[j]) +
                    " outside the camera embedding table");
  }
  ad::Var embed_row = tape.gather_rows(
      pv.at("embed.table"), ad::GatherTaps{{{grid.view_ids[j], 1.0}}});
  ad::Var feats;
  if (feature_maps) {
    auto [w, h] = (*map_sizes)[j];
    ad::GatherTaps taps(p);
    for (int i = 0; i < p; ++i) {
      if (!grid.valid[j][i]) continue;  // invalid rows stay zero
      auto t = bilinear_taps(grid.pixels[j](i, 0), grid.pixels[j](i, 1), w, h);
      taps[i].assign(t.begin(), t.end());
    }
    feats = tape.gather_rows((*feature_maps)[j], taps);
  } else {
    if (grid.features[j].rows() != p) {
      throw Error(ErrorCode::ShapeMismatch,
                  "grid features not populated for view " +
                      std::to_string(grid.view_ids[j]));
    }
    feats = tape.constant(grid.features[j]);
  }
  ad::Var raw = tape.concat_cols({tape.constant(inputs.encodings[j]),
                                  tape.repeat_row(embed_row, p), feats,
                                  tape.constant(grid.colors[j])});
  return linear(tape, raw, pv, "token_proj");
}

ForwardResult one_mlp_forward(ad::Tape& tape, const ModelConfig& config,
                              const ParamVars& pv,
                              const EpipolarSampleGrid& grid,
                              const Eigen::VectorXd& target_encoding,
                              const std::vector<ad::Var>* feature_maps,
                              const std::vector<std::pair<int, int>>* map_sizes) {
  const int p = grid.num_points();
  const int k = grid.num_views();
  if (p != config.one_mlp_points || k != config.one_mlp_views) {
    throw Error(ErrorCode::ShapeMismatch,
                "single-MLP baseline was built for P=" +
                    std::to_string(config.one_mlp_points) +
                    " K=" + std::to_string(config.one_mlp_views));
  }
  TokenInputs inputs = build_token_inputs(config, grid);
  ad::Var target_rep = tape.repeat_row(
      tape.constant(target_encoding.transpose()), p);
  std::vector<ad::Var> per_view;
  for (int j = 0; j < k; ++j) {
    if (grid.view_ids[j] >= config.num_views || grid.view_ids[j] < 0) {
      throw Error(ErrorCode::UnknownView,
                  "view " + std::to_string(grid.view_ids[j]));
    }
    ad::Var embed_row = tape.gather_rows(
        pv.at("embed.table"), ad::GatherTaps{{{grid.view_ids[j], 1.0}}});
    ad::Var feats;
    if (feature_maps) {
      auto [w, h] = (*map_sizes)[j];
      ad::GatherTaps taps(p);
      for (int i = 0; i < p; ++i) {
        if (!grid.valid[j][i]) continue;
        auto t = bilinear_taps(grid.pixels[j](i, 0), grid.pixels[j](i, 1), w, h);
        taps[i].assign(t.begin(), t.end());
      }
      feats = tape.gather_rows((*feature_maps)[j], taps);
    } else {
      feats = tape.constant(grid.features[j]);
    }
    ad::Var raw = tape.concat_cols({tape.constant(inputs.encodings[j]),
                                    tape.repeat_row(embed_row, p), feats,
                                    tape.constant(grid.colors[j]), target_rep});
    ad::Var h = tape.gelu(linear(tape, raw, pv, "onemlp.layer0"));
    h = mlp_with_skips(tape, h, pv, "onemlp.layer", 1, config.one_mlp_layers);
    // Contract the point axis.
    ad::Var reduced = tape.add_row_broadcast(
        tape.matmul_tn(pv.at("onemlp.reduce_p.weight"), h),
        pv.at("onemlp.reduce_p.bias"));
    per_view.push_back(reduced);
  }
  ad::Var stacked = tape.concat_rows(per_view);
  ad::Var pooled = tape.add_row_broadcast(
      tape.matmul_tn(pv.at("onemlp.reduce_n.weight"), stacked),
      pv.at("onemlp.reduce_n.bias"));
  ForwardResult result;
  result.rgb = tape.sigmoid(linear(tape, pooled, pv, "head"));
  return result;
}

}  // namespace

Eigen::VectorXd encode_target_ray(const Ray& ray, const SceneFrame& frame,
                                  const ModelConfig& config) {
  switch (config.coord_kind()) {
    case CoordKind::Slab:
      return fourier_encode(slab_coords(ray, frame).vec() * frame.coord_scale,
                            config.fourier);
    case CoordKind::TwoSphere:
      return sh_encode(sphere_coords(ray, frame), config.spherical);
    case CoordKind::Plucker:
      return fourier_encode(plucker_coords(ray).vec(), config.fourier);
  }
  throw Error(ErrorCode::ConfigError, "unknown coordinate kind");
}

ForwardResult forward_ray(ad::Tape& tape, const ModelConfig& config,
                          const ParamVars& pv, const EpipolarSampleGrid& grid,
                          const Eigen::VectorXd& target_encoding,
                          const std::vector<ad::Var>* feature_maps,
                          const std::vector<std::pair<int, int>>* map_sizes) {
  if (config.variant == ModelVariant::Vanilla) {
    return vanilla_forward(tape, config, pv, target_encoding);
  }
  if (config.variant == ModelVariant::OneMlp) {
    return one_mlp_forward(tape, config, pv, grid, target_encoding,
                           feature_maps, map_sizes);
  }

  const int p = grid.num_points();
  const int k = grid.num_views();
  const int d = config.model_dim;
  const bool attention = config.variant == ModelVariant::Full;

  TokenInputs inputs = build_token_inputs(config, grid);
  ad::Var target_token =
      linear(tape, tape.constant(target_encoding.transpose()), pv, "target_proj");

  RenderTrace trace;
  trace.alpha = Eigen::MatrixXd::Zero(k, p);
  trace.beta = Eigen::VectorXd::Zero(k);
  trace.deltas = grid.deltas;
  trace.target_epi_features = Eigen::MatrixXd::Zero(k, d);
  trace.view_features = Eigen::MatrixXd::Zero(k, d);
  trace.view_features_out = Eigen::MatrixXd::Zero(k, d);
  trace.view_valid.assign(k, 0);

  std::vector<ad::Var> view_feats;     // z^j, 1 x D each
  std::vector<ad::Var> view_colors;    // alpha-weighted colors, 1 x 3
  Eigen::MatrixXd view_mask_logits = Eigen::MatrixXd::Zero(1, k);
  int valid_views = 0;

  for (int j = 0; j < k; ++j) {
    if (!grid.view_has_valid_point(j)) {
      view_feats.push_back(tape.constant(Eigen::MatrixXd::Zero(1, d)));
      view_colors.push_back(tape.constant(Eigen::MatrixXd::Zero(1, 3)));
      view_mask_logits(0, j) = kMaskLogit;
      continue;
    }
    trace.view_valid[j] = 1;
    ++valid_views;
    ad::Var tokens = view_tokens(tape, config, pv, grid, inputs, j,
                                 feature_maps, map_sizes);
    ad::Var seq = tape.concat_rows({target_token, tokens});
    Eigen::MatrixXd seq_mask(1, p + 1);
    seq_mask(0, 0) = 0.0;
    seq_mask.block(0, 1, 1, p) = inputs.point_mask_logits.row(j);
    ad::Var mask_var = tape.constant(seq_mask);
    seq = run_stack(tape, seq, mask_var, "epi", config, pv, attention);

    ad::Var target_out = tape.gather_rows(seq, identity_taps(0, 1));
    ad::Var points_out = tape.gather_rows(seq, identity_taps(1, p));
    ad::Var pair =
        tape.concat_cols({tape.repeat_row(target_out, p), points_out});
    ad::Var logits = tape.matmul_nt(pv.at("epi.pool.w"), pair);
    logits = tape.add(
        logits, tape.constant(inputs.point_mask_logits.row(j)));
    ad::Var alpha = tape.softmax_rows(logits);
    view_feats.push_back(tape.matmul(alpha, points_out));
    view_colors.push_back(
        tape.matmul(alpha, tape.constant(grid.colors[j])));

    trace.alpha.row(j) = tape.value(alpha).row(0);
    trace.target_epi_features.row(j) = tape.value(target_out).row(0);
    trace.view_features.row(j) = tape.value(view_feats.back()).row(0);
  }

  if (valid_views == 0) {
    throw Error(ErrorCode::AllViewsMasked,
                "no reference view sees any epipolar point");
  }

  ad::Var z = tape.concat_rows(view_feats);                      // K x D
  ad::Var view_seq = tape.concat_rows({target_token, z});        // (K+1) x D
  Eigen::MatrixXd seq_mask(1, k + 1);
  seq_mask(0, 0) = 0.0;
  seq_mask.block(0, 1, 1, k) = view_mask_logits;
  view_seq = run_stack(tape, view_seq, tape.constant(seq_mask), "view", config,
                       pv, attention);

  ad::Var target_out = tape.gather_rows(view_seq, identity_taps(0, 1));
  ad::Var views_out = tape.gather_rows(view_seq, identity_taps(1, k));
  ad::Var pair = tape.concat_cols({tape.repeat_row(target_out, k), views_out});
  ad::Var logits = tape.matmul_nt(pv.at("view.pool.w"), pair);
  logits = tape.add(logits, tape.constant(view_mask_logits));
  ad::Var beta = tape.softmax_rows(logits);

  ForwardResult result;
  ad::Var pooled = tape.matmul(beta, views_out);
  result.rgb = tape.sigmoid(linear(tape, pooled, pv, "head"));
  result.aux = tape.matmul(beta, tape.concat_rows(view_colors));

  trace.beta = tape.value(beta).row(0).transpose();
  trace.view_features_out = tape.value(views_out);
  trace.target_view_feature = tape.value(target_out).row(0);
  result.trace = std::move(trace);
  return result;
}

PlainForward forward_ray_plain(const ModelConfig& config,
                               const ModelParams& params,
                               const EpipolarSampleGrid& grid,
                               const Eigen::VectorXd& target_encoding) {
  ad::Tape tape;
  ParamVars pv = bind_params(tape, params, false);
  ForwardResult fr =
      forward_ray(tape, config, pv, grid, target_encoding, nullptr, nullptr);
  return {tape.value(fr.rgb).row(0).transpose(), std::move(fr.trace)};
}

}  // namespace lfr
