// Command-line front end: scene synthesis, training, rendering, evaluation,
// and the interpretability outputs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lfr/core/parallel.hpp"
#include "lfr/metrics/metrics.hpp"
#include "lfr/render/renderer.hpp"
#include "lfr/scene/checkpoint.hpp"
#include "lfr/scene/synthetic.hpp"
#include "lfr/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw lfr::Error(lfr::ErrorCode::IoError, "cannot open " + path);
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct RunSpec {
  lfr::ModelConfig model;
  lfr::SamplerConfig sampler;
  lfr::TrainConfig train;
};

RunSpec load_run_spec(const std::string& path) {
  RunSpec spec;
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw lfr::Error(lfr::ErrorCode::ParseError,
                     path + ": invalid JSON: " + e.what());
  }
  if (j.contains("model")) {
    spec.model = lfr::model_config_from_json(j.at("model").dump());
  }
  if (j.contains("sampler")) {
    spec.sampler = lfr::sampler_config_from_json(j.at("sampler").dump());
  }
  if (j.contains("train")) {
    const auto& jt = j.at("train");
    spec.train.batch_size = jt.value("batch_size", spec.train.batch_size);
    spec.train.total_steps = jt.value("total_steps", spec.train.total_steps);
    spec.train.warmup_steps = jt.value("warmup_steps", spec.train.warmup_steps);
    spec.train.base_lr = jt.value("base_lr", spec.train.base_lr);
    spec.train.aux_weight = jt.value("aux_weight", spec.train.aux_weight);
    spec.train.checkpoint_every =
        jt.value("checkpoint_every", spec.train.checkpoint_every);
    spec.train.log_every = jt.value("log_every", spec.train.log_every);
  }
  return spec;
}

lfr::CameraModel camera_from_spec(const lfr::Scene& scene,
                                  const std::string& spec) {
  // Either a view id into the scene or a path to a JSON camera record.
  if (!spec.empty() &&
      spec.find_first_not_of("0123456789") == std::string::npos) {
    return scene.view(std::stoi(spec)).camera;
  }
  json j;
  try {
    j = json::parse(slurp(spec));
  } catch (const json::exception& e) {
    throw lfr::Error(lfr::ErrorCode::ParseError,
                     spec + ": invalid camera JSON: " + e.what());
  }
  lfr::CameraModel cam;
  try {
    cam.view_id = j.value("view_id", -1);
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    for (int i = 0; i < 9; ++i) {
      cam.rotation(i / 3, i % 3) = j.at("rotation").at(i).get<double>();
    }
    for (int i = 0; i < 3; ++i) {
      cam.translation(i) = j.at("translation").at(i).get<double>();
    }
  } catch (const json::exception& e) {
    throw lfr::Error(lfr::ErrorCode::ParseError,
                     spec + ": bad camera record: " + e.what());
  }
  if (!cam.pose_valid()) {
    throw lfr::Error(lfr::ErrorCode::InvalidPose,
                     spec + ": rotation is not orthonormal");
  }
  return cam;
}

lfr::Image srgb_quantized(const lfr::Image& img) {
  lfr::Image out = img;
  for (Eigen::Index i = 0; i < out.pixels.size(); ++i) {
    out.pixels(i) = lfr::quantize_srgb8(
        std::min(1.0, std::max(0.0, out.pixels(i))));
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Light-field rendering toolkit"};
  app.require_subcommand(1);
  uint64_t seed = 0;
  int threads = 1;
  bool deterministic = false;
  app.add_option("--seed", seed, "random seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads (1 = serial)")
      ->capture_default_str();
  app.add_flag("--deterministic", deterministic,
               "force sequential deterministic reductions");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
  std::string synth_spec, synth_out;
  synth->add_option("spec", synth_spec, "scene spec JSON")->required();
  synth->add_option("out_dir", synth_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train a model on a scene");
  std::string train_scene, train_config, train_ckpt, train_log;
  train->add_option("scene", train_scene, "scene manifest")->required();
  train->add_option("config", train_config, "run config JSON")->required();
  train->add_option("ckpt_out", train_ckpt, "checkpoint output path")->required();
  train->add_option("--log", train_log, "metrics log file");

  // render
  auto* render = app.add_subcommand("render", "render a view");
  std::string render_ckpt, render_scene, render_camera, render_out;
  render->add_option("ckpt", render_ckpt)->required();
  render->add_option("scene", render_scene)->required();
  render->add_option("--camera", render_camera, "view id or pose JSON file")
      ->required();
  render->add_option("--out", render_out, "output PNG path")->required();
  int block_size = 4096;
  render->add_option("--block-size", block_size)->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate on a split");
  std::string eval_ckpt, eval_scene, eval_split = "test", eval_report;
  eval->add_option("ckpt", eval_ckpt)->required();
  eval->add_option("scene", eval_scene)->required();
  eval->add_option("--split", eval_split, "train or test")
      ->capture_default_str();
  eval->add_option("--report", eval_report, "report output file");

  // epi
  auto* epi = app.add_subcommand("epi", "render an epipolar-plane image");
  std::string epi_ckpt, epi_scene, epi_out;
  std::string epi_fixed = "t=0,v=0";
  std::string epi_row = "s,-0.5,0.5,64", epi_col = "u,-0.5,0.5,64";
  epi->add_option("ckpt", epi_ckpt)->required();
  epi->add_option("scene", epi_scene)->required();
  epi->add_option("--fixed", epi_fixed, "fixed coords, e.g. t=0,v=0")
      ->capture_default_str();
  epi->add_option("--row", epi_row, "swept row coord: name,min,max,res")
      ->capture_default_str();
  epi->add_option("--col", epi_col, "swept column coord: name,min,max,res")
      ->capture_default_str();
  epi->add_option("--out", epi_out)->required();

  // disparity
  auto* disp = app.add_subcommand("disparity", "render a disparity map");
  std::string disp_ckpt, disp_scene, disp_camera, disp_out;
  disp->add_option("ckpt", disp_ckpt)->required();
  disp->add_option("scene", disp_scene)->required();
  disp->add_option("--camera", disp_camera)->required();
  disp->add_option("--out", disp_out, "output prefix (.f32 and .png)")
      ->required();

  // attention
  auto* attn = app.add_subcommand("attention", "render view-attention RGB");
  std::string attn_ckpt, attn_scene, attn_camera, attn_out;
  attn->add_option("ckpt", attn_ckpt)->required();
  attn->add_option("scene", attn_scene)->required();
  attn->add_option("--camera", attn_camera)->required();
  attn->add_option("--out", attn_out)->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  std::string gc_config;
  gc->add_option("config", gc_config, "run config JSON")->required();

  CLI11_PARSE(app, argc, argv);
  lfr::set_num_threads(deterministic ? 1 : threads);

  auto coord_index = [](const std::string& name) {
    if (name == "s") return 0;
    if (name == "t") return 1;
    if (name == "u") return 2;
    if (name == "v") return 3;
    throw lfr::Error(lfr::ErrorCode::ConfigError,
                     "unknown slab coordinate '" + name + "'");
  };

  if (synth->parsed()) {
    lfr::SyntheticSceneSpec spec = lfr::synthetic_spec_from_json(slurp(synth_spec));
    if (seed != 0) spec.seed = seed;
    lfr::Scene scene = lfr::generate_synthetic(spec);
    lfr::save_scene(scene, synth_out);
    std::cout << "wrote " << scene.views.size() << " views to " << synth_out
              << "\n";
  } else if (train->parsed()) {
    RunSpec spec = load_run_spec(train_config);
    spec.train.seed = seed;
    lfr::Scene scene = lfr::load_scene(train_scene);
    lfr::Trainer trainer(scene, spec.model, spec.sampler, spec.train);
    std::ofstream log;
    if (!train_log.empty()) log.open(train_log);
    trainer.train(train_log.empty() ? nullptr : &log, train_ckpt);
    lfr::Checkpoint ckpt{trainer.model_config(), trainer.sampler_config(),
                         trainer.params(), trainer.opt_state().to_tensors(),
                         trainer.opt_state().step};
    lfr::save_checkpoint(ckpt, train_ckpt);
    std::cout << "trained " << ckpt.step << " steps -> " << train_ckpt << "\n";
  } else if (render->parsed()) {
    lfr::Checkpoint ckpt = lfr::load_checkpoint(render_ckpt);
    lfr::Scene scene = lfr::load_scene(render_scene);
    lfr::RenderContext ctx =
        lfr::make_render_context(scene, ckpt.config, ckpt.sampler, ckpt.params);
    lfr::RenderRequest request;
    request.camera = camera_from_spec(scene, render_camera);
    request.block_size = block_size;
    lfr::RenderOutputs out = lfr::render_image(ckpt.params, ctx, request);
    lfr::write_png(render_out, out.color);
    std::cout << "wrote " << render_out << " (" << out.flagged.size()
              << " flagged pixels)\n";
  } else if (eval->parsed()) {
    lfr::Checkpoint ckpt = lfr::load_checkpoint(eval_ckpt);
    lfr::Scene scene = lfr::load_scene(eval_scene);
    const std::vector<int>& ids =
        eval_split == "train" ? scene.train_ids : scene.test_ids;
    if (eval_split != "train" && eval_split != "test") {
      throw lfr::Error(lfr::ErrorCode::ConfigError,
                       "--split must be train or test");
    }
    lfr::RenderContext ctx =
        lfr::make_render_context(scene, ckpt.config, ckpt.sampler, ckpt.params);
    lfr::EvalReport report;
    for (int id : ids) {
      lfr::RenderRequest request;
      request.camera = scene.view(id).camera;
      lfr::RenderOutputs out = lfr::render_image(ckpt.params, ctx, request);
      lfr::Image pred = srgb_quantized(out.color);
      lfr::Image gt = srgb_quantized(scene.view(id).image);
      lfr::EvalRow row;
      row.name = "view_" + std::to_string(id);
      row.psnr = lfr::psnr(pred, gt);
      row.ssim = lfr::ssim(pred, gt);
      report.rows.push_back(row);
    }
    report.finalize();
    std::string text = report.to_text();
    std::cout << text;
    if (!eval_report.empty()) {
      std::ofstream out(eval_report);
      if (!out) {
        throw lfr::Error(lfr::ErrorCode::IoError,
                         "cannot write report " + eval_report);
      }
      out << text;
    }
  } else if (epi->parsed()) {
    lfr::Checkpoint ckpt = lfr::load_checkpoint(epi_ckpt);
    lfr::Scene scene = lfr::load_scene(epi_scene);
    lfr::RenderContext ctx =
        lfr::make_render_context(scene, ckpt.config, ckpt.sampler, ckpt.params);
    lfr::EpiRequest request;
    {
      std::istringstream fixed(epi_fixed);
      std::string part;
      int slot = 0;
      while (std::getline(fixed, part, ',') && slot < 2) {
        auto eq = part.find('=');
        if (eq == std::string::npos) {
          throw lfr::Error(lfr::ErrorCode::ConfigError,
                           "--fixed expects name=value pairs");
        }
        request.fixed_indices[slot] = coord_index(part.substr(0, eq));
        request.fixed_values[slot] = std::stod(part.substr(eq + 1));
        ++slot;
      }
      auto parse_axis = [&](const std::string& text, int& index, double& lo,
                            double& hi, int& res) {
        std::istringstream ss(text);
        std::string name, a, b, c;
        if (!std::getline(ss, name, ',') || !std::getline(ss, a, ',') ||
            !std::getline(ss, b, ',') || !std::getline(ss, c, ',')) {
          throw lfr::Error(lfr::ErrorCode::ConfigError,
                           "axis spec must be name,min,max,res");
        }
        index = coord_index(name);
        lo = std::stod(a);
        hi = std::stod(b);
        res = std::stoi(c);
      };
      parse_axis(epi_row, request.row_index, request.row_min, request.row_max,
                 request.rows);
      parse_axis(epi_col, request.col_index, request.col_min, request.col_max,
                 request.cols);
    }
    lfr::Image out = lfr::epi_slice(ckpt.params, ctx, request);
    lfr::write_png(epi_out, out);
    std::cout << "wrote " << epi_out << "\n";
  } else if (disp->parsed()) {
    lfr::Checkpoint ckpt = lfr::load_checkpoint(disp_ckpt);
    lfr::Scene scene = lfr::load_scene(disp_scene);
    lfr::RenderContext ctx =
        lfr::make_render_context(scene, ckpt.config, ckpt.sampler, ckpt.params);
    lfr::RenderRequest request;
    request.camera = camera_from_spec(scene, disp_camera);
    request.want_disparity = true;
    lfr::RenderOutputs out = lfr::render_image(ckpt.params, ctx, request);
    lfr::write_f32(disp_out + ".f32", out.disparity);
    lfr::write_gray_preview(disp_out + ".png", out.disparity,
                            request.camera.width, request.camera.height);
    std::cout << "wrote " << disp_out << ".f32 and " << disp_out << ".png\n";
  } else if (attn->parsed()) {
    lfr::Checkpoint ckpt = lfr::load_checkpoint(attn_ckpt);
    lfr::Scene scene = lfr::load_scene(attn_scene);
    lfr::RenderContext ctx =
        lfr::make_render_context(scene, ckpt.config, ckpt.sampler, ckpt.params);
    lfr::Image out = lfr::view_attention_image(
        ckpt.params, ctx, camera_from_spec(scene, attn_camera));
    lfr::write_png(attn_out, out);
    std::cout << "wrote " << attn_out << "\n";
  } else if (gc->parsed()) {
    RunSpec spec = load_run_spec(gc_config);
    // Built-in tiny two-plane scene keeps the check self-contained.
    lfr::SyntheticSceneSpec scene_spec;
    lfr::PlaneSpec plane;
    plane.depth = 2.0;
    plane.cell_size = 0.3;
    plane.color_a = {0.9, 0.6, 0.2};
    plane.color_b = {0.1, 0.3, 0.8};
    scene_spec.planes.push_back(plane);
    scene_spec.num_cameras = 4;
    scene_spec.rig_extent = 0.3;
    scene_spec.image_size = 16;
    scene_spec.focal = 16.0;
    scene_spec.frame.z_st = 1.0;
    scene_spec.frame.z_uv = 3.0;
    scene_spec.frame.near = 1.0;
    scene_spec.frame.far = 3.0;
    lfr::Scene scene = lfr::generate_synthetic(scene_spec);
    spec.model.num_views = scene_spec.num_cameras;
    lfr::GradCheckOptions options;
    options.seed = seed;
    options.init_scale = 5.0;
    lfr::GradCheckReport report =
        lfr::grad_check(spec.model, spec.sampler, scene, options);
    for (const auto& [group, err] : report.group_max) {
      std::cout << group << "\t" << err << "\n";
    }
    std::cout << "max_rel_error\t" << report.max_rel_error << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const lfr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
