#include "lfr/scene/scene.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "lfr/core/error.hpp"

namespace lfr {

namespace fs = std::filesystem;
using nlohmann::json;

const SceneView& Scene::view(int id) const {
  if (id < 0 || id >= static_cast<int>(views.size())) {
    throw Error(ErrorCode::UnknownView, "no view with id " + std::to_string(id));
  }
  return views[id];
}

std::vector<CameraModel> Scene::cameras() const {
  std::vector<CameraModel> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(v.camera);
  return out;
}

std::vector<CameraModel> Scene::cameras_for(const std::vector<int>& ids) const {
  std::vector<CameraModel> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(view(id).camera);
  return out;
}

namespace {

constexpr const char* kFormat = "lfscene-v1";

json frame_to_json(const SceneFrame& f) {
  return json{{"z_st", f.z_st},
              {"z_uv", f.z_uv},
              {"sphere_center", {f.sphere_center.x(), f.sphere_center.y(),
                                 f.sphere_center.z()}},
              {"sphere_radius", f.sphere_radius},
              {"near", f.near},
              {"far", f.far},
              {"coord_scale", f.coord_scale}};
}

SceneFrame frame_from_json(const json& j) {
  SceneFrame f;
  f.z_st = j.at("z_st").get<double>();
  f.z_uv = j.at("z_uv").get<double>();
  auto c = j.at("sphere_center");
  f.sphere_center = {c.at(0).get<double>(), c.at(1).get<double>(),
                     c.at(2).get<double>()};
  f.sphere_radius = j.at("sphere_radius").get<double>();
  f.near = j.at("near").get<double>();
  f.far = j.at("far").get<double>();
  f.coord_scale = j.value("coord_scale", 1.0);
  return f;
}

std::vector<int> ids_from_json(const json& j) {
  std::vector<int> out;
  for (const auto& v : j) out.push_back(v.get<int>());
  return out;
}

}  // namespace

Scene load_scene(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open manifest " + manifest_path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError,
                manifest_path + ": invalid JSON: " + e.what());
  }

  Scene scene;
  fs::path dir = fs::path(manifest_path).parent_path();
  try {
    if (j.at("format").get<std::string>() != kFormat) {
      throw Error(ErrorCode::ParseError,
                  manifest_path + ": unsupported format tag");
    }
    std::string param = j.at("parametrization").get<std::string>();
    if (param == "slab") {
      scene.parametrization = Parametrization::Slab;
    } else if (param == "two_sphere") {
      scene.parametrization = Parametrization::TwoSphere;
    } else {
      throw Error(ErrorCode::ParseError,
                  manifest_path + ": unknown parametrization '" + param + "'");
    }
    scene.frame = frame_from_json(j.at("frame"));
    if (!scene.frame.valid()) {
      throw Error(ErrorCode::ParseError, manifest_path + ": invalid frame");
    }

    const auto& cams = j.at("cameras");
    scene.views.resize(cams.size());
    for (const auto& jc : cams) {
      SceneView view;
      CameraModel& cam = view.camera;
      cam.view_id = jc.at("view_id").get<int>();
      if (cam.view_id < 0 || cam.view_id >= static_cast<int>(cams.size())) {
        throw Error(ErrorCode::ParseError,
                    manifest_path + ": view ids must be 0..N-1, got " +
                        std::to_string(cam.view_id));
      }
      cam.width = jc.at("width").get<int>();
      cam.height = jc.at("height").get<int>();
      cam.fx = jc.at("fx").get<double>();
      cam.fy = jc.at("fy").get<double>();
      cam.cx = jc.at("cx").get<double>();
      cam.cy = jc.at("cy").get<double>();
      const auto& r = jc.at("rotation");
      const auto& t = jc.at("translation");
      if (r.size() != 9 || t.size() != 3) {
        throw Error(ErrorCode::ParseError,
                    manifest_path + ": rotation/translation size");
      }
      for (int i = 0; i < 9; ++i) cam.rotation(i / 3, i % 3) = r.at(i).get<double>();
      for (int i = 0; i < 3; ++i) cam.translation(i) = t.at(i).get<double>();
      if (!cam.pose_valid()) {
        throw Error(ErrorCode::InvalidPose,
                    "view " + std::to_string(cam.view_id) +
                        ": rotation is not a proper orthonormal matrix");
      }
      view.image_path = jc.at("image").get<std::string>();
      fs::path img = dir / view.image_path;
      if (!fs::exists(img)) {
        throw Error(ErrorCode::MissingImage,
                    "view " + std::to_string(cam.view_id) + ": missing image " +
                        img.string());
      }
      view.image = read_png(img.string());
      if (view.image.width != cam.width || view.image.height != cam.height) {
        throw Error(ErrorCode::ParseError,
                    "view " + std::to_string(cam.view_id) +
                        ": image size does not match the declared size");
      }
      if (jc.contains("depth")) {
        view.depth_path = jc.at("depth").get<std::string>();
        view.depth = read_f32((dir / view.depth_path).string(),
                              cam.width * cam.height, 1)
                         .col(0);
      }
      scene.views[cam.view_id] = std::move(view);
    }

    scene.train_ids = ids_from_json(j.at("splits").at("train"));
    scene.test_ids = ids_from_json(j.at("splits").at("test"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError,
                manifest_path + ": " + std::string(e.what()));
  }

  std::set<int> seen;
  for (int id : scene.train_ids) {
    if (id < 0 || id >= static_cast<int>(scene.views.size()) || !seen.insert(id).second) {
      throw Error(ErrorCode::ParseError,
                  manifest_path + ": bad train split id " + std::to_string(id));
    }
  }
  for (int id : scene.test_ids) {
    if (id < 0 || id >= static_cast<int>(scene.views.size()) || !seen.insert(id).second) {
      throw Error(ErrorCode::ParseError,
                  manifest_path +
                      ": test split id duplicated or out of range: " +
                      std::to_string(id));
    }
  }
  return scene;
}

void save_scene(const Scene& scene, const std::string& out_dir) {
  fs::create_directories(out_dir);
  json j;
  j["format"] = kFormat;
  j["parametrization"] =
      scene.parametrization == Parametrization::Slab ? "slab" : "two_sphere";
  j["frame"] = frame_to_json(scene.frame);
  j["cameras"] = json::array();
  for (const auto& view : scene.views) {
    const CameraModel& cam = view.camera;
    char name[64];
    std::snprintf(name, sizeof name, "view_%03d.png", cam.view_id);
    std::string image_rel = view.image_path.empty() ? name : view.image_path;
    json jc{{"view_id", cam.view_id}, {"image", image_rel},
            {"width", cam.width},     {"height", cam.height},
            {"fx", cam.fx},           {"fy", cam.fy},
            {"cx", cam.cx},           {"cy", cam.cy}};
    jc["rotation"] = json::array();
    for (int i = 0; i < 9; ++i) jc["rotation"].push_back(cam.rotation(i / 3, i % 3));
    jc["translation"] = {cam.translation.x(), cam.translation.y(),
                         cam.translation.z()};
    write_png((fs::path(out_dir) / image_rel).string(), view.image);
    if (view.depth.size() > 0) {
      std::snprintf(name, sizeof name, "depth_%03d.f32", cam.view_id);
      std::string depth_rel = view.depth_path.empty() ? name : view.depth_path;
      jc["depth"] = depth_rel;
      write_f32((fs::path(out_dir) / depth_rel).string(), view.depth);
    }
    j["cameras"].push_back(std::move(jc));
  }
  j["splits"] = {{"train", scene.train_ids}, {"test", scene.test_ids}};

  std::ofstream out(fs::path(out_dir) / "manifest.json");
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write manifest in " + out_dir);
  }
  out << j.dump(2) << "\n";
}

}  // namespace lfr
