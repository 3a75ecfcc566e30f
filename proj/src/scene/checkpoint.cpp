#include "lfr/scene/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "lfr/core/error.hpp"

namespace lfr {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'L', 'F', 'C', 'K'};
constexpr uint32_t kVersion = 1;

json model_config_json(const ModelConfig& c) {
  const char* variant = "full";
  switch (c.variant) {
    case ModelVariant::Full: variant = "full"; break;
    case ModelVariant::Vanilla: variant = "vanilla"; break;
    case ModelVariant::OneMlp: variant = "one_mlp"; break;
    case ModelVariant::TwoMlp: variant = "two_mlp"; break;
  }
  return json{
      {"variant", variant},
      {"parametrization",
       c.parametrization == Parametrization::Slab ? "slab" : "two_sphere"},
      {"use_plucker", c.use_plucker},
      {"model_dim", c.model_dim},
      {"num_blocks", c.num_blocks},
      {"mlp_hidden", c.mlp_hidden},
      {"conv_channels", c.conv_channels},
      {"conv_kernel", c.conv_kernel},
      {"cam_embed_dim", c.cam_embed_dim},
      {"num_views", c.num_views},
      {"fourier_frequencies", c.fourier.num_frequencies},
      {"spherical_degree", c.spherical.max_degree},
      {"spherical_sine_sectoral", c.spherical.include_sine_sectoral},
      {"vanilla_layers", c.vanilla_layers},
      {"one_mlp_layers", c.one_mlp_layers},
      {"one_mlp_points", c.one_mlp_points},
      {"one_mlp_views", c.one_mlp_views}};
}

ModelConfig model_config_parse(const json& j) {
  ModelConfig c;
  std::string variant = j.value("variant", "full");
  if (variant == "full") c.variant = ModelVariant::Full;
  else if (variant == "vanilla") c.variant = ModelVariant::Vanilla;
  else if (variant == "one_mlp") c.variant = ModelVariant::OneMlp;
  else if (variant == "two_mlp") c.variant = ModelVariant::TwoMlp;
  else throw Error(ErrorCode::ConfigError, "unknown variant '" + variant + "'");
  std::string param = j.value("parametrization", "slab");
  if (param == "slab") c.parametrization = Parametrization::Slab;
  else if (param == "two_sphere") c.parametrization = Parametrization::TwoSphere;
  else throw Error(ErrorCode::ConfigError, "unknown parametrization '" + param + "'");
  c.use_plucker = j.value("use_plucker", false);
  c.model_dim = j.value("model_dim", c.model_dim);
  c.num_blocks = j.value("num_blocks", c.num_blocks);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.conv_channels = j.value("conv_channels", c.conv_channels);
  c.conv_kernel = j.value("conv_kernel", c.conv_kernel);
  c.cam_embed_dim = j.value("cam_embed_dim", c.cam_embed_dim);
  c.num_views = j.value("num_views", c.num_views);
  c.fourier.num_frequencies = j.value("fourier_frequencies", 5);
  c.spherical.max_degree = j.value("spherical_degree", 4);
  c.spherical.include_sine_sectoral = j.value("spherical_sine_sectoral", false);
  c.vanilla_layers = j.value("vanilla_layers", c.vanilla_layers);
  c.one_mlp_layers = j.value("one_mlp_layers", c.one_mlp_layers);
  c.one_mlp_points = j.value("one_mlp_points", c.one_mlp_points);
  c.one_mlp_views = j.value("one_mlp_views", c.one_mlp_views);
  return c;
}

json sampler_config_json(const SamplerConfig& s) {
  return json{{"num_reference_views", s.num_reference_views},
              {"candidate_pool", s.candidate_pool},
              {"points_per_view", s.points_per_view},
              {"depth_spacing", s.depth_spacing == DepthSpacing::UniformDelta
                                    ? "uniform_delta"
                                    : "uniform_inverse_depth"}};
}

SamplerConfig sampler_config_parse(const json& j) {
  SamplerConfig s;
  s.num_reference_views = j.value("num_reference_views", s.num_reference_views);
  s.candidate_pool = j.value("candidate_pool", s.candidate_pool);
  s.points_per_view = j.value("points_per_view", s.points_per_view);
  std::string spacing = j.value("depth_spacing", "uniform_inverse_depth");
  if (spacing == "uniform_delta") s.depth_spacing = DepthSpacing::UniformDelta;
  else if (spacing == "uniform_inverse_depth")
    s.depth_spacing = DepthSpacing::UniformInverseDepth;
  else throw Error(ErrorCode::ConfigError, "unknown depth_spacing '" + spacing + "'");
  return s;
}

void append_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

uint32_t read_u32(const std::string& buf, size_t at) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf[at + i])) << (8 * i);
  return v;
}

void append_tensors(std::string& data, json& manifest,
                    const std::map<std::string, Eigen::MatrixXd>& tensors) {
  for (const auto& [name, t] : tensors) {
    manifest.push_back(json{{"name", name},
                            {"rows", t.rows()},
                            {"cols", t.cols()},
                            {"offset", data.size()}});
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        float f = static_cast<float>(t(r, c));
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        append_u32(data, bits);
      }
    }
  }
}

std::map<std::string, Eigen::MatrixXd> extract_tensors(const json& manifest,
                                                       const std::string& data) {
  std::map<std::string, Eigen::MatrixXd> out;
  for (const auto& entry : manifest) {
    std::string name = entry.at("name").get<std::string>();
    Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
    Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
    size_t offset = entry.at("offset").get<size_t>();
    size_t bytes = size_t(rows) * size_t(cols) * 4;
    if (offset + bytes > data.size()) {
      throw Error(ErrorCode::CorruptArchive,
                  "tensor " + name + " extends past the data section");
    }
    Eigen::MatrixXd t(rows, cols);
    size_t at = offset;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c, at += 4) {
        uint32_t bits = read_u32(data, at);
        float f;
        std::memcpy(&f, &bits, 4);
        t(r, c) = f;
      }
    }
    out.emplace(name, std::move(t));
  }
  return out;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) {
  return model_config_json(config).dump(2);
}

ModelConfig model_config_from_json(const std::string& text) {
  try {
    return model_config_parse(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model config: ") + e.what());
  }
}

std::string sampler_config_to_json(const SamplerConfig& config) {
  return sampler_config_json(config).dump(2);
}

SamplerConfig sampler_config_from_json(const std::string& text) {
  try {
    return sampler_config_parse(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("sampler config: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json header;
  header["model"] = model_config_json(ckpt.config);
  header["sampler"] = sampler_config_json(ckpt.sampler);
  header["step"] = ckpt.step;
  header["tensors"] = json::array();
  header["opt_tensors"] = json::array();

  std::string data;
  append_tensors(data, header["tensors"], ckpt.params.tensors);
  append_tensors(data, header["opt_tensors"], ckpt.opt_tensors);

  std::string header_text = header.dump();
  std::string blob;
  blob.append(kMagic, 4);
  append_u32(blob, kVersion);
  append_u32(blob, static_cast<uint32_t>(header_text.size()));
  blob += header_text;
  blob += data;
  uint32_t crc = crc32(0L, reinterpret_cast<const Bytef*>(blob.data()),
                       static_cast<uInt>(blob.size()));
  append_u32(blob, crc);

  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(blob.data(), blob.size())) {
    throw Error(ErrorCode::IoError, "cannot write checkpoint " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path, const ModelConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open checkpoint " + path);
  }
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::CorruptArchive, path + ": not a checkpoint file");
  }
  // The version gates everything else: a future format may not even share
  // this trailer layout, so it is checked before the checksum.
  uint32_t version = read_u32(blob, 4);
  if (version != kVersion) {
    throw Error(ErrorCode::VersionMismatch,
                path + ": format version " + std::to_string(version) +
                    ", expected " + std::to_string(kVersion));
  }
  uint32_t crc_stored = read_u32(blob, blob.size() - 4);
  uint32_t crc_actual =
      crc32(0L, reinterpret_cast<const Bytef*>(blob.data()),
            static_cast<uInt>(blob.size() - 4));
  if (crc_stored != crc_actual) {
    throw Error(ErrorCode::CorruptArchive, path + ": checksum mismatch");
  }
  uint32_t header_len = read_u32(blob, 8);
  if (12 + size_t(header_len) + 4 > blob.size()) {
    throw Error(ErrorCode::CorruptArchive, path + ": truncated header");
  }
  json header;
  try {
    header = json::parse(blob.substr(12, header_len));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptArchive,
                path + ": bad header: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  std::string data = blob.substr(12 + header_len, blob.size() - 16 - header_len);
  try {
    ckpt.config = model_config_parse(header.at("model"));
    ckpt.sampler = sampler_config_parse(header.at("sampler"));
    ckpt.step = header.at("step").get<int64_t>();
    ckpt.params.tensors = extract_tensors(header.at("tensors"), data);
    ckpt.opt_tensors = extract_tensors(header.at("opt_tensors"), data);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptArchive,
                path + ": bad header: " + std::string(e.what()));
  }

  if (expected) {
    Rng rng(0);
    ModelParams reference = ModelParams::init(*expected, rng);
    for (const auto& [name, t] : reference.tensors) {
      auto it = ckpt.params.tensors.find(name);
      if (it == ckpt.params.tensors.end()) {
        throw Error(ErrorCode::ShapeMismatch,
                    path + ": checkpoint lacks tensor " + name);
      }
      if (it->second.rows() != t.rows() || it->second.cols() != t.cols()) {
        throw Error(ErrorCode::ShapeMismatch,
                    path + ": tensor " + name + " has shape " +
                        std::to_string(it->second.rows()) + "x" +
                        std::to_string(it->second.cols()) + ", expected " +
                        std::to_string(t.rows()) + "x" +
                        std::to_string(t.cols()));
      }
    }
    for (const auto& [name, t] : ckpt.params.tensors) {
      if (!reference.tensors.count(name)) {
        throw Error(ErrorCode::ShapeMismatch,
                    path + ": unexpected tensor " + name);
      }
    }
  }
  return ckpt;
}

}  // namespace lfr
