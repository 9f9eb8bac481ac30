#pragma once

// ".ckpt" checkpoints:
//   "FXH1", u32 header byte length, UTF-8 JSON header, f32 tensor payloads.
// The header carries the model config, the label vocabularies, the seed and
// a table of {name, shape, offset}; offsets are bytes from payload start and
// tensors are stored column-major.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gruface/binary_io.hpp"
#include "gruface/model.hpp"

namespace gruface {

struct Checkpoint {
  ModelParams params;
  std::uint64_t seed = 0;
  std::vector<std::string> subject_labels;
  std::vector<std::string> emotion_labels;
};

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"cell", cell_name(c.cell)},         {"hidden_size", c.hidden_size},   {"num_layers", c.num_layers},
          {"input_width", c.input_width},      {"num_vertices", c.num_vertices}, {"num_subjects", c.num_subjects},
          {"num_emotions", c.num_emotions},    {"dropout_rate", c.dropout_rate}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.cell = parse_cell(j.at("cell").get<std::string>());
  c.hidden_size = j.at("hidden_size").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.input_width = j.at("input_width").get<int>();
  c.num_vertices = j.at("num_vertices").get<int>();
  c.num_subjects = j.at("num_subjects").get<int>();
  c.num_emotions = j.at("num_emotions").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.validate();
  return c;
}

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  const ModelParams& p = ckpt.params;
  require(ckpt.subject_labels.size() == static_cast<std::size_t>(p.config.num_subjects) &&
              ckpt.emotion_labels.size() == static_cast<std::size_t>(p.config.num_emotions),
          ErrorCode::invalid_config, "checkpoint label vocabularies do not match the model config");
  nlohmann::json table = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : p.tensors()) {
    table.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"offset", offset}});
    offset += t.values.size() * 4;
  }
  const nlohmann::json header = {{"format", "FXH1"},
                                 {"config", model_config_to_json(p.config)},
                                 {"seed", ckpt.seed},
                                 {"subjects", ckpt.subject_labels},
                                 {"emotions", ckpt.emotion_labels},
                                 {"tensors", table},
                                 {"payload_bytes", offset}};
  const std::string text = header.dump();
  io::ByteWriter w;
  w.magic("FXH1");
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(text);
  for (const auto& t : p.tensors())
    for (double v : t.values) w.f32(static_cast<float>(v));
  return w.bytes();
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic("FXH1");
  const std::uint32_t header_len = r.u32();
  const std::size_t header_at = r.position();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.raw(header_len));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::bad_format, source + ": malformed JSON header at byte " + std::to_string(header_at) + ": " + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.params = zero_params(model_config_from_json(header.at("config")));
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.subject_labels = header.at("subjects").get<std::vector<std::string>>();
    ckpt.emotion_labels = header.at("emotions").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::bad_format, source + ": incomplete header: " + e.what());
  }
  require(ckpt.subject_labels.size() == static_cast<std::size_t>(ckpt.params.config.num_subjects) &&
              ckpt.emotion_labels.size() == static_cast<std::size_t>(ckpt.params.config.num_emotions),
          ErrorCode::bad_format, source + ": label vocabularies disagree with the config");

  const auto& table = header.at("tensors");
  auto tensors = ckpt.params.tensors();
  require(table.is_array() && table.size() == tensors.size(), ErrorCode::bad_format,
          source + ": tensor table lists " + std::to_string(table.size()) + " tensors, config implies " +
              std::to_string(tensors.size()));
  const std::size_t payload_at = r.position();
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& t = tensors[i];
    const auto& entry = table[i];
    const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
    require(entry.at("name").get<std::string>() == t.name && shape.size() == 2 && shape[0] == t.rows &&
                shape[1] == t.cols && entry.at("offset").get<std::size_t>() == expected_offset,
            ErrorCode::bad_format, source + ": tensor table entry " + std::to_string(i) + " (" + t.name +
                                       ") does not match the config");
    r.need(t.values.size() * 4, t.name + " payload at byte " + std::to_string(payload_at + expected_offset));
    for (double& v : t.values) v = r.f32();
    expected_offset += t.values.size() * 4;
  }
  r.expect_end();
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

}  // namespace gruface
