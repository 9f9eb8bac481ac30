#pragma once

// Little-endian mesh file formats:
//   .msq  "MSQ1" u32 T, u32 V, f32 fps, T*V*3 f32 (frame-major, vertex-major, xyz)
//   .tpl  "TPL1" u32 V, V*3 f32
//   .hmv  "HMV1" u32 V, V f32
//   stats UTF-8 JSON {"mean":[3],"range":[3]}

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "gruface/binary_io.hpp"
#include "gruface/mesh.hpp"

namespace gruface {

inline std::vector<std::uint8_t> encode_mesh_sequence(const MeshSequence& seq) {
  validate(seq);
  io::ByteWriter w;
  w.magic("MSQ1");
  w.u32(static_cast<std::uint32_t>(seq.num_frames()));
  w.u32(static_cast<std::uint32_t>(seq.num_vertices()));
  w.f32(static_cast<float>(seq.fps));
  for (Eigen::Index t = 0; t < seq.frames.rows(); ++t)
    for (Eigen::Index c = 0; c < seq.frames.cols(); ++c) w.f32(static_cast<float>(seq.frames(t, c)));
  return w.bytes();
}

inline MeshSequence decode_mesh_sequence(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic("MSQ1");
  const std::uint32_t frames = r.u32();
  const std::uint32_t verts = r.u32();
  const float fps = r.f32();
  require(frames >= 1 && verts >= 1, ErrorCode::bad_format,
          source + ": header at byte 4 declares T=" + std::to_string(frames) + ", V=" + std::to_string(verts));
  require(fps > 0.0f && std::isfinite(fps), ErrorCode::bad_format, source + ": non-positive fps at byte 12");
  r.need(std::size_t{frames} * verts * 3 * 4, "vertex payload");
  MeshSequence seq(Matrix(frames, 3 * static_cast<Eigen::Index>(verts)), fps);
  for (Eigen::Index t = 0; t < seq.frames.rows(); ++t)
    for (Eigen::Index c = 0; c < seq.frames.cols(); ++c) seq.frames(t, c) = r.f32();
  r.expect_end();
  return seq;
}

inline void save_mesh_sequence(const MeshSequence& seq, const std::filesystem::path& path) {
  io::write_file(path, encode_mesh_sequence(seq));
}

inline MeshSequence load_mesh_sequence(const std::filesystem::path& path) {
  return decode_mesh_sequence(io::read_file(path), path.string());
}

inline std::vector<std::uint8_t> encode_template(const TemplateFace& face) {
  validate(face);
  io::ByteWriter w;
  w.magic("TPL1");
  w.u32(static_cast<std::uint32_t>(face.num_vertices()));
  for (Eigen::Index v = 0; v < face.vertices.rows(); ++v)
    for (int c = 0; c < 3; ++c) w.f32(static_cast<float>(face.vertices(v, c)));
  return w.bytes();
}

inline TemplateFace decode_template(const std::vector<std::uint8_t>& bytes, const std::string& source,
                                    std::string subject_id) {
  io::ByteReader r(bytes, source);
  r.expect_magic("TPL1");
  const std::uint32_t verts = r.u32();
  require(verts >= 1, ErrorCode::bad_format, source + ": header at byte 4 declares V=0");
  r.need(std::size_t{verts} * 3 * 4, "vertex payload");
  TemplateFace face{Matrix(verts, 3), std::move(subject_id)};
  for (Eigen::Index v = 0; v < face.vertices.rows(); ++v)
    for (int c = 0; c < 3; ++c) face.vertices(v, c) = r.f32();
  r.expect_end();
  return face;
}

inline void save_template(const TemplateFace& face, const std::filesystem::path& path) {
  io::write_file(path, encode_template(face));
}

/// The subject id of a template file is its filename stem.
inline TemplateFace load_template(const std::filesystem::path& path) {
  return decode_template(io::read_file(path), path.string(), path.stem().string());
}

inline nlohmann::json stats_to_json(const NormalizationStats& stats) {
  return {{"mean", stats.mean}, {"range", stats.range}};
}

inline NormalizationStats stats_from_json(const nlohmann::json& j, const std::string& source) {
  NormalizationStats stats;
  try {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto range = j.at("range").get<std::vector<double>>();
    require(mean.size() == 3 && range.size() == 3, ErrorCode::bad_format,
            source + ": mean and range must have 3 entries");
    for (int i = 0; i < 3; ++i) {
      stats.mean[i] = mean[i];
      stats.range[i] = range[i];
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::bad_format, source + ": " + e.what());
  }
  stats.validate();
  return stats;
}

inline void save_stats(const NormalizationStats& stats, const std::filesystem::path& path) {
  io::write_text(path, stats_to_json(stats).dump(2) + "\n");
}

inline NormalizationStats load_stats(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::bad_format, path.string() + ": " + e.what());
  }
  return stats_from_json(j, path.string());
}

inline std::vector<std::uint8_t> encode_heatmap(const Vector& values) {
  io::ByteWriter w;
  w.magic("HMV1");
  w.u32(static_cast<std::uint32_t>(values.size()));
  for (Eigen::Index v = 0; v < values.size(); ++v) w.f32(static_cast<float>(values[v]));
  return w.bytes();
}

inline Vector decode_heatmap(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic("HMV1");
  const std::uint32_t verts = r.u32();
  r.need(std::size_t{verts} * 4, "heatmap payload");
  Vector values(verts);
  for (Eigen::Index v = 0; v < values.size(); ++v) values[v] = r.f32();
  r.expect_end();
  return values;
}

inline void save_heatmap(const Vector& values, const std::filesystem::path& path) {
  io::write_file(path, encode_heatmap(values));
}

inline Vector load_heatmap(const std::filesystem::path& path) {
  return decode_heatmap(io::read_file(path), path.string());
}

}  // namespace gruface
