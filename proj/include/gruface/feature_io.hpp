#pragma once

// ".sft" speech feature files, shared with the offline feature exporter:
//   "SFT1", u32 T_X, u32 B, f32 fps, u8 provenance, T_X*B f32 row-major.
// All scalars little-endian.

#include <filesystem>
#include <string>

#include "gruface/binary_io.hpp"
#include "gruface/features.hpp"

namespace gruface {

inline std::vector<std::uint8_t> encode_features(const FeatureSequence& f) {
  validate(f);
  io::ByteWriter w;
  w.magic("SFT1");
  w.u32(static_cast<std::uint32_t>(f.num_frames()));
  w.u32(static_cast<std::uint32_t>(f.width()));
  w.f32(static_cast<float>(f.fps));
  w.u8(static_cast<std::uint8_t>(f.provenance));
  for (Eigen::Index t = 0; t < f.data.rows(); ++t)
    for (Eigen::Index b = 0; b < f.data.cols(); ++b) w.f32(static_cast<float>(f.data(t, b)));
  return w.bytes();
}

inline FeatureSequence decode_features(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic("SFT1");
  const std::uint32_t frames = r.u32();
  const std::uint32_t width = r.u32();
  const float fps = r.f32();
  const std::uint8_t code = r.u8();
  require(frames >= 1 && width >= 1, ErrorCode::bad_format,
          source + ": header at byte 4 declares T_X=" + std::to_string(frames) + ", B=" + std::to_string(width));
  require(fps > 0.0f && std::isfinite(fps), ErrorCode::bad_format, source + ": non-positive fps at byte 12");
  require(code <= 2, ErrorCode::bad_format,
          source + ": unknown provenance code " + std::to_string(code) + " at byte 16");
  r.need(std::size_t{frames} * width * 4, "feature payload");
  FeatureSequence f{Matrix(frames, width), fps, static_cast<FeatureProvenance>(code)};
  for (Eigen::Index t = 0; t < f.data.rows(); ++t)
    for (Eigen::Index b = 0; b < f.data.cols(); ++b) f.data(t, b) = r.f32();
  r.expect_end();
  return f;
}

inline void save_features(const FeatureSequence& f, const std::filesystem::path& path) {
  io::write_file(path, encode_features(f));
}

inline FeatureSequence load_features(const std::filesystem::path& path) {
  return decode_features(io::read_file(path), path.string());
}

}  // namespace gruface
