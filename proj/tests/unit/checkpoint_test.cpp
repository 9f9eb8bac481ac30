#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "gruface/checkpoint.hpp"

using namespace gruface;

namespace {

Checkpoint sample(CellKind cell = CellKind::gru) {
  ModelConfig c;
  c.cell = cell;
  c.hidden_size = 5;
  c.input_width = 4;
  c.num_vertices = 3;
  c.num_subjects = 2;
  Checkpoint ckpt{init_params(c, 3), 42, {"F1", "M3"}, {"expressive", "neutral"}};
  // Values representable in f32 so the round trip is exact.
  for (auto& t : ckpt.params.tensors())
    for (double& v : t.values) v = static_cast<float>(v);
  return ckpt;
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& bytes, std::size_t at) {
  return static_cast<std::uint32_t>(bytes[at]) | static_cast<std::uint32_t>(bytes[at + 1]) << 8 |
         static_cast<std::uint32_t>(bytes[at + 2]) << 16 | static_cast<std::uint32_t>(bytes[at + 3]) << 24;
}

}  // namespace

TEST(Checkpoint, RoundTripEveryCell) {
  for (CellKind cell : {CellKind::gru, CellKind::rnn, CellKind::lstm}) {
    const auto ckpt = sample(cell);
    const auto back = decode_checkpoint(encode_checkpoint(ckpt), "mem");
    EXPECT_TRUE(back.params == ckpt.params) << cell_name(cell);
    EXPECT_EQ(back.seed, 42u);
    EXPECT_EQ(back.subject_labels, ckpt.subject_labels);
    EXPECT_EQ(back.emotion_labels, ckpt.emotion_labels);
    EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(ckpt));
  }
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "gruface_ckpt_test" / "nested" / "m.ckpt";
  const auto ckpt = sample();
  save_checkpoint(ckpt, path);
  EXPECT_TRUE(load_checkpoint(path).params == ckpt.params);
}

TEST(Checkpoint, HeaderLayoutAndTensorTable) {
  const auto ckpt = sample();
  const auto bytes = encode_checkpoint(ckpt);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FXH1");
  const std::uint32_t len = read_u32(bytes, 4);
  const auto header = nlohmann::json::parse(std::string(bytes.begin() + 8, bytes.begin() + 8 + len));
  EXPECT_EQ(header["config"]["cell"], "gru");
  EXPECT_EQ(header["config"]["hidden_size"], 5);
  EXPECT_EQ(header["subjects"], (std::vector<std::string>{"F1", "M3"}));
  const auto& table = header["tensors"];
  ASSERT_EQ(table.size(), 18u);
  EXPECT_EQ(table[0]["name"], "layer0.W_r");
  EXPECT_EQ(table[0]["shape"], (std::vector<int>{5, 9}));
  EXPECT_EQ(table[1]["offset"], 5 * 9 * 4);
  const std::size_t payload = header["payload_bytes"].get<std::size_t>();
  EXPECT_EQ(payload, ckpt.params.parameter_count() * 4);
  EXPECT_EQ(bytes.size(), 8 + len + payload);
  // First payload value is W_r(0, 0), second is W_r(1, 0) (column-major).
  float first, second;
  std::memcpy(&first, bytes.data() + 8 + len, 4);
  std::memcpy(&second, bytes.data() + 8 + len + 4, 4);
  const auto& w = std::get<GruLayerParams>(ckpt.params.layers[0]).W_r;
  EXPECT_EQ(first, static_cast<float>(w(0, 0)));
  EXPECT_EQ(second, static_cast<float>(w(1, 0)));
}

TEST(Checkpoint, RejectsCorruption) {
  const auto good = encode_checkpoint(sample());
  auto code = [](const std::vector<std::uint8_t>& b) {
    try {
      decode_checkpoint(b, "bad.ckpt");
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::io;
  };
  auto truncated = good;
  truncated.resize(good.size() - 3);
  EXPECT_EQ(code(truncated), ErrorCode::truncated);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_EQ(code(trailing), ErrorCode::bad_format);
  auto magic = good;
  magic[3] = '2';
  EXPECT_EQ(code(magic), ErrorCode::bad_format);
  auto json = good;
  json[8] = 'x';
  EXPECT_EQ(code(json), ErrorCode::bad_format);

  const std::uint32_t len = read_u32(good, 4);
  std::string header(good.begin() + 8, good.begin() + 8 + len);
  const auto pos = header.find("layer0.W_a");
  ASSERT_NE(pos, std::string::npos);
  header.replace(pos, 10, "layer0.W_z");
  auto renamed = good;
  std::copy(header.begin(), header.end(), renamed.begin() + 8);
  EXPECT_EQ(code(renamed), ErrorCode::bad_format);
}

TEST(Checkpoint, LabelCountMustMatchConfig) {
  auto ckpt = sample();
  ckpt.subject_labels.pop_back();
  EXPECT_THROW(encode_checkpoint(ckpt), Error);
}
