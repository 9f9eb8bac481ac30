#include <gtest/gtest.h>

#include <filesystem>

#include "gruface/dataset.hpp"
#include "gruface/synthetic.hpp"

using namespace gruface;

namespace {

SyntheticSpec small_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.num_vertices = 9;
  s.frames_per_sequence = 12;
  s.num_sequences = 8;
  s.feature_dim = 5;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(Synthetic, ShapesAndLabels) {
  const auto data = generate_synthetic(small_spec(1));
  ASSERT_EQ(data.dataset.items.size(), 8u);
  EXPECT_EQ(data.dataset.subject_labels, (std::vector<std::string>{"S01", "S02"}));
  EXPECT_EQ(data.dataset.emotion_labels, (std::vector<std::string>{"expressive", "neutral"}));
  for (const auto& item : data.dataset.items) {
    EXPECT_EQ(item.features.num_frames(), 24);
    EXPECT_EQ(item.features.width(), 5);
    EXPECT_EQ(item.features.fps, 50.0);
    EXPECT_EQ(item.target.num_frames(), 12);
    EXPECT_EQ(item.target.num_vertices(), 9);
    EXPECT_EQ(item.target.fps, 25.0);
    EXPECT_EQ(item.face.subject_id, data.dataset.subject_labels[item.subject]);
  }
  int expressive = 0;
  for (const auto& item : data.dataset.items) expressive += item.emotion == 0;
  EXPECT_EQ(expressive, 4);
  EXPECT_EQ(data.dataset.items[0].name, "S01_seq000");
  EXPECT_EQ(data.dataset.items[0].emotion, 1);
}

TEST(Synthetic, SeedDeterminism) {
  const auto a = generate_synthetic(small_spec(2));
  const auto b = generate_synthetic(small_spec(2));
  const auto c = generate_synthetic(small_spec(3));
  for (std::size_t i = 0; i < a.dataset.items.size(); ++i) {
    EXPECT_EQ(a.dataset.items[i].features.data, b.dataset.items[i].features.data);
    EXPECT_EQ(a.dataset.items[i].target.frames, b.dataset.items[i].target.frames);
  }
  EXPECT_NE(a.dataset.items[0].target.frames, c.dataset.items[0].target.frames);
}

TEST(Synthetic, OracleRecomputesTargets) {
  const auto data = generate_synthetic(small_spec(4));
  for (const auto& item : data.dataset.items) {
    const auto gt = data.oracle.ground_truth(item.features, 12, item.subject, item.emotion);
    EXPECT_EQ(gt.frames, item.target.frames);
  }
}

TEST(Synthetic, EmotionEffectOnlyOnUpperFace) {
  const auto spec = small_spec(5);
  const auto data = generate_synthetic(spec);
  const auto& item = data.dataset.items[0];
  const auto neutral = data.oracle.ground_truth(item.features, 12, item.subject, 1);
  const auto expressive = data.oracle.ground_truth(item.features, 12, item.subject, 0);
  const Matrix diff = expressive.frames - neutral.frames;
  const Eigen::Index upper = spec.upper_face_count();
  EXPECT_EQ(upper, 3);
  EXPECT_GT(diff.leftCols(3 * upper).cwiseAbs().minCoeff(), 0.0);
  EXPECT_EQ(diff.rightCols(3 * (9 - upper)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Synthetic, NormalizedTemplatesAreCentredUnitRange) {
  auto data = generate_synthetic(small_spec(6));
  const auto stats = normalize_dataset(data.dataset);
  ASSERT_EQ(stats.size(), 2u);
  for (const auto& item : data.dataset.items) {
    const Matrix& v = item.face.vertices;
    for (int a = 0; a < 3; ++a) {
      EXPECT_NEAR(v.col(a).mean(), 0.0, 1e-12);
      EXPECT_NEAR(v.col(a).maxCoeff() - v.col(a).minCoeff(), 1.0, 1e-12);
    }
  }
}

TEST(Synthetic, InvalidSpec) {
  auto s = small_spec(7);
  s.mesh_fps = 60.0;
  EXPECT_THROW(generate_synthetic(s), Error);
  s = small_spec(7);
  s.num_vertices = 1;
  EXPECT_THROW(generate_synthetic(s), Error);
}

TEST(Dataset, WriteAndLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "gruface_dataset_test";
  std::filesystem::remove_all(dir);
  auto data = generate_synthetic(small_spec(8)).dataset;
  const auto manifest = write_dataset(data, dir);
  EXPECT_EQ(manifest.items.size(), 8u);
  EXPECT_TRUE(std::filesystem::exists(dir / "templates" / "S02.tpl"));
  const auto back = load_dataset(dir / "manifest.json");
  ASSERT_EQ(back.items.size(), data.items.size());
  EXPECT_EQ(back.subject_labels, data.subject_labels);
  EXPECT_EQ(back.emotion_labels, data.emotion_labels);
  for (std::size_t i = 0; i < back.items.size(); ++i) {
    EXPECT_EQ(back.items[i].name, data.items[i].name);
    EXPECT_EQ(back.items[i].subject, data.items[i].subject);
    EXPECT_EQ(back.items[i].emotion, data.items[i].emotion);
    EXPECT_LT((back.items[i].target.frames - data.items[i].target.frames).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_LT((back.items[i].features.data - data.items[i].features.data).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_EQ(back.items[i].features.provenance, FeatureProvenance::synthetic);
  }
}

TEST(Dataset, VocabulariesAreSortedAndIncludeDefaults) {
  Manifest m;
  m.items.push_back({"a.sft", "a.msq", "t.tpl", "M2", "angry"});
  m.items.push_back({"b.sft", "b.msq", "t.tpl", "F1", "neutral"});
  const auto [subjects, emotions] = label_vocabularies(m);
  EXPECT_EQ(subjects, (std::vector<std::string>{"F1", "M2"}));
  EXPECT_EQ(emotions, (std::vector<std::string>{"angry", "expressive", "neutral"}));
  try {
    label_index(subjects, "X9", "subject");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unknown_label);
    EXPECT_NE(std::string(e.what()).find("F1, M2"), std::string::npos);
  }
}

TEST(Dataset, MalformedManifest) {
  const auto dir = std::filesystem::temp_directory_path() / "gruface_manifest_bad";
  io::write_text(dir / "m.json", "{\"items\": [{\"features_path\": 3}]}");
  try {
    load_manifest(dir / "m.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::bad_format);
  }
  io::write_text(dir / "empty.json", "{\"items\": []}");
  EXPECT_THROW(load_dataset(dir / "empty.json"), Error);
  EXPECT_THROW(load_manifest(dir / "missing.json"), Error);
}
