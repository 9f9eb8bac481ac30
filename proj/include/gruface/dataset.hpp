#pragma once

// Dataset manifests: UTF-8 JSON
//   {"items": [{"features_path", "mesh_path", "template_path", "subject", "emotion"}, ...]}
// with paths relative to the manifest's directory.

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gruface/feature_io.hpp"
#include "gruface/mesh_io.hpp"
#include "gruface/synthetic.hpp"
#include "gruface/training.hpp"

namespace gruface {

struct ManifestItem {
  std::string features_path;
  std::string mesh_path;
  std::string template_path;
  std::string subject;
  std::string emotion;
};

struct Manifest {
  std::vector<ManifestItem> items;
};

inline nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : m.items) {
    items.push_back({{"features_path", it.features_path},
                     {"mesh_path", it.mesh_path},
                     {"template_path", it.template_path},
                     {"subject", it.subject},
                     {"emotion", it.emotion}});
  }
  return {{"items", items}};
}

inline Manifest manifest_from_json(const nlohmann::json& j, const std::string& source) {
  Manifest m;
  try {
    for (const auto& it : j.at("items")) {
      m.items.push_back({it.at("features_path").get<std::string>(), it.at("mesh_path").get<std::string>(),
                         it.at("template_path").get<std::string>(), it.at("subject").get<std::string>(),
                         it.at("emotion").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::bad_format, source + ": " + e.what());
  }
  return m;
}

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  io::write_text(path, manifest_to_json(m).dump(2) + "\n");
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::bad_format, path.string() + ": " + e.what());
  }
  return manifest_from_json(j, path.string());
}

/// Subject labels in sorted order; emotions are the sorted union of the
/// manifest's labels with {expressive, neutral}. Sorted order defines the
/// one-hot index of every label.
inline std::pair<std::vector<std::string>, std::vector<std::string>> label_vocabularies(const Manifest& m) {
  std::set<std::string> subjects, emotions(default_emotion_labels().begin(), default_emotion_labels().end());
  for (const auto& it : m.items) {
    subjects.insert(it.subject);
    emotions.insert(it.emotion);
  }
  return {{subjects.begin(), subjects.end()}, {emotions.begin(), emotions.end()}};
}

inline int label_index(const std::vector<std::string>& labels, const std::string& label, const char* kind) {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) {
    std::string known;
    for (const auto& l : labels) known += (known.empty() ? "" : ", ") + l;
    fail(ErrorCode::unknown_label, std::string("unknown ") + kind + " '" + label + "'; known: " + known);
  }
  return static_cast<int>(it - labels.begin());
}

inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
  const Manifest m = load_manifest(manifest_path);
  require(!m.items.empty(), ErrorCode::empty_dataset, manifest_path.string() + " lists no items");
  const auto base = manifest_path.parent_path();
  Dataset data;
  std::tie(data.subject_labels, data.emotion_labels) = label_vocabularies(m);
  std::map<std::string, TemplateFace> templates;
  for (const auto& it : m.items) {
    DatasetItem item;
    item.name = std::filesystem::path(it.mesh_path).stem().string();
    item.features = load_features(base / it.features_path);
    item.target = load_mesh_sequence(base / it.mesh_path);
    auto found = templates.find(it.template_path);
    if (found == templates.end()) {
      TemplateFace face = load_template(base / it.template_path);
      face.subject_id = it.subject;
      found = templates.emplace(it.template_path, std::move(face)).first;
    }
    item.face = found->second;
    item.subject = label_index(data.subject_labels, it.subject, "subject");
    item.emotion = label_index(data.emotion_labels, it.emotion, "emotion");
    data.items.push_back(std::move(item));
  }
  return data;
}

/// Writes features/, meshes/, templates/ and manifest.json under `dir`.
inline Manifest write_dataset(const Dataset& data, const std::filesystem::path& dir) {
  Manifest m;
  std::set<int> written;
  for (const auto& item : data.items) {
    const std::string subject = data.subject_labels[item.subject];
    ManifestItem entry{"features/" + item.name + ".sft", "meshes/" + item.name + ".msq",
                       "templates/" + subject + ".tpl", subject, data.emotion_labels[item.emotion]};
    save_features(item.features, dir / entry.features_path);
    save_mesh_sequence(item.target, dir / entry.mesh_path);
    if (written.insert(item.subject).second) save_template(item.face, dir / entry.template_path);
    m.items.push_back(std::move(entry));
  }
  save_manifest(m, dir / "manifest.json");
  return m;
}

}  // namespace gruface
