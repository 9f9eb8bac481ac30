#pragma once

// Subcommand implementations behind gruface_cli. Each returns normally on
// success and throws gruface::Error on failure.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gruface/gruface.hpp"

namespace gruface::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Config files: a flat JSON object whose keys mirror TrainConfig and
// SyntheticSpec fields.

inline const std::set<std::string>& train_keys() {
  static const std::set<std::string> keys{"epochs",         "learning_rate", "beta1",        "beta2",
                                          "epsilon",        "huber_delta",   "dropout",      "train_fraction",
                                          "val_fraction",   "test_fraction", "cell",         "hidden_size",
                                          "num_layers",     "seed"};
  return keys;
}

inline const std::set<std::string>& synthetic_keys() {
  static const std::set<std::string> keys{"num_vertices",         "frames_per_sequence", "num_sequences",
                                          "num_subjects",         "feature_dim",         "feature_fps",
                                          "mesh_fps",             "emotion_effect_scale", "speech_effect_scale",
                                          "latent_dim",           "feature_sources",     "seed"};
  return keys;
}

inline json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::invalid_config, path + ": " + e.what());
  }
  require(j.is_object(), ErrorCode::invalid_config, path + ": config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    require(train_keys().count(key) || synthetic_keys().count(key), ErrorCode::invalid_config,
            path + ": unknown config key '" + key + "'");
  }
  return j;
}

template <typename T>
void take(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_config, std::string("config key '") + key + "': " + e.what());
  }
}

inline void apply_config(const json& j, TrainConfig& c) {
  take(j, "epochs", c.epochs);
  take(j, "learning_rate", c.adam.learning_rate);
  take(j, "beta1", c.adam.beta1);
  take(j, "beta2", c.adam.beta2);
  take(j, "epsilon", c.adam.epsilon);
  take(j, "huber_delta", c.huber_delta);
  take(j, "dropout", c.dropout);
  take(j, "train_fraction", c.train_fraction);
  take(j, "val_fraction", c.val_fraction);
  take(j, "test_fraction", c.test_fraction);
  take(j, "hidden_size", c.hidden_size);
  take(j, "num_layers", c.num_layers);
  take(j, "seed", c.seed);
  if (j.contains("cell")) {
    std::string cell;
    take(j, "cell", cell);
    c.cell = parse_cell(cell);
  }
}

inline void apply_config(const json& j, SyntheticSpec& s) {
  take(j, "num_vertices", s.num_vertices);
  take(j, "frames_per_sequence", s.frames_per_sequence);
  take(j, "num_sequences", s.num_sequences);
  take(j, "num_subjects", s.num_subjects);
  take(j, "feature_dim", s.feature_dim);
  take(j, "feature_fps", s.feature_fps);
  take(j, "mesh_fps", s.mesh_fps);
  take(j, "emotion_effect_scale", s.emotion_effect_scale);
  take(j, "speech_effect_scale", s.speech_effect_scale);
  take(j, "latent_dim", s.latent_dim);
  take(j, "feature_sources", s.feature_sources);
  take(j, "seed", s.seed);
}

inline json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"huber_delta", c.huber_delta},
          {"dropout", c.dropout},
          {"train_fraction", c.train_fraction},
          {"val_fraction", c.val_fraction},
          {"test_fraction", c.test_fraction},
          {"cell", cell_name(c.cell)},
          {"hidden_size", c.hidden_size},
          {"num_layers", c.num_layers},
          {"seed", c.seed}};
}

inline json to_json(const SyntheticSpec& s) {
  return {{"num_vertices", s.num_vertices},
          {"frames_per_sequence", s.frames_per_sequence},
          {"num_sequences", s.num_sequences},
          {"num_subjects", s.num_subjects},
          {"feature_dim", s.feature_dim},
          {"feature_fps", s.feature_fps},
          {"mesh_fps", s.mesh_fps},
          {"emotion_effect_scale", s.emotion_effect_scale},
          {"speech_effect_scale", s.speech_effect_scale},
          {"latent_dim", s.latent_dim},
          {"feature_sources", s.feature_sources},
          {"seed", s.seed}};
}

// ---------------------------------------------------------------------------
// Run manifests

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

inline json run_manifest(const std::string& command, const json& config, const json& inputs, std::uint64_t seed,
                         const std::string& started_at) {
  return {{"tool", "gruface_cli"},      {"version", kToolVersion}, {"command", command},
          {"config", config},           {"inputs", inputs},        {"seed", seed},
          {"started_at", started_at},   {"finished_at", utc_timestamp()}};
}

inline void require_out(const std::string& out, const char* command) {
  require(!out.empty(), ErrorCode::invalid_config, std::string(command) + " needs --out <dir>");
}

// ---------------------------------------------------------------------------
// gen-synthetic

inline void cmd_gen_synthetic(const SyntheticSpec& spec, const std::string& out, std::ostream& log) {
  require_out(out, "gen-synthetic");
  const auto started = utc_timestamp();
  const auto data = generate_synthetic(spec);
  const auto manifest = write_dataset(data.dataset, out);
  io::write_text(fs::path(out) / "run_manifest.json",
                 run_manifest("gen-synthetic", to_json(spec), json::object(), spec.seed, started).dump(2) + "\n");
  log << "wrote " << manifest.items.size() << " sequences to " << out << "\n";
}

// ---------------------------------------------------------------------------
// preprocess

/// `input` is a dataset directory holding manifest.json, or the manifest
/// itself. Writes normalized templates and meshes, copied features, one
/// stats file per subject and a new manifest under `out`.
inline void cmd_preprocess(const std::string& input, const std::string& out, std::ostream& log) {
  require_out(out, "preprocess");
  const auto started = utc_timestamp();
  fs::path manifest_path = input;
  if (fs::is_directory(manifest_path)) manifest_path /= "manifest.json";
  require(!input.empty() && fs::exists(manifest_path), ErrorCode::empty_input,
          "preprocess expects a dataset directory containing manifest.json with items "
          "{features_path, mesh_path, template_path, subject, emotion}; found none at '" +
              manifest_path.string() + "'");
  const Manifest in = load_manifest(manifest_path);
  require(!in.items.empty(), ErrorCode::empty_input, manifest_path.string() + " lists no items");
  const fs::path base = manifest_path.parent_path();
  const fs::path dest = out;

  std::map<std::string, NormalizationStats> stats;
  std::map<std::string, Eigen::Index> vertex_count;
  Manifest result;
  for (const auto& item : in.items) {
    const fs::path template_path = base / item.template_path;
    if (!stats.count(item.subject)) {
      require(fs::exists(template_path), ErrorCode::missing_template,
              "subject " + item.subject + " has no neutral template at " + template_path.string());
      TemplateFace face = load_template(template_path);
      face.subject_id = item.subject;
      const NormalizationStats s = compute_normalization_stats(face);
      stats[item.subject] = s;
      vertex_count[item.subject] = face.num_vertices();
      save_template(normalize(face, s), dest / "templates" / (item.subject + ".tpl"));
      save_stats(s, dest / "stats" / (item.subject + ".json"));
    }
    const MeshSequence seq = load_mesh_sequence(base / item.mesh_path);
    require(seq.num_vertices() == vertex_count[item.subject], ErrorCode::shape_mismatch,
            item.mesh_path + " has " + std::to_string(seq.num_vertices()) + " vertices, template of " +
                item.subject + " has " + std::to_string(vertex_count[item.subject]));
    const std::string stem = fs::path(item.mesh_path).stem().string();
    ManifestItem entry{"features/" + stem + ".sft", "meshes/" + stem + ".msq", "templates/" + item.subject + ".tpl",
                       item.subject, item.emotion};
    save_mesh_sequence(normalize(seq, stats[item.subject]), dest / entry.mesh_path);
    io::write_file(dest / entry.features_path, io::read_file(base / item.features_path));
    result.items.push_back(std::move(entry));
  }
  save_manifest(result, dest / "manifest.json");
  io::write_text(dest / "run_manifest.json",
                 run_manifest("preprocess", json::object(), {{"manifest", manifest_path.string()}}, 0, started)
                         .dump(2) +
                     "\n");
  log << "normalized " << result.items.size() << " sequences for " << stats.size() << " subjects into " << out
      << "\n";
}

// ---------------------------------------------------------------------------
// train

inline json split_names(const Dataset& data, const std::vector<std::size_t>& indices) {
  json names = json::array();
  for (std::size_t i : indices) names.push_back(data.items[i].name);
  return names;
}

inline TrainResult cmd_train(const std::string& manifest, const TrainConfig& config, const std::string& out,
                             std::ostream& log) {
  require_out(out, "train");
  const auto started = utc_timestamp();
  const Dataset data = load_dataset(manifest);
  const TrainResult result = train(data, config, {[&](const EpochLog& e) {
                                     log << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_loss "
                                         << e.val_loss << "\n";
                                   }});
  const fs::path dest = out;
  save_checkpoint({result.final_params, config.seed, data.subject_labels, data.emotion_labels}, dest / "model.ckpt");
  save_checkpoint({result.best_params, config.seed, data.subject_labels, data.emotion_labels}, dest / "best.ckpt");
  io::write_text(dest / "loss.csv", loss_log_csv(result.log));
  json inputs{{"manifest", manifest}};
  json info = run_manifest("train", to_json(config), inputs, config.seed, started);
  info["best_epoch"] = result.best_epoch;
  info["split"] = {{"train", split_names(data, result.split.train)},
                   {"val", split_names(data, result.split.val)},
                   {"test", split_names(data, result.split.test)}};
  io::write_text(dest / "run_manifest.json", info.dump(2) + "\n");
  log << "wrote " << (dest / "model.ckpt").string() << "\n";
  return result;
}

// ---------------------------------------------------------------------------
// predict

struct PredictOptions {
  std::string checkpoint;
  std::string features;
  std::string subject;
  std::string emotion = "neutral";
  std::string template_path;
  std::optional<int> frames;
  std::optional<double> fps;
  std::string out;
};

inline fs::path cmd_predict(const PredictOptions& o, std::ostream& log) {
  require_out(o.out, "predict");
  require(o.frames || o.fps, ErrorCode::invalid_config, "predict needs --frames or --fps");
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  const int subject = label_index(ckpt.subject_labels, o.subject, "subject");
  const int emotion = label_index(ckpt.emotion_labels, o.emotion, "emotion");
  const FeatureSequence features = load_features(o.features);
  validate(features);
  const TemplateFace face = load_template(o.template_path);

  double mesh_fps;
  Eigen::Index frames;
  if (o.fps) {
    require(*o.fps > 0.0, ErrorCode::invalid_config, "--fps must be positive");
    mesh_fps = *o.fps;
    frames = o.frames ? *o.frames
                      : std::max<Eigen::Index>(
                            1, std::llround(static_cast<double>(features.num_frames()) * mesh_fps / features.fps));
  } else {
    require(*o.frames >= 1, ErrorCode::invalid_config, "--frames must be at least 1");
    frames = *o.frames;
    mesh_fps = features.fps * static_cast<double>(frames) / static_cast<double>(features.num_frames());
  }
  const MeshSequence mesh = predict(ckpt.params, features, mesh_fps, frames, subject, emotion, face);
  const fs::path path = fs::path(o.out) / (fs::path(o.features).stem().string() + ".msq");
  save_mesh_sequence(mesh, path);
  log << "wrote " << path.string() << " (" << frames << " frames at " << mesh_fps << " fps)\n";
  return path;
}

// ---------------------------------------------------------------------------
// evaluate

/// Stats for a sequence: a single stats file applies to everything; a
/// directory maps "<subject>_..." sequence names to "<subject>.json".
class StatsLookup {
 public:
  explicit StatsLookup(const std::string& path) : path_(path) {
    if (!path.empty() && !fs::is_directory(path)) single_ = load_stats(path);
  }

  std::optional<NormalizationStats> for_sequence(const std::string& name) const {
    if (path_.empty()) return std::nullopt;
    if (single_) return single_;
    const auto cut = name.find('_');
    const std::string subject = name.substr(0, cut);
    const fs::path file = fs::path(path_) / (subject + ".json");
    require(fs::exists(file), ErrorCode::io, "no stats for sequence " + name + " (looked for " + file.string() + ")");
    return load_stats(file);
  }

  std::optional<NormalizationStats> for_subject(const std::string& subject) const {
    if (path_.empty()) return std::nullopt;
    if (single_) return single_;
    return load_stats(fs::path(path_) / (subject + ".json"));
  }

 private:
  std::string path_;
  std::optional<NormalizationStats> single_;
};

struct EvaluationReport {
  std::vector<std::pair<std::string, double>> per_sequence;
  double mean = 0.0;
};

inline EvaluationReport cmd_evaluate(const std::string& pred_dir, const std::string& gt_dir,
                                     const std::string& stats_path, const std::string& out, std::ostream& log) {
  require(fs::is_directory(pred_dir), ErrorCode::io, "prediction directory " + pred_dir + " does not exist");
  require(fs::is_directory(gt_dir), ErrorCode::io, "ground-truth directory " + gt_dir + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(pred_dir))
    if (entry.path().extension() == ".msq") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorCode::empty_input, "no .msq files in " + pred_dir);

  const StatsLookup stats(stats_path);
  std::vector<MeshSequence> preds, gts;
  EvaluationReport report;
  for (const auto& file : files) {
    const std::string name = file.stem().string();
    const fs::path gt_file = fs::path(gt_dir) / file.filename();
    require(fs::exists(gt_file), ErrorCode::io, "no ground truth for " + name + " at " + gt_file.string());
    MeshSequence pred = load_mesh_sequence(file);
    MeshSequence gt = load_mesh_sequence(gt_file);
    require(pred.num_vertices() == gt.num_vertices() && pred.num_frames() == gt.num_frames(),
            ErrorCode::shape_mismatch,
            name + ": prediction is " + std::to_string(pred.num_frames()) + " frames x " +
                std::to_string(pred.num_vertices()) + " vertices, ground truth is " +
                std::to_string(gt.num_frames()) + " x " + std::to_string(gt.num_vertices()));
    if (const auto s = stats.for_sequence(name)) {
      pred = denormalize(pred, *s);
      gt = denormalize(gt, *s);
    }
    report.per_sequence.emplace_back(name, sequence_vertex_error(pred, gt));
    preds.push_back(std::move(pred));
    gts.push_back(std::move(gt));
  }
  report.mean = mean_face_vertex_error(preds, gts);

  json j{{"mean_face_vertex_error", report.mean}, {"denormalized", !stats_path.empty()}};
  json seqs = json::array();
  for (const auto& [name, err] : report.per_sequence) {
    log << name << " " << err << "\n";
    seqs.push_back({{"name", name}, {"error", err}});
  }
  j["sequences"] = seqs;
  log << "mean_face_vertex_error " << std::setprecision(10) << report.mean << "\n";
  if (!out.empty()) io::write_text(fs::path(out) / "report.json", j.dump(2) + "\n");
  return report;
}

// ---------------------------------------------------------------------------
// diff

/// A frame from a ".tpl" file, or frame `index` of a ".msq" file.
inline Matrix load_frame(const std::string& path, int index) {
  if (fs::path(path).extension() == ".tpl") return load_template(path).vertices;
  const MeshSequence seq = load_mesh_sequence(path);
  require(index >= 0 && index < seq.num_frames(), ErrorCode::invalid_config,
          path + " has " + std::to_string(seq.num_frames()) + " frames, asked for frame " + std::to_string(index));
  return seq.frame(index);
}

inline Vector cmd_diff(const std::string& a, int frame_a, const std::string& b, int frame_b, const std::string& out,
                       std::ostream& log) {
  require_out(out, "diff");
  const Vector heat = vertex_difference_heatmap(load_frame(a, frame_a), load_frame(b, frame_b));
  const fs::path path = fs::path(out) / "heatmap.hmv";
  save_heatmap(heat, path);
  log << "wrote " << path.string() << " (" << heat.size() << " vertices)\n";
  return heat;
}

// ---------------------------------------------------------------------------
// ablate

struct LayerSize {
  int layers;
  int hidden;
};

/// "2L-256" or "2x256".
inline LayerSize parse_size(const std::string& text) {
  static const std::regex pattern(R"((\d+)\s*[Lx]\s*-?\s*(\d+))", std::regex::icase);
  std::smatch m;
  require(std::regex_match(text, m, pattern), ErrorCode::invalid_config,
          "size '" + text + "' is not of the form <layers>L-<hidden>, e.g. 2L-256");
  return {std::stoi(m[1]), std::stoi(m[2])};
}

/// Mean face vertex error of `params` on the listed items, denormalized when
/// stats are available.
inline double dataset_vertex_error(const ModelParams& params, const Dataset& data,
                                   const std::vector<AdjustedFeatures>& adjusted,
                                   const std::vector<std::size_t>& indices, const StatsLookup& stats) {
  std::vector<MeshSequence> preds, gts;
  for (std::size_t i : indices) {
    const auto& item = data.items[i];
    MeshSequence pred =
        forward(params, adjusted[i], item.subject, item.emotion, item.face, item.target.fps, false, nullptr).prediction;
    MeshSequence gt = item.target;
    if (const auto s = stats.for_subject(data.subject_labels[item.subject])) {
      pred = denormalize(pred, *s);
      gt = denormalize(gt, *s);
    }
    preds.push_back(std::move(pred));
    gts.push_back(std::move(gt));
  }
  return mean_face_vertex_error(preds, gts);
}

struct AblationRow {
  std::string cell;
  LayerSize size;
  std::size_t parameters;
  double final_train_loss;
  double final_val_loss;
  double train_error;
  double heldout_error;
  double seconds;
};

inline std::vector<AblationRow> cmd_ablate(const std::string& manifest, const std::vector<std::string>& cells,
                                           const std::vector<std::string>& sizes, const TrainConfig& base,
                                           const std::string& stats_path, const std::string& out, std::ostream& log) {
  require_out(out, "ablate");
  require(!cells.empty() && !sizes.empty(), ErrorCode::invalid_config, "ablate needs at least one cell and size");
  const auto started = utc_timestamp();
  const Dataset data = load_dataset(manifest);
  const StatsLookup stats(stats_path);
  std::vector<AblationRow> rows;
  for (const auto& cell : cells) {
    for (const auto& size_text : sizes) {
      TrainConfig config = base;
      config.cell = parse_cell(cell);
      const LayerSize size = parse_size(size_text);
      config.num_layers = size.layers;
      config.hidden_size = size.hidden;
      const auto t0 = std::chrono::steady_clock::now();
      const TrainResult result = train(data, config);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const auto adjusted = adjust_dataset(data, result.final_params.config);
      std::vector<std::size_t> heldout = result.split.test;
      heldout.insert(heldout.end(), result.split.val.begin(), result.split.val.end());
      if (heldout.empty()) heldout = result.split.train;
      AblationRow row{cell_name(config.cell),
                      size,
                      result.final_params.parameter_count(),
                      result.log.empty() ? std::nan("") : result.log.back().train_loss,
                      result.log.empty() ? std::nan("") : result.log.back().val_loss,
                      dataset_vertex_error(result.final_params, data, adjusted, result.split.train, stats),
                      dataset_vertex_error(result.final_params, data, adjusted, heldout, stats),
                      seconds};
      log << row.cell << " " << size.layers << "L-" << size.hidden << " heldout_error " << row.heldout_error
          << " seconds " << seconds << "\n";
      rows.push_back(row);
    }
  }
  std::string csv = "cell,layers,hidden,parameters,final_train_loss,final_val_loss,train_vertex_error,"
                    "heldout_vertex_error,seconds\n";
  char buf[320];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%zu,%.9e,%.9e,%.9e,%.9e,%.3f\n", r.cell.c_str(), r.size.layers,
                  r.size.hidden, r.parameters, r.final_train_loss, r.final_val_loss, r.train_error,
                  r.heldout_error, r.seconds);
    csv += buf;
  }
  io::write_text(fs::path(out) / "ablation.csv", csv);
  json inputs{{"manifest", manifest}, {"cells", cells}, {"sizes", sizes}, {"stats", stats_path}};
  io::write_text(fs::path(out) / "run_manifest.json",
                 run_manifest("ablate", to_json(base), inputs, base.seed, started).dump(2) + "\n");
  return rows;
}

}  // namespace gruface::cli
