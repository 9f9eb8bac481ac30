#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <optional>

#include "commands.hpp"

namespace {

using namespace gruface;

struct TrainFlags {
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<double> dropout;
  std::optional<double> delta;
  std::optional<std::string> cell;
  std::optional<int> hidden;
  std::optional<int> layers;

  void add_to(CLI::App* app, bool with_shape) {
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--dropout", dropout, "Dropout between recurrent layers");
    app->add_option("--huber-delta", delta, "Huber loss threshold");
    if (with_shape) {
      app->add_option("--cell", cell, "Recurrent cell: gru, rnn or lstm");
      app->add_option("--hidden", hidden, "Hidden size");
      app->add_option("--layers", layers, "Number of recurrent layers");
    }
  }

  void apply(TrainConfig& c) const {
    if (epochs) c.epochs = *epochs;
    if (lr) c.adam.learning_rate = *lr;
    if (dropout) c.dropout = *dropout;
    if (delta) c.huber_delta = *delta;
    if (cell) c.cell = parse_cell(*cell);
    if (hidden) c.hidden_size = *hidden;
    if (layers) c.num_layers = *layers;
  }
};

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

int report(std::string_view code, const std::string& detail) {
  std::cerr << "error: " << code << ": " << one_line(detail) << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gruface: speech-driven 3D face animation decoder"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kToolVersion);

  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out;
  app.add_option("--seed", seed, "Seed for every random choice");
  app.add_option("--config", config_path, "JSON config mirroring the training or synthetic settings");
  app.add_option("--out", out, "Output directory");

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "Write a procedural dataset with a known generating map");
  std::optional<int> g_vertices, g_frames, g_sequences, g_subjects, g_dim;
  std::optional<double> g_feature_fps, g_mesh_fps, g_emotion_scale;
  gen->add_option("--vertices", g_vertices);
  gen->add_option("--frames", g_frames, "Mesh frames per sequence");
  gen->add_option("--sequences", g_sequences);
  gen->add_option("--subjects", g_subjects);
  gen->add_option("--feature-dim", g_dim);
  gen->add_option("--feature-fps", g_feature_fps);
  gen->add_option("--mesh-fps", g_mesh_fps);
  gen->add_option("--emotion-scale", g_emotion_scale);

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Normalize templates and sequences per subject");
  std::string pre_input;
  pre->add_option("--input", pre_input, "Raw dataset directory (with manifest.json)")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train the decoder on a dataset manifest");
  std::string tr_manifest;
  TrainFlags tr_flags;
  tr->add_option("--manifest", tr_manifest)->required();
  tr_flags.add_to(tr, true);

  // predict
  auto* pr = app.add_subcommand("predict", "Animate a template from a feature file");
  cli::PredictOptions po;
  pr->add_option("--checkpoint", po.checkpoint)->required();
  pr->add_option("--features", po.features)->required();
  pr->add_option("--subject", po.subject)->required();
  pr->add_option("--emotion", po.emotion, "neutral or expressive")->capture_default_str();
  pr->add_option("--template", po.template_path)->required();
  pr->add_option("--frames", po.frames, "Output frame count");
  pr->add_option("--fps", po.fps, "Output frame rate");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Mean face vertex error between prediction and ground-truth dirs");
  std::string ev_pred, ev_gt, ev_stats;
  ev->add_option("--pred", ev_pred)->required();
  ev->add_option("--gt", ev_gt)->required();
  ev->add_option("--stats", ev_stats, "Stats file, or directory of <subject>.json, for denormalization");

  // diff
  auto* df = app.add_subcommand("diff", "Per-vertex difference heatmap between two frames");
  std::string df_a, df_b;
  int df_fa = 0, df_fb = 0;
  df->add_option("--a", df_a, ".msq or .tpl")->required();
  df->add_option("--b", df_b, ".msq or .tpl")->required();
  df->add_option("--frame-a", df_fa)->capture_default_str();
  df->add_option("--frame-b", df_fb)->capture_default_str();

  // ablate
  auto* ab = app.add_subcommand("ablate", "Train several cell/size configurations and compare");
  std::string ab_manifest, ab_stats;
  std::vector<std::string> ab_cells{"gru", "rnn", "lstm"}, ab_sizes{"2L-256"};
  TrainFlags ab_flags;
  ab->add_option("--manifest", ab_manifest)->required();
  ab->add_option("--cells", ab_cells)->delimiter(',')->capture_default_str();
  ab->add_option("--sizes", ab_sizes, "e.g. 2L-256,1L-128")->delimiter(',')->capture_default_str();
  ab->add_option("--stats", ab_stats);
  ab_flags.add_to(ab, false);

  for (auto* sub : {gen, pre, tr, pr, ev, df, ab}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report(error_code_name(ErrorCode::invalid_config), e.what());
    return 2;
  }

  try {
    const auto config = cli::load_config(config_path);
    if (*gen) {
      SyntheticSpec spec;
      cli::apply_config(config, spec);
      if (seed) spec.seed = *seed;
      if (g_vertices) spec.num_vertices = *g_vertices;
      if (g_frames) spec.frames_per_sequence = *g_frames;
      if (g_sequences) spec.num_sequences = *g_sequences;
      if (g_subjects) spec.num_subjects = *g_subjects;
      if (g_dim) spec.feature_dim = *g_dim;
      if (g_feature_fps) spec.feature_fps = *g_feature_fps;
      if (g_mesh_fps) spec.mesh_fps = *g_mesh_fps;
      if (g_emotion_scale) spec.emotion_effect_scale = *g_emotion_scale;
      cli::cmd_gen_synthetic(spec, out, std::cout);
    } else if (*pre) {
      cli::cmd_preprocess(pre_input, out, std::cout);
    } else if (*tr || *ab) {
      TrainConfig tc;
      cli::apply_config(config, tc);
      if (seed) tc.seed = *seed;
      if (*tr) {
        tr_flags.apply(tc);
        cli::cmd_train(tr_manifest, tc, out, std::cout);
      } else {
        ab_flags.apply(tc);
        cli::cmd_ablate(ab_manifest, ab_cells, ab_sizes, tc, ab_stats, out, std::cout);
      }
    } else if (*pr) {
      po.out = out;
      cli::cmd_predict(po, std::cout);
    } else if (*ev) {
      cli::cmd_evaluate(ev_pred, ev_gt, ev_stats, out, std::cout);
    } else if (*df) {
      cli::cmd_diff(df_a, df_fa, df_b, df_fb, out, std::cout);
    }
  } catch (const Error& e) {
    return report(error_code_name(e.code()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report(error_code_name(ErrorCode::io), e.what());
  } catch (const std::exception& e) {
    return report(error_code_name(ErrorCode::io), e.what());
  }
  return 0;
}
