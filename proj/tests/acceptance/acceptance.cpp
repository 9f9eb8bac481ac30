// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.
//
//   acceptance --cli <path to gruface_cli> --work <scratch dir>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gruface/gruface.hpp"
#include "oracles/finite_difference.hpp"
#include "oracles/reference.hpp"

namespace fs = std::filesystem;
using namespace gruface;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string g(double v) { return fmt("%.3g", v); }

struct Context {
  std::string cli;
  fs::path work;
  int calls = 0;

  void run(const std::string& args) {
    const fs::path log = work / ("cli_" + std::to_string(calls++) + ".log");
    const std::string cmd = cli + " " + args + " >" + log.string() + " 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      fail(ErrorCode::io, "command failed: " + args + " (see " + log.string() + ")");
    }
  }
};

oracle::Mat rows_of(const Matrix& m) {
  oracle::Mat out(static_cast<std::size_t>(m.rows()), oracle::Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

oracle::Vec vec_of(const Vector& v) { return oracle::Vec(v.data(), v.data() + v.size()); }

double max_gap(const Vector& a, const oracle::Vec& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// ---------------------------------------------------------------------------

Outcome adjustment_shape_law(Context&) {
  Rng rng(101);
  FeatureSequence clip{Matrix(200, 768), 50.0, FeatureProvenance::synthetic};
  fill_uniform(clip.data, rng, -1.0, 1.0);
  const auto adjusted = input_representation_adjustment(clip, 25.0, 100);
  bool ok = adjusted.num_frames() == 100 && adjusted.width() == 1536;
  std::string detail = "4 s clip -> " + shape_of(adjusted.data);

  double worst = 0.0;
  for (double k : {1.0, 1.5, 2.0, 3.0}) {
    for (int extra : {0, 3}) {
      const auto frames = static_cast<Eigen::Index>(std::llround(k * 40)) + extra;
      FeatureSequence f{Matrix(frames, 16), 25.0 * k, FeatureProvenance::synthetic};
      fill_uniform(f.data, rng, -1.0, 1.0);
      const auto got = input_representation_adjustment(f, 25.0, 40);
      const auto k_ceil = static_cast<std::size_t>(std::ceil(k - 1e-9));
      const auto want = oracle::adjust(rows_of(f.data), 40, k_ceil);
      ok = ok && got.num_frames() == 40 && got.width() == static_cast<Eigen::Index>(16 * k_ceil);
      if (!ok) break;
      for (Eigen::Index t = 0; t < 40; ++t)
        for (Eigen::Index c = 0; c < got.width(); ++c) worst = std::max(worst, std::abs(got.data(t, c) - want[t][c]));
    }
  }
  ok = ok && worst <= 1e-9;
  return {ok, detail + ", k in {1, 1.5, 2, 3} max oracle gap " + g(worst) + " (tol 1e-9)"};
}

Outcome cell_correctness(Context&) {
  Rng rng(202);
  double gru = 0.0, rnn = 0.0, lstm = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index h = 1 + static_cast<Eigen::Index>(rng() % 16);
    const Eigen::Index in = 1 + static_cast<Eigen::Index>(rng() % 16);
    Vector a(h), c(h), x(in);
    fill_uniform(a, rng, -2.0, 2.0);
    fill_uniform(c, rng, -2.0, 2.0);
    fill_uniform(x, rng, -3.0, 3.0);

    const auto pg = GruLayerParams::random(h, in, rng);
    const oracle::Gru og{rows_of(pg.W_r), rows_of(pg.W_a), rows_of(pg.W_u), vec_of(pg.b_r), vec_of(pg.b_a), vec_of(pg.b_u)};
    gru = std::max(gru, max_gap(gru_cell_step(pg, a, x), oracle::gru_step(og, vec_of(a), vec_of(x))));

    const auto pr = RnnLayerParams::random(h, in, rng);
    rnn = std::max(rnn, max_gap(rnn_cell_step(pr, a, x), oracle::rnn_step({rows_of(pr.W_h), vec_of(pr.b_h)}, vec_of(a), vec_of(x))));

    const auto pl = LstmLayerParams::random(h, in, rng);
    const oracle::Lstm ol{rows_of(pl.W_i), rows_of(pl.W_f), rows_of(pl.W_o), rows_of(pl.W_c),
                          vec_of(pl.b_i),  vec_of(pl.b_f),  vec_of(pl.b_o),  vec_of(pl.b_c)};
    const auto want = oracle::lstm_step(ol, {vec_of(a), vec_of(c)}, vec_of(x));
    const auto got = lstm_cell_step(pl, {a, c}, x);
    lstm = std::max({lstm, max_gap(got.hidden, want.h), max_gap(got.cell, want.c)});
  }
  const bool ok = gru <= 1e-9 && rnn <= 1e-9 && lstm <= 1e-9;
  return {ok, "1000 cases, max gap gru " + g(gru) + " rnn " + g(rnn) + " lstm " + g(lstm) + " (tol 1e-9)"};
}

Outcome gradient_suite(Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string where;
  for (CellKind cell : {CellKind::gru, CellKind::rnn, CellKind::lstm}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const bool training = seed > 3;
      const auto w = fd::check_all(fd::tiny_problem(cell, seed), training);
      if (w.rel > worst) {
        worst = w.rel;
        where = cell_name(cell) + " " + w.where;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = worst < 1e-4 && secs < 60.0;
  return {ok, "3 cells x 5 tiny models, max relative error " + g(worst) + (where.empty() ? "" : " at " + where) +
                  " (tol 1e-4), " + fmt("%.1f", secs) + " s"};
}

Outcome normalization(Context&) {
  Rng rng(303);
  double mean_gap = 0.0, range_gap = 0.0, round_trip = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto verts = static_cast<Eigen::Index>(2 + rng() % 500);
    TemplateFace face{Matrix(verts, 3), "s"};
    fill_uniform(face.vertices, rng, -1.0, 1.0);
    for (int a = 0; a < 3; ++a) face.vertices.col(a) = face.vertices.col(a) * uniform(rng, 1.0, 300.0) +
                                                        Vector::Constant(verts, uniform(rng, -500.0, 500.0));
    const auto stats = compute_normalization_stats(face);
    const auto n = normalize(face, stats);
    for (int a = 0; a < 3; ++a) {
      mean_gap = std::max(mean_gap, std::abs(n.vertices.col(a).mean()));
      range_gap = std::max(range_gap, std::abs(n.vertices.col(a).maxCoeff() - n.vertices.col(a).minCoeff() - 1.0));
    }
    round_trip = std::max(round_trip, (denormalize(n, stats).vertices - face.vertices).cwiseAbs().maxCoeff());
  }
  const bool ok = mean_gap < 1e-9 && range_gap < 1e-9 && round_trip <= 1e-9;
  return {ok, "200 faces, max |mean| " + g(mean_gap) + ", max |range - 1| " + g(range_gap) + ", round trip " +
                  g(round_trip) + " (tol 1e-9)"};
}

Outcome huber_continuity(Context&) {
  double worst = 0.0;
  for (double delta : {0.01, 0.5, 1.0, 2.0, 10.0}) {
    for (double sign : {1.0, -1.0}) {
      const double r = sign * delta;
      const double eps = 1e-12 * delta;
      const double value = 0.5 * delta * delta;
      for (double x : {r - eps, r, r + eps}) {
        worst = std::max(worst, std::abs(huber(x, delta) - value));
        worst = std::max(worst, std::abs(huber_derivative(x, delta) - sign * delta));
      }
    }
  }
  return {worst <= 1e-9, "value 0.5 d^2 and slope d on both sides of |r| = d, max gap " + g(worst) + " (tol 1e-9)"};
}

// Shared by the overfit and conditioning criteria.
struct TrainedFixture {
  bool ready = false;
  std::string error;
  fs::path data_dir;
  fs::path run_dir;
  Dataset data;
  Checkpoint ckpt;
  nlohmann::json info;
  std::vector<std::vector<std::string>> splits;  // train, val, test item names
};

TrainedFixture& fixture(Context& ctx) {
  static TrainedFixture f;
  static bool attempted = false;
  if (attempted) return f;
  attempted = true;
  try {
    // V = 50, B = 16, 50 -> 25 fps (k = 2), 20 sequences, 2 subjects, T = 40.
    f.data_dir = ctx.work / "fixture" / "data";
    f.run_dir = ctx.work / "fixture" / "run";
    ctx.run("gen-synthetic --seed 1 --vertices 50 --feature-dim 16 --feature-fps 50 --mesh-fps 25 --sequences 20 "
            "--subjects 2 --frames 40 --out " + (ctx.work / "fixture" / "raw").string());
    ctx.run("preprocess --input " + (ctx.work / "fixture" / "raw").string() + " --out " + f.data_dir.string());
    ctx.run("train --seed 1 --manifest " + (f.data_dir / "manifest.json").string() +
            " --epochs 300 --out " + f.run_dir.string());
    f.data = load_dataset(f.data_dir / "manifest.json");
    f.ckpt = load_checkpoint(f.run_dir / "model.ckpt");
    f.info = nlohmann::json::parse(io::read_text(f.run_dir / "run_manifest.json"));
    for (const char* part : {"train", "val", "test"}) f.splits.push_back(f.info["split"][part].get<std::vector<std::string>>());
    f.ready = true;
  } catch (const std::exception& e) {
    f.error = e.what();
  }
  return f;
}

std::vector<std::size_t> indices_of(const Dataset& data, const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  for (const auto& n : names)
    for (std::size_t i = 0; i < data.items.size(); ++i)
      if (data.items[i].name == n) out.push_back(i);
  return out;
}

MeshSequence predict_item(const TrainedFixture& f, const DatasetItem& item, int emotion) {
  return predict(f.ckpt.params, item.features, item.target.fps, item.target.num_frames(), item.subject, emotion,
                 item.face);
}

NormalizationStats stats_for(const TrainedFixture& f, int subject) {
  return load_stats(f.data_dir / "stats" / (f.data.subject_labels[subject] + ".json"));
}

double denormalized_error(const TrainedFixture& f, const std::vector<std::size_t>& indices) {
  std::vector<MeshSequence> preds, gts;
  for (std::size_t i : indices) {
    const auto& item = f.data.items[i];
    const auto stats = stats_for(f, item.subject);
    preds.push_back(denormalize(predict_item(f, item, item.emotion), stats));
    gts.push_back(denormalize(item.target, stats));
  }
  return mean_face_vertex_error(preds, gts);
}

Outcome end_to_end_overfit(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  auto& f = fixture(ctx);
  if (!f.ready) return {false, "fixture training failed: " + f.error};
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::istringstream csv(io::read_text(f.run_dir / "loss.csv"));
  std::string line;
  std::getline(csv, line);
  std::vector<double> losses;
  while (std::getline(csv, line)) {
    const auto a = line.find(',');
    losses.push_back(std::stod(line.substr(a + 1, line.find(',', a + 1) - a - 1)));
  }
  if (losses.empty()) return {false, "empty loss log"};
  const double ratio = losses.back() / losses.front();

  const auto train_idx = indices_of(f.data, f.splits[0]);
  auto held_idx = indices_of(f.data, f.splits[1]);
  const auto test_idx = indices_of(f.data, f.splits[2]);
  held_idx.insert(held_idx.end(), test_idx.begin(), test_idx.end());
  const double train_err = denormalized_error(f, train_idx);
  const double held_err = denormalized_error(f, held_idx);
  const bool ok = losses.size() <= 300 && ratio < 0.05 && held_err < 3.0 * train_err;
  return {ok, std::to_string(losses.size()) + " epochs, final/epoch-1 train loss " + fmt("%.4f", ratio) +
                  " (need < 0.05), held-out error " + g(held_err) + " vs train " + g(train_err) + " = " +
                  fmt("%.2f", held_err / train_err) + "x (need < 3x), " + fmt("%.0f", secs) + " s"};
}

Outcome conditioning_sensitivity(Context& ctx) {
  auto& f = fixture(ctx);
  if (!f.ready) return {false, "fixture training failed: " + f.error};
  const int expressive = label_index(f.data.emotion_labels, "expressive", "emotion");
  const int neutral = label_index(f.data.emotion_labels, "neutral", "emotion");
  // The synthetic emotion deformation lives on the first ceil(V / 3) vertices.
  const Eigen::Index verts = f.ckpt.params.config.num_vertices;
  const Eigen::Index upper = (verts + 2) / 3;
  const auto test_idx = indices_of(f.data, f.splits[2]);
  if (test_idx.empty()) return {false, "fixture has no test items"};
  double ratio_sum = 0.0;
  for (std::size_t i : test_idx) {
    const auto& item = f.data.items[i];
    const auto stats = stats_for(f, item.subject);
    const auto a = denormalize(predict_item(f, item, expressive), stats);
    const auto b = denormalize(predict_item(f, item, neutral), stats);
    double on = 0.0, off = 0.0;
    for (Eigen::Index t = 0; t < a.num_frames(); ++t)
      for (Eigen::Index v = 0; v < verts; ++v)
        (v < upper ? on : off) += (a.frames.row(t).segment<3>(3 * v) - b.frames.row(t).segment<3>(3 * v)).norm();
    on /= static_cast<double>(upper * a.num_frames());
    off /= static_cast<double>((verts - upper) * a.num_frames());
    ratio_sum += on / off;
  }
  const double ratio = ratio_sum / static_cast<double>(test_idx.size());
  return {ratio >= 5.0, "emotion flip moves designated vertices " + fmt("%.1f", ratio) +
                            "x more than the rest, over " + std::to_string(test_idx.size()) +
                            " test item(s) (need >= 5x)"};
}

Outcome train_determinism(Context& ctx) {
  const fs::path data = ctx.work / "determinism" / "data";
  ctx.run("gen-synthetic --seed 5 --vertices 20 --sequences 10 --frames 20 --out " +
          (ctx.work / "determinism" / "raw").string());
  ctx.run("preprocess --input " + (ctx.work / "determinism" / "raw").string() + " --out " + data.string());
  for (const char* name : {"a", "b"}) {
    ctx.run("train --seed 11 --manifest " + (data / "manifest.json").string() + " --epochs 4 --hidden 32 --out " +
            (ctx.work / "determinism" / name).string());
  }
  bool ok = true;
  std::string detail;
  for (const char* file : {"model.ckpt", "best.ckpt", "loss.csv"}) {
    const bool same = io::read_file(ctx.work / "determinism" / "a" / file) ==
                      io::read_file(ctx.work / "determinism" / "b" / file);
    ok = ok && same;
    detail += std::string(detail.empty() ? "" : ", ") + file + (same ? " identical" : " DIFFERS");
  }
  return {ok, "two seeded cmd_train runs: " + detail};
}

// Nested-loop reference for the mean face vertex error.
double metric_oracle(const std::vector<MeshSequence>& a, const std::vector<MeshSequence>& b) {
  double total = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    double seq = 0.0;
    for (Eigen::Index t = 0; t < a[s].frames.rows(); ++t) {
      double frame = 0.0;
      const Eigen::Index verts = a[s].frames.cols() / 3;
      for (Eigen::Index v = 0; v < verts; ++v) {
        double sq = 0.0;
        for (int c = 0; c < 3; ++c) sq += std::pow(a[s].frames(t, 3 * v + c) - b[s].frames(t, 3 * v + c), 2);
        frame += std::sqrt(sq);
      }
      seq += frame / static_cast<double>(verts);
    }
    total += seq / static_cast<double>(a[s].frames.rows());
  }
  return total / static_cast<double>(a.size());
}

Outcome metric_oracle_check(Context&) {
  Matrix pred = Matrix::Zero(1, 6);
  pred(0, 0) = 3.0;
  pred(0, 1) = 4.0;
  const std::vector<MeshSequence> p345{MeshSequence(pred, 25.0)}, g345{MeshSequence(Matrix::Zero(1, 6), 25.0)};
  const double hand = mean_face_vertex_error(p345, g345);
  bool ok = std::abs(hand - 2.5) < 1e-12;

  Rng rng(404);
  double oracle_gap = 0.0, symmetry_gap = 0.0, scale_gap = 0.0, identity = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto count = 1 + rng() % 4;
    const auto verts = static_cast<Eigen::Index>(1 + rng() % 30);
    std::vector<MeshSequence> a, b, sa, sb;
    const double c = uniform(rng, -5.0, 5.0);
    for (std::size_t s = 0; s < count; ++s) {
      const auto frames = static_cast<Eigen::Index>(1 + rng() % 20);
      Matrix x(frames, 3 * verts), y(frames, 3 * verts);
      fill_uniform(x, rng, -10.0, 10.0);
      fill_uniform(y, rng, -10.0, 10.0);
      a.emplace_back(x, 25.0);
      b.emplace_back(y, 25.0);
      sa.emplace_back(c * x, 25.0);
      sb.emplace_back(c * y, 25.0);
    }
    const double e = mean_face_vertex_error(a, b);
    oracle_gap = std::max(oracle_gap, std::abs(e - metric_oracle(a, b)));
    symmetry_gap = std::max(symmetry_gap, std::abs(e - mean_face_vertex_error(b, a)));
    scale_gap = std::max(scale_gap, std::abs(mean_face_vertex_error(sa, sb) - std::abs(c) * e) / std::max(e, 1e-300));
    identity = std::max(identity, mean_face_vertex_error(a, a));
  }
  ok = ok && oracle_gap < 1e-9 && symmetry_gap < 1e-12 && scale_gap < 1e-12 && identity == 0.0;
  return {ok, "3-4-5 fixture " + fmt("%.6g", hand) + " (want 2.5); 100 random cases: oracle gap " + g(oracle_gap) +
                  ", symmetry gap " + g(symmetry_gap) + ", relative scale gap " + g(scale_gap) + ", self error " +
                  g(identity)};
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--cli") ctx.cli = argv[i + 1];
    if (flag == "--work") ctx.work = argv[i + 1];
  }
  if (ctx.cli.empty() || ctx.work.empty()) {
    std::cerr << "usage: acceptance --cli <gruface_cli> --work <dir>\n";
    return 2;
  }
  fs::remove_all(ctx.work);
  fs::create_directories(ctx.work);

  const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria{
      {"adjustment-shape-law", adjustment_shape_law},
      {"cell-correctness", cell_correctness},
      {"gradient-suite", gradient_suite},
      {"normalization", normalization},
      {"huber-continuity", huber_continuity},
      {"end-to-end-overfit", end_to_end_overfit},
      {"conditioning-sensitivity", conditioning_sensitivity},
      {"train-determinism", train_determinism},
      {"metric-oracle", metric_oracle_check},
  };

  int passed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    passed += o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << passed << "/" << criteria.size() << " criteria passed" << std::endl;
  return passed == static_cast<int>(criteria.size()) ? 0 : 1;
}
