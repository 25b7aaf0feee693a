// Copyright 2026 The MCN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// mcn: command-line front end for flow-graph clustering.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <vector>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif
#include <nlohmann/json.hpp>

#include "mcn/bench.hpp"
#include "mcn/boxgen.hpp"
#include "mcn/common.hpp"
#include "mcn/fml.hpp"
#include "mcn/flow_matrix.hpp"
#include "mcn/io.hpp"
#include "mcn/labeling.hpp"
#include "mcn/mcl.hpp"
#include "mcn/mcl_grad.hpp"
#include "mcn/render.hpp"
#include "mcn/toy_model.hpp"

namespace {

using nlohmann::json;

struct Globals {
  unsigned threads = 1;
  std::uint64_t seed = 0;
};

mcn::GridShape parse_grid(const std::string& text) {
  static const std::regex pattern(R"((\d+)[xX](\d+))");
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) {
    throw mcn::Error("grid must look like ROWSxCOLS, got '" + text + "'");
  }
  mcn::GridShape g{std::stoul(m[1]), std::stoul(m[2]), 16, 8.0};
  g.validate();
  return g;
}

// "-" means stdin/stdout.
template <class Fn>
auto with_input(const std::string& path, Fn&& fn) {
  if (path == "-") return fn(std::cin, std::string("<stdin>"));
  std::ifstream in = mcn::open_input(path);
  return fn(in, path);
}

template <class Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out = mcn::open_output(path);
  fn(out);
  if (!out) throw mcn::Error(path + ": write failed");
}

json read_json_file(const std::string& path) {
  return with_input(path, [](std::istream& in, const std::string& src) {
    return mcn::read_json(in, src);
  });
}

mcn::GradMode parse_mode(const std::string& s) {
  if (s == "exact") return mcn::GradMode::exact;
  if (s == "approx") return mcn::GradMode::approx;
  throw mcn::Error("unknown gradient mode '" + s + "' (use exact or approx)");
}

json score_json(const mcn::DetectionScore& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f_score", s.f_score},
          {"true_positives", s.true_positives}, {"num_pred", s.num_pred},
          {"num_gt", s.num_gt}};
}

struct GenArgs {
  std::string grid = "16x16";
  std::size_t min_boxes = 1, max_boxes = 3;
  double noise = 0.1;
  std::size_t max_path = 9;
  std::string scene_out, features_out, flows_out = "-";
};

void run_gen(const GenArgs& a, const Globals& g) {
  mcn::SceneConfig cfg;
  cfg.shape = parse_grid(a.grid);
  cfg.min_boxes = a.min_boxes;
  cfg.max_boxes = a.max_boxes;
  cfg.noise = a.noise;
  cfg.max_path_len = a.max_path;
  const mcn::SyntheticScene s = mcn::synth_scene(cfg, g.seed);
  if (!a.scene_out.empty()) {
    with_output(a.scene_out, [&](std::ostream& o) { o << mcn::scene_to_json(s.scene).dump(2) << '\n'; });
  }
  if (!a.features_out.empty()) {
    with_output(a.features_out, [&](std::ostream& o) { mcn::write_features(o, s.features); });
  }
  with_output(a.flows_out, [&](std::ostream& o) { mcn::write_sfg(o, mcn::ground_truth_flows(s.mask)); });
}

struct ClusterArgs {
  std::string in = "-", out = "-", signals;
  std::size_t iters = 8;
  double threshold = 0.15, eps = 1e-6, fg_cutoff = 0.5;
  std::size_t min_size = 1;
  bool no_renorm = false, no_early_stop = false;
};

void run_cluster(const ClusterArgs& a, const Globals& g) {
  const mcn::FlowMaps fm = with_input(a.in, [](std::istream& in, const std::string& src) {
    return mcn::read_sfg(in, src);
  });
  mcn::MclConfig cfg;
  cfg.max_iters = a.iters;
  cfg.prune_threshold = a.threshold;
  cfg.convergence_eps = a.eps;
  cfg.final_renormalize = !a.no_renorm;
  cfg.early_stop = !a.no_early_stop;
  cfg.threads = g.threads;
  cfg.validate();
  const mcn::MclResult r = mcn::markov_cluster(mcn::build_flow_matrix(fm), cfg);
  std::optional<mcn::NodeSignals> sig;
  if (!a.signals.empty()) {
    sig = with_input(a.signals, [](std::istream& in, const std::string& src) {
      return mcn::read_signals(in, src);
    });
    if (!sig->shape.same_lattice(fm.shape)) throw mcn::Error(a.signals + ": grid differs from flows");
  }
  const mcn::ClusterAssignment assignment = mcn::extract_clusters(
      r.matrix, sig ? &sig->presence : nullptr, {a.fg_cutoff, a.min_size});
  with_output(a.out, [&](std::ostream& o) {
    o << mcn::clusters_to_json(assignment, r.iterations_run, fm.shape).dump() << '\n';
  });
}

struct BoxesArgs {
  std::string in = "-", out = "-", grid, extent = "stddev";
  double scale = 1.75;
};

void run_boxes(const BoxesArgs& a) {
  const mcn::ClusterFile file = mcn::clusters_from_json(read_json_file(a.in));
  mcn::GridShape shape;
  if (!a.grid.empty()) {
    shape = parse_grid(a.grid);
  } else if (file.shape) {
    shape = *file.shape;
  } else {
    throw mcn::Error(a.in + ": cluster file has no grid; pass --grid");
  }
  if (file.assignment.attractor.size() != shape.node_count()) {
    throw mcn::Error(a.in + ": cluster file does not match the grid");
  }
  mcn::PcaBoxParams params;
  params.scale = a.scale;
  if (a.extent == "stddev") {
    params.extent_mode = mcn::ExtentMode::stddev;
  } else if (a.extent == "variance") {
    params.extent_mode = mcn::ExtentMode::variance;
  } else {
    throw mcn::Error("unknown extent mode '" + a.extent + "' (use stddev or variance)");
  }
  const auto dets = mcn::clusters_to_boxes(file.assignment, shape, params);
  with_output(a.out, [&](std::ostream& o) { o << mcn::detections_to_json(dets).dump(2) << '\n'; });
}

struct EvalArgs {
  std::string scene, in = "-", model, grid = "16x16";
  std::size_t scenes = 50;
  double iou = 0.5, threshold = 0.15;
};

void run_eval(const EvalArgs& a, const Globals& g) {
  json report;
  if (!a.model.empty()) {
    const mcn::ToyPredictor model = mcn::model_from_json(read_json_file(a.model));
    mcn::SceneConfig cfg;
    cfg.shape = parse_grid(a.grid);
    cfg.feature_dim = model.features();
    std::vector<mcn::SyntheticScene> held;
    for (std::size_t k = 0; k < a.scenes; ++k) held.push_back(mcn::held_out_scene(cfg, g.seed, k));
    mcn::EvalOptions opt;
    opt.mcl.prune_threshold = a.threshold;
    opt.iou_threshold = a.iou;
    opt.threads = g.threads;
    const mcn::EvalReport r = mcn::evaluate_model(model, held, opt);
    report = score_json(r.detection);
    report["node_accuracy"] = r.node_accuracy;
    report["scenes"] = a.scenes;
  } else {
    if (a.scene.empty()) throw mcn::Error("eval needs --scene (with detections) or --model");
    // Detections first: upstream pipeline stages may still be writing the scene.
    const auto dets = mcn::detections_from_json(read_json_file(a.in));
    const mcn::Scene scene = mcn::scene_from_json(read_json_file(a.scene));
    std::vector<mcn::RotatedBox> pred;
    for (const auto& d : dets) pred.push_back(d.box);
    report = score_json(mcn::evaluate_detections(pred, scene.boxes, a.iou));
  }
  std::cout << report.dump(2) << '\n';
}

struct TrainArgs {
  std::string grid = "16x16", mode = "exact", out = "model.json";
  std::size_t steps = 3000, hidden = 24, log_every = 100;
  double lr = 1e-2, momentum = 0.9, flow_weight = 1.0, clip = 0.0;
};

void run_train(const TrainArgs& a, const Globals& g) {
  mcn::TrainConfig cfg;
  cfg.scene.shape = parse_grid(a.grid);
  cfg.steps = a.steps;
  cfg.hidden = a.hidden;
  cfg.seed = g.seed;
  cfg.step.lr = a.lr;
  cfg.step.momentum = a.momentum;
  cfg.step.clip_norm = a.clip;
  cfg.step.pipeline.grad_mode = parse_mode(a.mode);
  cfg.step.pipeline.flow_weight = a.flow_weight;
  cfg.step.pipeline.threads = g.threads;
  mcn::LossRecord window;
  std::size_t count = 0;
  const mcn::TrainResult r = mcn::train(cfg, [&](const mcn::TrainState& s) {
    const mcn::LossRecord& h = s.history.back();
    window.object += h.object;
    window.flow += h.flow;
    window.total += h.total;
    ++count;
    if (a.log_every > 0 && (s.step % a.log_every == 0 || s.step == cfg.steps)) {
      const double n = static_cast<double>(count);
      std::cerr << "step " << s.step << " C_o " << window.object / n << " C_f "
                << window.flow / n << " C_total " << window.total / n << '\n';
      window = {};
      count = 0;
    }
  });
  with_output(a.out, [&](std::ostream& o) { o << mcn::model_to_json(r.model).dump() << '\n'; });
}

struct GradcheckArgs {
  std::string grid = "4x4", mode = "exact";
  std::size_t iters = 3;
  double eps = 1e-6;
};

// Compares the analytic flow-loss gradient to central differences on one
// random instance. Exact mode must match entrywise; the approximate mode only
// has to point downhill (positive inner product with the numeric gradient).
bool run_gradcheck(const GradcheckArgs& a, const Globals& g) {
  mcn::SceneConfig scfg;
  scfg.shape = parse_grid(a.grid);
  scfg.min_length = 2;
  scfg.max_length = 3;
  scfg.min_height = 1;
  scfg.max_height = 2;
  scfg.min_gap = 1;
  scfg.max_boxes = 1;
  const mcn::SyntheticScene s = mcn::synth_scene(scfg, g.seed);
  std::mt19937_64 rng(mcn::derive_seed(g.seed, 4, 0));
  std::uniform_real_distribution<double> u(0.05, 0.95);
  mcn::NodeSignals sig(scfg.shape);
  for (mcn::NodeId m = 0; m < scfg.shape.node_count(); ++m) {
    sig.presence[m] = u(rng);
    for (auto& l : sig.link) l[m] = u(rng);
  }
  const mcn::FlowMatrix m0 = mcn::build_flow_matrix(mcn::fml_forward(sig, {}));
  mcn::MclConfig cfg = mcn::MclConfig::training();
  cfg.max_iters = a.iters;
  cfg.early_stop = false;
  const mcn::FlowLabel label = mcn::build_flow_label(s.mask);
  const mcn::MclResult r = mcn::markov_cluster(m0, cfg, true);
  const mcn::DenseMatrix analytic = mcn::mcl_backward(*r.tape, label, parse_mode(a.mode));
  const mcn::DenseMatrix numeric = mcn::finite_diff_grad(m0, label, cfg, a.eps);
  const bool exact = parse_mode(a.mode) == mcn::GradMode::exact;
  double max_rel = 0.0, max_abs_small = 0.0, inner = 0.0, na = 0.0, nn = 0.0;
  bool ok = true;
  for (mcn::NodeId c = 0; c < m0.size(); ++c) {
    m0.for_each_nonzero(c, [&](mcn::NodeId row, double) {
      const double ga = analytic(row, c), gn = numeric(row, c);
      inner += ga * gn;
      na += ga * ga;
      nn += gn * gn;
      if (std::abs(gn) < 1e-3) {
        max_abs_small = std::max(max_abs_small, std::abs(ga - gn));
        ok = ok && std::abs(ga - gn) < 1e-7;
      } else {
        const double rel = std::abs(ga - gn) / std::abs(gn);
        max_rel = std::max(max_rel, rel);
        ok = ok && rel < 1e-4;
      }
    });
  }
  if (!exact) ok = inner > 0.0;
  const double cosine = na > 0 && nn > 0 ? inner / std::sqrt(na * nn) : 0.0;
  std::cout << json{{"mode", a.mode}, {"iters", a.iters}, {"cost", mcn::flow_loss(r.matrix, label).cost},
                    {"max_rel_error", max_rel}, {"max_abs_error_small", max_abs_small},
                    {"cosine", cosine}, {"pass", ok}}.dump(2)
            << '\n';
  return ok;
}

struct BenchArgs {
  std::string grid = "32x32", out = "-";
  std::size_t min_iters = 1, max_iters = 8, trials = 20;
};

void run_bench(const BenchArgs& a, const Globals& g) {
  const mcn::BenchResult r =
      mcn::bench_mcl(parse_grid(a.grid), a.min_iters, a.max_iters, a.trials, g.seed, g.threads);
  with_output(a.out, [&](std::ostream& o) { mcn::write_bench_csv(o, r); });
}

struct RenderArgs {
  std::string scene, flows, clusters, boxes, out = "-";
};

void run_render(const RenderArgs& a) {
  mcn::RenderInput input;
  input.scene = mcn::scene_from_json(read_json_file(a.scene));
  std::optional<mcn::FlowMaps> flows;
  std::optional<mcn::ClusterAssignment> clusters;
  if (!a.flows.empty()) {
    flows = with_input(a.flows, [](std::istream& in, const std::string& src) {
      return mcn::read_sfg(in, src);
    });
    input.flows = &*flows;
  }
  if (!a.clusters.empty()) {
    clusters = mcn::clusters_from_json(read_json_file(a.clusters)).assignment;
    input.clusters = &*clusters;
  }
  if (!a.boxes.empty()) {
    for (const auto& d : mcn::detections_from_json(read_json_file(a.boxes))) {
      input.predicted.push_back(d.box);
    }
  }
  const std::string svg = mcn::render_svg(input);
  with_output(a.out, [&](std::ostream& o) { o << svg; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-graph clustering: scene generation, Markov clustering, boxes, training"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  app.add_option("--seed", g.seed, "Random seed");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic scene; ground-truth flows (.sfg) to stdout");
  gen_cmd->add_option("--grid", gen.grid, "Grid ROWSxCOLS");
  gen_cmd->add_option("--min-boxes", gen.min_boxes, "Fewest boxes per scene");
  gen_cmd->add_option("--max-boxes", gen.max_boxes, "Most boxes per scene");
  gen_cmd->add_option("--noise", gen.noise, "Feature noise level");
  gen_cmd->add_option("--max-path", gen.max_path, "Longest in-box path to an attractor");
  gen_cmd->add_option("--scene-out", gen.scene_out, "Scene JSON path");
  gen_cmd->add_option("--features-out", gen.features_out, "Node feature (FEA1) path");
  gen_cmd->add_option("--flows-out", gen.flows_out, "Flow (.sfg) path, - for stdout");

  ClusterArgs cl;
  auto* cl_cmd = app.add_subcommand("cluster", "Markov-cluster a flow graph (.sfg) into cluster JSON");
  cl_cmd->add_option("--in", cl.in, "Input .sfg, - for stdin");
  cl_cmd->add_option("--out", cl.out, "Output JSON, - for stdout");
  cl_cmd->add_option("--iters", cl.iters, "Maximum iterations N");
  cl_cmd->add_option("--threshold", cl.threshold, "Prune threshold");
  cl_cmd->add_option("--eps", cl.eps, "Convergence tolerance");
  cl_cmd->add_flag("--no-renorm", cl.no_renorm, "Skip the final column renormalization");
  cl_cmd->add_flag("--no-early-stop", cl.no_early_stop, "Always run N iterations");
  cl_cmd->add_option("--signals", cl.signals, "SIG1 file providing foreground probability");
  cl_cmd->add_option("--fg-cutoff", cl.fg_cutoff, "Mean foreground probability for a cluster");
  cl_cmd->add_option("--min-size", cl.min_size, "Smallest cluster kept");

  BoxesArgs bx;
  auto* bx_cmd = app.add_subcommand("boxes", "Fit rotated boxes to clusters");
  bx_cmd->add_option("--in", bx.in, "Cluster JSON, - for stdin");
  bx_cmd->add_option("--out", bx.out, "Detections JSON, - for stdout");
  bx_cmd->add_option("--grid", bx.grid, "Grid ROWSxCOLS when the cluster file has none");
  bx_cmd->add_option("--scale", bx.scale, "Box scale factor");
  bx_cmd->add_option("--extent", bx.extent, "stddev or variance");

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Score detections against a scene, or a model on held-out scenes");
  ev_cmd->add_option("--scene", ev.scene, "Ground-truth scene JSON");
  ev_cmd->add_option("--in", ev.in, "Detections JSON, - for stdin");
  ev_cmd->add_option("--model", ev.model, "Model JSON to evaluate on synthetic scenes");
  ev_cmd->add_option("--scenes", ev.scenes, "Number of held-out scenes");
  ev_cmd->add_option("--grid", ev.grid, "Grid for held-out scenes");
  ev_cmd->add_option("--iou", ev.iou, "IoU match threshold");
  ev_cmd->add_option("--threshold", ev.threshold, "Inference prune threshold");

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "Train the toy predictor end to end");
  tr_cmd->add_option("--grid", tr.grid, "Grid ROWSxCOLS");
  tr_cmd->add_option("--steps", tr.steps, "SGD steps");
  tr_cmd->add_option("--lr", tr.lr, "Learning rate");
  tr_cmd->add_option("--momentum", tr.momentum, "Momentum coefficient");
  tr_cmd->add_option("--grad-mode", tr.mode, "exact or approx");
  tr_cmd->add_option("--flow-weight", tr.flow_weight, "Weight of the flow loss");
  tr_cmd->add_option("--hidden", tr.hidden, "Hidden layer width");
  tr_cmd->add_option("--clip", tr.clip, "Gradient norm clip, 0 disables");
  tr_cmd->add_option("--log-every", tr.log_every, "Steps between log lines, 0 disables");
  tr_cmd->add_option("--out", tr.out, "Model JSON path");

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare clustering gradients to finite differences");
  gc_cmd->add_option("--grid", gc.grid, "Grid ROWSxCOLS");
  gc_cmd->add_option("--iters", gc.iters, "MCL iterations");
  gc_cmd->add_option("--mode", gc.mode, "exact or approx");
  gc_cmd->add_option("--eps", gc.eps, "Finite-difference step");

  BenchArgs bn;
  auto* bn_cmd = app.add_subcommand("bench", "Time clustering against the iteration count");
  bn_cmd->add_option("--grid", bn.grid, "Grid ROWSxCOLS");
  bn_cmd->add_option("--min-iters", bn.min_iters, "Smallest iteration count");
  bn_cmd->add_option("--max-iters", bn.max_iters, "Largest iteration count");
  bn_cmd->add_option("--trials", bn.trials, "Timed runs per iteration count");
  bn_cmd->add_option("--out", bn.out, "CSV path, - for stdout");

  RenderArgs rd;
  auto* rd_cmd = app.add_subcommand("render", "Draw a scene as SVG");
  rd_cmd->add_option("--scene", rd.scene, "Scene JSON")->required();
  rd_cmd->add_option("--flows", rd.flows, "Flow maps (.sfg)");
  rd_cmd->add_option("--clusters", rd.clusters, "Cluster JSON");
  rd_cmd->add_option("--boxes", rd.boxes, "Detections JSON");
  rd_cmd->add_option("--out", rd.out, "SVG path, - for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;
    if (dynamic_cast<const CLI::ExtrasError*>(&e) != nullptr ||
        dynamic_cast<const CLI::RequiredError*>(&e) != nullptr) {
      std::cerr << app.help();
    }
    return 2;
  }

  try {
    if (*gen_cmd) run_gen(gen, g);
    if (*cl_cmd) run_cluster(cl, g);
    if (*bx_cmd) run_boxes(bx);
    if (*ev_cmd) run_eval(ev, g);
    if (*tr_cmd) run_train(tr, g);
    if (*gc_cmd && !run_gradcheck(gc, g)) return 1;
    if (*bn_cmd) run_bench(bn, g);
    if (*rd_cmd) run_render(rd);
  } catch (const mcn::Error& e) {
    std::cerr << "mcn: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
