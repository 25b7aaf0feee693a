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

#ifndef MCN_TOY_MODEL_HPP_
#define MCN_TOY_MODEL_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mcn/boxgen.hpp"
#include "mcn/common.hpp"
#include "mcn/fml.hpp"
#include "mcn/flow_matrix.hpp"
#include "mcn/geometry.hpp"
#include "mcn/labeling.hpp"
#include "mcn/mcl.hpp"
#include "mcn/mcl_grad.hpp"

namespace mcn {

// SplitMix64 finalizer; derives independent seeds for scene streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t z = base * 0x9e3779b97f4a7c15ull + stream * 0xbf58476d1ce4e5b9ull + index + 1;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

struct SceneConfig {
  GridShape shape{16, 16, 16, 8.0};
  std::size_t min_boxes = 1;
  std::size_t max_boxes = 3;
  // Box extent in lattice steps along the major and minor axis.
  std::size_t min_length = 3;
  std::size_t max_length = 6;
  std::size_t min_height = 2;
  std::size_t max_height = 3;
  std::vector<double> angles = {0.0, std::numbers::pi / 6, -std::numbers::pi / 6};
  double noise = 0.1;
  std::size_t feature_dim = 8;
  // Longest admissible in-box path to the attractor; keeps ground-truth
  // chains absorbed within a fixed number of iterations.
  std::size_t max_path_len = 9;
  // Minimum Chebyshev distance, in nodes, between nodes of different boxes.
  std::size_t min_gap = 2;
  std::size_t max_retries = 500;

  void validate() const {
    shape.validate();
    if (min_boxes > max_boxes || min_length > max_length || min_height > max_height ||
        min_length < 1 || min_height < 1) {
      throw Error("scene config: inconsistent box ranges");
    }
    if (angles.empty()) throw Error("scene config: empty angle set");
    if (feature_dim < 6) throw Error("scene config: feature_dim must be >= 6");
  }
};

// Per-node feature vectors, node-major: values[m * dim + c].
//   0: box indicator plus gaussian noise
//   1, 2: cos 2θ, sin 2θ of the covering box
//   3, 4: distance (in strides) to the lower and the upper short side
//   5: distance to the nearer long side
//   6..: pure noise
struct NodeFeatures {
  GridShape shape;
  std::size_t dim = 0;
  std::vector<double> values;

  double at(NodeId m, std::size_t c) const { return values[m * dim + c]; }
  double& at(NodeId m, std::size_t c) { return values[m * dim + c]; }
};

struct SyntheticScene {
  Scene scene;
  AttractorMask mask;
  NodeFeatures features;
};

namespace detail {

inline bool separated(const AttractorMask& mask, std::size_t gap) {
  const GridShape& s = mask.shape;
  for (NodeId m = 0; m < s.node_count(); ++m) {
    if (mask.owner[m] < 0) continue;
    const Cell c = node_coords(m, s);
    const std::size_t i0 = c.row >= gap ? c.row - gap : 0;
    const std::size_t j0 = c.col >= gap ? c.col - gap : 0;
    for (std::size_t i = i0; i <= std::min(s.rows - 1, c.row + gap); ++i) {
      for (std::size_t j = j0; j <= std::min(s.cols - 1, c.col + gap); ++j) {
        const int other = mask.owner[node_index(i, j, s)];
        if (other >= 0 && other != mask.owner[m]) return false;
      }
    }
  }
  return true;
}

inline bool fits_image(const RotatedBox& box, const GridShape& s) {
  const double width = static_cast<double>(s.cols * s.stride);
  const double height = static_cast<double>(s.rows * s.stride);
  for (const Point2& p : box.corners()) {
    if (p.x < 0 || p.y < 0 || p.x > width || p.y > height) return false;
  }
  return true;
}

// Mask is usable for supervision: every box node reaches its attractor
// within max_path_len steps.
inline bool routable(const AttractorMask& mask, std::size_t max_path_len) {
  const std::vector<int> dist = attractor_distances(mask);
  for (NodeId m = 0; m < dist.size(); ++m) {
    if (dist[m] < 0 || static_cast<std::size_t>(dist[m]) > max_path_len) return false;
  }
  return true;
}

}  // namespace detail

inline NodeFeatures scene_features(const AttractorMask& mask, const SceneConfig& cfg,
                                   std::mt19937_64& rng) {
  const GridShape& shape = mask.shape;
  NodeFeatures f{shape, cfg.feature_dim,
                 std::vector<double>(shape.node_count() * cfg.feature_dim, 0.0)};
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double unit = static_cast<double>(shape.stride);
  for (NodeId m = 0; m < shape.node_count(); ++m) {
    const int owner = mask.owner[m];
    f.at(m, 0) = (owner >= 0 ? 1.0 : 0.0) + cfg.noise * gauss(rng);
    if (owner >= 0) {
      const RotatedBox b = mask.adjusted_boxes[static_cast<std::size_t>(owner)].normalized();
      const Point2 d = node_center(m, shape) - b.center();
      const double along = dot(d, b.major_axis());
      const double across = dot(d, b.minor_axis());
      // +1 when the +major end is the lower one; horizontal boxes use the
      // left end as "lower".
      const double lower = std::sin(b.theta) * b.w > 1e-6 ? 1.0 : -1.0;
      f.at(m, 1) = std::cos(2 * b.theta);
      f.at(m, 2) = std::sin(2 * b.theta);
      f.at(m, 3) = (b.w / 2 - lower * along) / unit;
      f.at(m, 4) = (b.w / 2 + lower * along) / unit;
      f.at(m, 5) = (b.h / 2 - std::abs(across)) / unit;
    }
    for (std::size_t c = 6; c < cfg.feature_dim; ++c) f.at(m, c) = gauss(rng);
  }
  return f;
}

// Random non-overlapping boxes plus node features, fully determined by seed.
inline SyntheticScene synth_scene(const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const GridShape& shape = cfg.shape;
  const double unit = static_cast<double>(shape.stride);
  std::uniform_int_distribution<std::size_t> count_dist(cfg.min_boxes, cfg.max_boxes);
  std::uniform_int_distribution<std::size_t> len_dist(cfg.min_length, cfg.max_length);
  std::uniform_int_distribution<std::size_t> height_dist(cfg.min_height, cfg.max_height);
  std::uniform_int_distribution<std::size_t> angle_dist(0, cfg.angles.size() - 1);
  std::uniform_real_distribution<double> x_dist(0.0, static_cast<double>(shape.cols) * unit);
  std::uniform_real_distribution<double> y_dist(0.0, static_cast<double>(shape.rows) * unit);

  SyntheticScene out;
  out.scene.shape = shape;
  out.mask = build_attractor_mask({}, shape);
  const std::size_t wanted = count_dist(rng);
  for (std::size_t k = 0; k < wanted; ++k) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
      RotatedBox box{x_dist(rng), y_dist(rng), static_cast<double>(len_dist(rng)) * unit,
                     static_cast<double>(height_dist(rng)) * unit, cfg.angles[angle_dist(rng)]};
      box = box.normalized();
      if (!detail::fits_image(box, shape) || nodes_in_box(box, shape).size() < 2) continue;
      std::vector<RotatedBox> boxes = out.scene.boxes;
      boxes.push_back(box);
      AttractorMask mask;
      try {
        mask = build_attractor_mask(boxes, shape);
      } catch (const Error&) {
        continue;
      }
      if (!detail::separated(mask, cfg.min_gap) || !detail::routable(mask, cfg.max_path_len)) {
        continue;
      }
      out.scene.boxes = std::move(boxes);
      out.mask = std::move(mask);
      placed = true;
    }
    if (!placed) {
      throw Error("synth_scene: could not place box " + std::to_string(k) + " of " +
                  std::to_string(wanted) + " after " + std::to_string(cfg.max_retries) +
                  " attempts (seed " + std::to_string(seed) + ")");
    }
  }
  out.features = scene_features(out.mask, cfg, rng);
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Two-layer per-node model over the zero-padded 3x3 neighborhood of node
// features: tanh hidden layer, four logistic outputs (P, S1, S2, S3).
// All trainable values, including the flow-mapping parameters, live in one
// flat vector so the optimizer can treat them uniformly.
class ToyPredictor {
 public:
  static constexpr std::size_t kOutputs = 4;
  static constexpr std::size_t kWindow = 9;

  ToyPredictor() = default;
  ToyPredictor(std::size_t features, std::size_t hidden)
      : features_(features), hidden_(hidden), theta_(parameter_count(), 0.0) {
    set_fml({});
  }

  static ToyPredictor random(std::size_t features, std::size_t hidden, std::uint64_t seed,
                             double scale = 0.1) {
    ToyPredictor out(features, hidden);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, scale);
    for (std::size_t k = 0; k < out.fml_offset(); ++k) out.theta_[k] = gauss(rng);
    return out;
  }

  std::size_t features() const { return features_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t input_dim() const { return kWindow * features_; }
  std::size_t parameter_count() const {
    return hidden_ * input_dim() + hidden_ + kOutputs * hidden_ + kOutputs + 3;
  }

  // Layout: W1 (hidden x input, row-major), b1, W2 (4 x hidden), b2, fml.
  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return hidden_ * input_dim(); }
  std::size_t w2_offset() const { return b1_offset() + hidden_; }
  std::size_t b2_offset() const { return w2_offset() + kOutputs * hidden_; }
  std::size_t fml_offset() const { return b2_offset() + kOutputs; }

  std::vector<double>& parameters() { return theta_; }
  const std::vector<double>& parameters() const { return theta_; }

  FmlParams fml() const {
    return {theta_[fml_offset()], theta_[fml_offset() + 1], theta_[fml_offset() + 2]};
  }
  void set_fml(const FmlParams& p) {
    theta_[fml_offset()] = p.alpha;
    theta_[fml_offset() + 1] = p.beta;
    theta_[fml_offset() + 2] = p.gamma;
  }

  friend bool operator==(const ToyPredictor&, const ToyPredictor&) = default;

 private:
  std::size_t features_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> theta_;
};

// Forward activations kept for the backward pass.
struct PredictorCache {
  std::vector<double> inputs;   // node-major, input_dim per node
  std::vector<double> hidden;   // node-major, hidden per node
  std::vector<double> outputs;  // node-major, 4 per node (post-logistic)
};

inline std::vector<double> gather_windows(const NodeFeatures& f) {
  const GridShape& s = f.shape;
  const std::size_t in_dim = ToyPredictor::kWindow * f.dim;
  std::vector<double> out(s.node_count() * in_dim, 0.0);
  for (NodeId m = 0; m < s.node_count(); ++m) {
    const Cell c = node_coords(m, s);
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        const long i = static_cast<long>(c.row) + di;
        const long j = static_cast<long>(c.col) + dj;
        if (i < 0 || j < 0 || i >= static_cast<long>(s.rows) || j >= static_cast<long>(s.cols)) {
          continue;
        }
        const NodeId src = node_index(static_cast<std::size_t>(i), static_cast<std::size_t>(j), s);
        const std::size_t slot = static_cast<std::size_t>((di + 1) * 3 + (dj + 1));
        for (std::size_t k = 0; k < f.dim; ++k) {
          out[m * in_dim + slot * f.dim + k] = f.at(src, k);
        }
      }
    }
  }
  return out;
}

inline NodeSignals predict(const ToyPredictor& model, const NodeFeatures& features,
                           PredictorCache* cache = nullptr) {
  if (features.dim != model.features()) {
    throw Error("predict: model expects " + std::to_string(model.features()) +
                " features per node, got " + std::to_string(features.dim));
  }
  const std::size_t n = features.shape.node_count();
  const std::size_t in_dim = model.input_dim();
  const std::size_t hid = model.hidden();
  const auto& th = model.parameters();
  PredictorCache local;
  PredictorCache& c = cache != nullptr ? *cache : local;
  c.inputs = gather_windows(features);
  c.hidden.assign(n * hid, 0.0);
  c.outputs.assign(n * ToyPredictor::kOutputs, 0.0);
  NodeSignals sig(features.shape);
  for (NodeId m = 0; m < n; ++m) {
    const double* x = c.inputs.data() + m * in_dim;
    double* h = c.hidden.data() + m * hid;
    for (std::size_t u = 0; u < hid; ++u) {
      const double* w = th.data() + model.w1_offset() + u * in_dim;
      double a = th[model.b1_offset() + u];
      for (std::size_t k = 0; k < in_dim; ++k) a += w[k] * x[k];
      h[u] = std::tanh(a);
    }
    for (std::size_t o = 0; o < ToyPredictor::kOutputs; ++o) {
      const double* w = th.data() + model.w2_offset() + o * hid;
      double a = th[model.b2_offset() + o];
      for (std::size_t u = 0; u < hid; ++u) a += w[u] * h[u];
      c.outputs[m * ToyPredictor::kOutputs + o] = sigmoid(a);
    }
    sig.presence[m] = c.outputs[m * 4 + 0];
    for (std::size_t k = 0; k < 3; ++k) sig.link[k][m] = c.outputs[m * 4 + 1 + k];
  }
  return sig;
}

// Gradient of the predictor weights given dC/dP and dC/dS per node. The
// flow-mapping slots of the result are left at zero.
inline std::vector<double> predictor_backward(const ToyPredictor& model,
                                              const PredictorCache& cache,
                                              const NodeGrid& g_presence,
                                              const std::array<NodeGrid, 3>& g_link) {
  const std::size_t n = g_presence.size();
  const std::size_t in_dim = model.input_dim();
  const std::size_t hid = model.hidden();
  const auto& th = model.parameters();
  std::vector<double> grad(model.parameter_count(), 0.0);
  std::vector<double> g_hidden(hid);
  for (NodeId m = 0; m < n; ++m) {
    const double* y = cache.outputs.data() + m * ToyPredictor::kOutputs;
    const double* h = cache.hidden.data() + m * hid;
    const double* x = cache.inputs.data() + m * in_dim;
    const std::array<double, 4> g_out = {g_presence[m], g_link[0][m], g_link[1][m], g_link[2][m]};
    std::fill(g_hidden.begin(), g_hidden.end(), 0.0);
    for (std::size_t o = 0; o < ToyPredictor::kOutputs; ++o) {
      const double g_pre = g_out[o] * y[o] * (1.0 - y[o]);
      if (g_pre == 0.0) continue;
      grad[model.b2_offset() + o] += g_pre;
      for (std::size_t u = 0; u < hid; ++u) {
        grad[model.w2_offset() + o * hid + u] += g_pre * h[u];
        g_hidden[u] += g_pre * th[model.w2_offset() + o * hid + u];
      }
    }
    for (std::size_t u = 0; u < hid; ++u) {
      const double g_pre = g_hidden[u] * (1.0 - h[u] * h[u]);
      if (g_pre == 0.0) continue;
      grad[model.b1_offset() + u] += g_pre;
      double* gw = grad.data() + model.w1_offset() + u * in_dim;
      for (std::size_t k = 0; k < in_dim; ++k) gw[k] += g_pre * x[k];
    }
  }
  return grad;
}

struct ObjectLoss {
  double cost = 0.0;  // C_o
  NodeGrid grad;      // dC_o/dP
};

// Mean binary cross-entropy of P against the object mask.
inline ObjectLoss object_loss(const NodeGrid& presence, const ObjectMask& mask) {
  if (presence.size() != mask.foreground.size()) {
    throw Error("object_loss: presence map and object mask differ in size");
  }
  const double n = static_cast<double>(presence.size());
  ObjectLoss out{0.0, NodeGrid(presence.rows(), presence.cols())};
  for (NodeId m = 0; m < presence.size(); ++m) {
    const double p = presence[m];
    if (mask.foreground[m]) {
      out.cost -= std::log(std::max(p, kLogClamp));
      if (p >= kLogClamp) out.grad[m] = -1.0 / (p * n);
    } else {
      out.cost -= std::log(std::max(1.0 - p, kLogClamp));
      if (1.0 - p >= kLogClamp) out.grad[m] = 1.0 / ((1.0 - p) * n);
    }
  }
  out.cost /= n;
  return out;
}

struct LossRecord {
  double object = 0.0;  // C_o
  double flow = 0.0;    // C_f
  double total = 0.0;   // C_o + flow_weight * C_f
};

struct PipelineOptions {
  MclConfig mcl = MclConfig::training();
  GradMode grad_mode = GradMode::exact;
  double flow_weight = 1.0;
  unsigned threads = 1;
};

struct PipelineResult {
  LossRecord loss;
  std::vector<double> grad;  // same layout as ToyPredictor::parameters()
};

// predict -> FML -> M0 -> Markov clustering -> losses, and optionally the
// full gradient back to every predictor parameter.
inline PipelineResult pipeline_loss(const ToyPredictor& model, const SyntheticScene& sample,
                                    const PipelineOptions& opt, bool with_gradient = true) {
  PredictorCache cache;
  const NodeSignals sig = predict(model, sample.features, &cache);
  const FmlParams fml = model.fml();
  const FlowMaps flows = fml_forward(sig, fml, opt.threads);
  const FlowMatrix m0 = build_flow_matrix(flows);
  MclConfig mcl = opt.mcl;
  mcl.threads = opt.threads;
  const MclResult clustered = markov_cluster(m0, mcl, with_gradient);
  const FlowLabel label = build_flow_label(sample.mask);
  const FlowLossResult flow = flow_loss(clustered.matrix, label);
  const ObjectLoss object = object_loss(sig.presence, build_object_mask(sample.mask));

  PipelineResult out;
  out.loss = {object.cost, flow.cost, object.cost + opt.flow_weight * flow.cost};
  if (!with_gradient) return out;

  DenseMatrix g_m0 = mcl_backward_at(*clustered.tape, label, opt.grad_mode,
                                     lattice_support(sig.shape), opt.threads);
  const auto g_flows = flow_maps_gradient(
      sig.shape, [&](NodeId r, NodeId c) { return opt.flow_weight * g_m0(r, c); });
  FmlGradients g_fml = fml_backward(sig, fml, g_flows);
  for (NodeId m = 0; m < g_fml.presence.size(); ++m) g_fml.presence[m] += object.grad[m];
  out.grad = predictor_backward(model, cache, g_fml.presence, g_fml.link);
  out.grad[model.fml_offset()] = g_fml.params.alpha;
  out.grad[model.fml_offset() + 1] = g_fml.params.beta;
  out.grad[model.fml_offset() + 2] = g_fml.params.gamma;
  return out;
}

struct TrainState {
  ToyPredictor model;
  std::vector<double> velocity;
  std::size_t step = 0;
  std::vector<LossRecord> history;

  explicit TrainState(ToyPredictor m = {})
      : model(std::move(m)), velocity(model.parameter_count(), 0.0) {}
};

struct StepOptions {
  PipelineOptions pipeline;
  double lr = 1e-2;
  double momentum = 0.9;
  // Rescales the gradient to at most this L2 norm; 0 disables.
  double clip_norm = 0.0;
};

inline constexpr double kMinFmlScale = 1e-3;

// One SGD-with-momentum step: v <- momentum * v - lr * g, theta <- theta + v.
inline TrainState train_step(TrainState state, const SyntheticScene& sample,
                             const StepOptions& opt) {
  PipelineResult r = pipeline_loss(state.model, sample, opt.pipeline, true);
  if (!std::isfinite(r.loss.total)) {
    throw Error("non-finite loss at step " + std::to_string(state.step));
  }
  if (opt.clip_norm > 0) {
    double norm = 0.0;
    for (double g : r.grad) norm += g * g;
    norm = std::sqrt(norm);
    if (norm > opt.clip_norm) {
      for (double& g : r.grad) g *= opt.clip_norm / norm;
    }
  }
  auto& theta = state.model.parameters();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    if (!std::isfinite(r.grad[k])) {
      throw Error("non-finite gradient at step " + std::to_string(state.step));
    }
    state.velocity[k] = opt.momentum * state.velocity[k] - opt.lr * r.grad[k];
    theta[k] += state.velocity[k];
  }
  FmlParams fml = state.model.fml();
  fml.alpha = std::max(fml.alpha, kMinFmlScale);
  fml.beta = std::max(fml.beta, kMinFmlScale);
  state.model.set_fml(fml);
  state.history.push_back(r.loss);
  ++state.step;
  return state;
}

struct TrainConfig {
  SceneConfig scene;
  std::size_t steps = 3000;
  std::size_t hidden = 24;
  double init_scale = 0.1;
  std::uint64_t seed = 0;
  StepOptions step;
};

struct TrainResult {
  ToyPredictor model;
  std::vector<LossRecord> history;
};

inline SyntheticScene training_scene(const TrainConfig& cfg, std::size_t step) {
  return synth_scene(cfg.scene, derive_seed(cfg.seed, 0, step));
}

inline SyntheticScene held_out_scene(const SceneConfig& scene, std::uint64_t seed, std::size_t k) {
  return synth_scene(scene, derive_seed(seed, 1, k));
}

template <class OnStep>
TrainResult train(const TrainConfig& cfg, OnStep&& on_step) {
  TrainState state(ToyPredictor::random(cfg.scene.feature_dim, cfg.hidden,
                                        derive_seed(cfg.seed, 2, 0), cfg.init_scale));
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    state = train_step(std::move(state), training_scene(cfg, s), cfg.step);
    on_step(state);
  }
  return {std::move(state.model), std::move(state.history)};
}

inline TrainResult train(const TrainConfig& cfg) {
  return train(cfg, [](const TrainState&) {});
}

struct EvalOptions {
  MclConfig mcl = MclConfig::inference();
  ExtractionConfig extraction;
  PcaBoxParams boxes;
  double iou_threshold = 0.5;
  unsigned threads = 1;
};

struct EvalReport {
  DetectionScore detection;
  double node_accuracy = 0.0;
  std::size_t nodes = 0;
  std::size_t failed_scenes = 0;  // clustering raised (all-zero column)
};

// Full inference path on one scene: clusters and boxes.
struct Inference {
  NodeSignals signals;
  FlowMaps flows;
  ClusterAssignment clusters;
  std::vector<Detection> detections;
  std::size_t iterations_run = 0;
};

inline Inference infer(const ToyPredictor& model, const NodeFeatures& features,
                       const EvalOptions& opt) {
  Inference out;
  out.signals = predict(model, features);
  out.flows = fml_forward(out.signals, model.fml(), opt.threads);
  MclConfig mcl = opt.mcl;
  mcl.threads = opt.threads;
  const MclResult r = markov_cluster(build_flow_matrix(out.flows), mcl);
  out.iterations_run = r.iterations_run;
  out.clusters = extract_clusters(r.matrix, &out.signals.presence, opt.extraction);
  out.detections = clusters_to_boxes(out.clusters, features.shape, opt.boxes);
  return out;
}

// A node is correct when its fore/background call matches and, for
// foreground nodes, its cluster attractor equals the labeled attractor.
inline EvalReport evaluate_model(const ToyPredictor& model,
                                 const std::vector<SyntheticScene>& scenes,
                                 const EvalOptions& opt = {}) {
  EvalReport report;
  std::size_t correct = 0;
  for (const SyntheticScene& s : scenes) {
    const std::size_t n = s.scene.shape.node_count();
    report.nodes += n;
    std::vector<RotatedBox> predicted;
    try {
      const Inference inf = infer(model, s.features, opt);
      for (const Detection& d : inf.detections) predicted.push_back(d.box);
      for (NodeId m = 0; m < n; ++m) {
        const bool pred_fg = !inf.clusters.is_background(m);
        const bool gt_fg = s.mask.is_foreground(m);
        if (pred_fg != gt_fg) continue;
        if (!gt_fg || inf.clusters.attractor[m] == s.mask.attractor[m]) ++correct;
      }
    } catch (const ZeroColumnError&) {
      ++report.failed_scenes;
    }
    report.detection += evaluate_detections(predicted, s.scene.boxes, opt.iou_threshold);
  }
  report.detection.finalize();
  report.node_accuracy =
      report.nodes > 0 ? static_cast<double>(correct) / static_cast<double>(report.nodes) : 0.0;
  return report;
}

}  // namespace mcn

#endif  // MCN_TOY_MODEL_HPP_
