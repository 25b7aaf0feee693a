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

// Shared generators and brute-force reference implementations for tests.

#ifndef MCN_TESTS_SUPPORT_HPP_
#define MCN_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mcn/flow_maps.hpp"
#include "mcn/flow_matrix.hpp"
#include "mcn/fml.hpp"
#include "mcn/grid.hpp"
#include "mcn/labeling.hpp"
#include "mcn/mcl.hpp"
#include "mcn/mcl_grad.hpp"
#include "mcn/toy_model.hpp"

namespace mcn::testing {

using Dense = std::vector<std::vector<double>>;  // [row][col]

inline Dense dense_zeros(std::size_t n) { return Dense(n, std::vector<double>(n, 0.0)); }

inline Dense to_rows(const FlowMatrix& m) {
  Dense out = dense_zeros(m.size());
  for (NodeId r = 0; r < m.size(); ++r) {
    for (NodeId c = 0; c < m.size(); ++c) out[r][c] = m(r, c);
  }
  return out;
}

inline FlowMatrix from_rows(const Dense& d) {
  const std::size_t n = d.size();
  std::vector<FlowMatrix::Column> cols(n);
  for (NodeId c = 0; c < n; ++c) {
    for (NodeId r = 0; r < n; ++r) {
      if (d[r][c] != 0.0) cols[c].push_back({r, d[r][c]});
    }
  }
  return FlowMatrix::from_columns(n, std::move(cols));
}

inline Dense matmul(const Dense& a, const Dense& b) {
  const std::size_t n = a.size();
  Dense out = dense_zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += a[i][k] * b[k][j];
      out[i][j] = s;
    }
  }
  return out;
}

inline Dense normalize_columns(Dense m) {
  const std::size_t n = m.size();
  for (std::size_t c = 0; c < n; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += m[r][c];
    for (std::size_t r = 0; r < n; ++r) m[r][c] /= s;
  }
  return m;
}

inline double max_diff(const Dense& a, const Dense& b) {
  double out = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < a.size(); ++c) out = std::max(out, std::abs(a[r][c] - b[r][c]));
  }
  return out;
}

// Straight-line clustering loop on dense rows, no early stop.
inline Dense reference_cluster(const Dense& m0, std::size_t iters, double threshold,
                               bool renormalize) {
  Dense p = m0;
  for (std::size_t t = 0; t < iters; ++t) {
    p = normalize_columns(matmul(p, m0));
    for (auto& row : p) {
      for (double& v : row) {
        if (v < threshold) v = 0.0;
      }
    }
  }
  return renormalize ? normalize_columns(p) : p;
}

// M0 assembled entry by entry from the definition, independent of
// build_flow_matrix.
inline Dense reference_flow_matrix(const FlowMaps& fm) {
  const GridShape& s = fm.shape;
  Dense out = dense_zeros(s.node_count());
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t j = 0; j < s.cols; ++j) {
      const std::size_t n = i + s.rows * j;
      out[n][n] += fm.flow[0][n];
      if (i + 1 < s.rows) out[n + 1][n] += fm.flow[1][n]; else out[n][n] += fm.flow[1][n];
      if (j + 1 < s.cols) out[n + s.rows][n] += fm.flow[2][n]; else out[n][n] += fm.flow[2][n];
      if (j > 0) out[n - s.rows][n] += fm.flow[3][n]; else out[n][n] += fm.flow[3][n];
    }
  }
  return out;
}

inline FlowMaps random_flow_maps(const GridShape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution sparse(0.2);
  FlowMaps fm(shape);
  for (NodeId m = 0; m < shape.node_count(); ++m) {
    std::array<double, 4> w{};
    double sum = 0.0;
    for (double& x : w) {
      x = sparse(rng) ? 0.0 : u(rng);
      sum += x;
    }
    if (sum == 0.0) {
      w = {1.0, 0.0, 0.0, 0.0};
      sum = 1.0;
    }
    for (std::size_t k = 0; k < 4; ++k) fm.flow[k][m] = w[k] / sum;
  }
  return fm;
}

inline NodeSignals random_signals(const GridShape& shape, std::mt19937_64& rng,
                                  double lo = 0.02, double hi = 0.98) {
  std::uniform_real_distribution<double> u(lo, hi);
  NodeSignals sig(shape);
  for (NodeId m = 0; m < shape.node_count(); ++m) {
    sig.presence[m] = u(rng);
    for (auto& l : sig.link) l[m] = u(rng);
  }
  return sig;
}

inline GridShape random_shape(std::mt19937_64& rng, std::size_t max_side) {
  std::uniform_int_distribution<std::size_t> side(1, max_side);
  return {side(rng), side(rng), 16, 8.0};
}

// Scenes small enough for a 4x4 lattice.
inline SceneConfig tiny_scene_config(std::size_t rows = 4, std::size_t cols = 4) {
  SceneConfig cfg;
  cfg.shape = {rows, cols, 16, 8.0};
  cfg.min_boxes = 1;
  cfg.max_boxes = 1;
  cfg.min_length = 2;
  cfg.max_length = 3;
  cfg.min_height = 1;
  cfg.max_height = 2;
  cfg.min_gap = 1;
  return cfg;
}

// Relative difference with a floor so tiny values are compared absolutely.
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Entrywise comparison over M0's support: relative error where the numeric
// gradient is at least 1e-3 in magnitude, absolute error below that.
struct GradientAgreement {
  double max_rel = 0.0;
  double max_abs_small = 0.0;
  bool within(double rel_tol, double abs_tol) const {
    return max_rel < rel_tol && max_abs_small < abs_tol;
  }
};

inline GradientAgreement compare_on_support(const FlowMatrix& m0, const DenseMatrix& analytic,
                                            const DenseMatrix& numeric) {
  GradientAgreement out;
  for (NodeId c = 0; c < m0.size(); ++c) {
    m0.for_each_nonzero(c, [&](NodeId r, double) {
      const double a = analytic(r, c), n = numeric(r, c);
      if (std::abs(n) < 1e-3) {
        out.max_abs_small = std::max(out.max_abs_small, std::abs(a - n));
      } else {
        out.max_rel = std::max(out.max_rel, std::abs(a - n) / std::abs(n));
      }
    });
  }
  return out;
}

// Random flow instance on a small lattice with a routable label.
struct GradInstance {
  FlowMatrix m0;
  FlowLabel label;
};

inline GradInstance random_grad_instance(std::uint64_t seed, std::size_t rows = 4,
                                         std::size_t cols = 4) {
  const SyntheticScene scene = synth_scene(tiny_scene_config(rows, cols), seed);
  std::mt19937_64 rng(seed ^ 0x5eedull);
  const NodeSignals sig = random_signals(scene.scene.shape, rng, 0.05, 0.95);
  return {build_flow_matrix(fml_forward(sig, {})), build_flow_label(scene.mask)};
}

// Step against the approximate gradient on M0's support, project back to
// column-stochastic, and check the loss did not rise.
inline bool approx_step_descends(const GradInstance& inst, const MclConfig& cfg, double eta) {
  const MclResult r = markov_cluster(inst.m0, cfg, true);
  const DenseMatrix g = mcl_backward(*r.tape, inst.label, GradMode::approx);
  const std::size_t n = inst.m0.size();
  std::vector<FlowMatrix::Column> cols(n);
  for (NodeId c = 0; c < n; ++c) {
    double sum = 0.0;
    inst.m0.for_each_nonzero(c, [&](NodeId row, double v) {
      const double next = std::max(0.0, v - eta * g(row, c));
      cols[c].push_back({row, next});
      sum += next;
    });
    for (auto& e : cols[c]) e.value /= sum;
  }
  const double before = flow_loss(r.matrix, inst.label).cost;
  const double after = flow_cost(FlowMatrix::from_columns(n, std::move(cols)), inst.label, cfg);
  return after <= before + 1e-15;
}

}  // namespace mcn::testing

#endif  // MCN_TESTS_SUPPORT_HPP_
