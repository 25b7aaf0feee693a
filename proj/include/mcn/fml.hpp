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

#ifndef MCN_FML_HPP_
#define MCN_FML_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "mcn/common.hpp"
#include "mcn/flow_maps.hpp"
#include "mcn/grid.hpp"

namespace mcn {

// Trainable parameters of the flow mapping layer. mu(x) is a logistic
// on-off gate with slope beta centered at gamma; alpha scales the
// correlation energy in the self-loop exponent.
struct FmlParams {
  double alpha = 1.0;
  double beta = 10.0;
  double gamma = 0.5;

  void validate() const {
    if (!(std::isfinite(alpha) && alpha > 0.0 && std::isfinite(beta) &&
          beta > 0.0 && std::isfinite(gamma))) {
      throw Error("FML parameters require finite alpha > 0, beta > 0, gamma");
    }
  }

  friend bool operator==(const FmlParams&, const FmlParams&) = default;
};

// Objectness P and link scores S1..S3 (bottom, right, left) per node.
struct NodeSignals {
  GridShape shape;
  NodeGrid presence;
  std::array<NodeGrid, 3> link;

  NodeSignals() = default;
  explicit NodeSignals(const GridShape& s, double fill = 0.5)
      : shape(s), presence(s, fill), link{NodeGrid(s, fill), NodeGrid(s, fill), NodeGrid(s, fill)} {}
};

inline constexpr double kSignalClamp = 1e-6;
inline constexpr double kSingularLinkSum = 1e-9;

inline double mu(double x, const FmlParams& p) {
  return 1.0 / (1.0 + std::exp(-p.beta * (x - p.gamma)));
}

inline double clamp_signal(double v) {
  return std::clamp(v, kSignalClamp, 1.0 - kSignalClamp);
}

// Flows (f0, f1, f2, f3) of a single node.
inline std::array<double, 4> fml_node(double presence, const std::array<double, 3>& link,
                                      const FmlParams& params) {
  if (link[0] + link[1] + link[2] < kSingularLinkSum) return {1.0, 0.0, 0.0, 0.0};
  const double p = clamp_signal(presence);
  const std::array<double, 3> s = {clamp_signal(link[0]), clamp_signal(link[1]),
                                   clamp_signal(link[2])};
  const double energy = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
  const double sum = s[0] + s[1] + s[2];
  const double f0 = std::exp(-params.alpha * (1.0 - mu(1.0 - p, params)) * energy);
  return {f0, (1.0 - f0) * s[0] / sum, (1.0 - f0) * s[1] / sum, (1.0 - f0) * s[2] / sum};
}

struct FmlNodeGradient {
  double presence = 0.0;
  std::array<double, 3> link{};
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

// Chain rule through fml_node for upstream dC/df. Inputs that were clamped
// receive no gradient.
inline FmlNodeGradient fml_node_backward(double presence,
                                         const std::array<double, 3>& link,
                                         const FmlParams& params,
                                         const std::array<double, 4>& upstream) {
  FmlNodeGradient g;
  if (link[0] + link[1] + link[2] < kSingularLinkSum) return g;
  const double p = clamp_signal(presence);
  const std::array<double, 3> s = {clamp_signal(link[0]), clamp_signal(link[1]),
                                   clamp_signal(link[2])};
  const double energy = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
  const double sum = s[0] + s[1] + s[2];
  const double u = 1.0 - p;
  const double gate = mu(u, params);
  const double off = 1.0 - gate;
  const double f0 = std::exp(-params.alpha * off * energy);

  // f_k = (1 - f0) r_k with r_k = s_k / sum.
  double through_ratio = 0.0;
  for (std::size_t k = 0; k < 3; ++k) through_ratio += upstream[k + 1] * s[k];
  through_ratio /= sum;
  const double g_f0 = upstream[0] - through_ratio;
  const double g_z = -f0 * g_f0;  // f0 = exp(-z), z = alpha * off * energy
  const double dgate = gate * (1.0 - gate);

  for (std::size_t k = 0; k < 3; ++k) {
    const double via_ratio = (1.0 - f0) * (upstream[k + 1] - through_ratio) / sum;
    const double via_energy = g_z * params.alpha * off * 2.0 * s[k];
    const bool clamped = link[k] != s[k];
    g.link[k] = clamped ? 0.0 : via_ratio + via_energy;
  }
  const double g_off = g_z * params.alpha * energy;  // dz/d(off)
  const double g_gate = -g_off;
  g.presence = presence != p ? 0.0 : -g_gate * params.beta * dgate;
  g.alpha = g_z * off * energy;
  g.beta = g_gate * (u - params.gamma) * dgate;
  g.gamma = -g_gate * params.beta * dgate;
  return g;
}

inline void check_signals(const NodeSignals& sig) {
  sig.shape.validate();
  auto check = [&](const NodeGrid& g) {
    if (g.rows() != sig.shape.rows || g.cols() != sig.shape.cols) {
      throw Error("signal plane shape does not match grid");
    }
  };
  check(sig.presence);
  for (const NodeGrid& g : sig.link) check(g);
}

inline FlowMaps fml_forward(const NodeSignals& sig, const FmlParams& params,
                            unsigned threads = 1) {
  check_signals(sig);
  params.validate();
  FlowMaps out(sig.shape);
  parallel_for(sig.shape.node_count(), threads, [&](std::size_t begin, std::size_t end) {
    for (NodeId m = begin; m < end; ++m) {
      const auto f = fml_node(sig.presence[m], {sig.link[0][m], sig.link[1][m], sig.link[2][m]},
                              params);
      for (std::size_t k = 0; k < 4; ++k) out.flow[k][m] = f[k];
    }
  });
  return out;
}

struct FmlGradients {
  NodeGrid presence;
  std::array<NodeGrid, 3> link;
  FmlParams params{0.0, 0.0, 0.0};  // summed over nodes
};

inline FmlGradients fml_backward(const NodeSignals& sig, const FmlParams& params,
                                 const std::array<NodeGrid, 4>& upstream) {
  check_signals(sig);
  for (const NodeGrid& g : upstream) {
    if (g.rows() != sig.shape.rows || g.cols() != sig.shape.cols) {
      throw Error("fml_backward: upstream gradient shape does not match grid");
    }
  }
  FmlGradients out{NodeGrid(sig.shape),
                   {NodeGrid(sig.shape), NodeGrid(sig.shape), NodeGrid(sig.shape)},
                   {0.0, 0.0, 0.0}};
  for (NodeId m = 0; m < sig.shape.node_count(); ++m) {
    const auto g = fml_node_backward(
        sig.presence[m], {sig.link[0][m], sig.link[1][m], sig.link[2][m]}, params,
        {upstream[0][m], upstream[1][m], upstream[2][m], upstream[3][m]});
    out.presence[m] = g.presence;
    for (std::size_t k = 0; k < 3; ++k) out.link[k][m] = g.link[k];
    out.params.alpha += g.alpha;
    out.params.beta += g.beta;
    out.params.gamma += g.gamma;
  }
  return out;
}

}  // namespace mcn

#endif  // MCN_FML_HPP_
