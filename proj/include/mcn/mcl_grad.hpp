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

#ifndef MCN_MCL_GRAD_HPP_
#define MCN_MCL_GRAD_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcn/common.hpp"
#include "mcn/flow_label.hpp"
#include "mcn/flow_matrix.hpp"
#include "mcn/mcl.hpp"

namespace mcn {

// Probabilities are clamped here before the log; below the clamp the loss
// is treated as constant.
inline constexpr double kLogClamp = 1e-12;

enum class GradMode {
  approx,  // inflate treated as identity, prune as a 0/1 mask
  exact,   // true column-normalization Jacobian
};

struct FlowLossResult {
  double cost = 0.0;   // C_f, mean over nodes
  NodeGrid per_node;   // L_f
};

inline void check_label(const FlowMatrix& m, const FlowLabel& label) {
  if (m.size() != label.size() || label.shape.node_count() != label.size()) {
    throw Error("flow label covers " + std::to_string(label.size()) +
                " nodes but the matrix has " + std::to_string(m.size()));
  }
  for (NodeId a : label.attractor) {
    if (a >= m.size()) throw Error("flow label attractor out of range");
  }
}

// Cross-entropy between each column of M_N and its one-hot target.
inline FlowLossResult flow_loss(const FlowMatrix& mn, const FlowLabel& label) {
  check_label(mn, label);
  FlowLossResult out{0.0, NodeGrid(label.shape)};
  for (NodeId m = 0; m < label.size(); ++m) {
    const double p = std::max(mn(label.attractor[m], m), kLogClamp);
    out.per_node[m] = -std::log(p);
    out.cost += out.per_node[m];
  }
  out.cost /= static_cast<double>(label.size());
  return out;
}

namespace detail {

// Turns dC/dy into dC/dx in place for y = x / colsum(x), column by column.
inline void inflate_backward(const DenseMatrix& input, DenseMatrix& grad,
                             unsigned threads) {
  parallel_for(input.cols(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      const auto x = input.column(c);
      auto g = grad.column(c);
      double s = 0.0;
      double dot = 0.0;
      for (std::size_t r = 0; r < x.size(); ++r) {
        s += x[r];
        dot += g[r] * x[r];
      }
      if (!(s > 0.0)) continue;
      const double shift = dot / (s * s);
      for (std::size_t r = 0; r < x.size(); ++r) g[r] = g[r] / s - shift;
    }
  });
}

// g * M0^T, the gradient reaching the left operand of an expansion.
inline DenseMatrix times_transpose(const DenseMatrix& g, const FlowMatrix& m0,
                                   unsigned threads) {
  const std::size_t n = g.rows();
  DenseMatrix out(n, n);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (NodeId c = 0; c < n; ++c) {
      const auto src = g.column(c);
      m0.for_each_nonzero(c, [&](NodeId k, double w) {
        auto dst = out.column(k);
        for (std::size_t r = begin; r < end; ++r) dst[r] += w * src[r];
      });
    }
  });
  return out;
}

// Accumulates dC/dM0 either everywhere or only at requested positions.
class GradientSink {
 public:
  explicit GradientSink(std::size_t n, unsigned threads)
      : grad_(n, n), threads_(threads) {}
  GradientSink(std::size_t n, std::vector<std::pair<NodeId, NodeId>> positions,
               unsigned threads)
      : grad_(n, n), positions_(std::move(positions)), restricted_(true),
        threads_(threads) {}

  // Contribution of one expansion E = left * M0: left^T * gE.
  void add_expand(const DenseMatrix& left, const DenseMatrix& g_expanded) {
    const std::size_t n = left.rows();
    if (restricted_) {
      for (const auto& [k, c] : positions_) {
        const auto a = left.column(k);
        const auto b = g_expanded.column(c);
        double dot = 0.0;
        for (std::size_t r = 0; r < n; ++r) dot += a[r] * b[r];
        grad_(k, c) += dot;
      }
      return;
    }
    parallel_for(n, threads_, [&](std::size_t begin, std::size_t end) {
      for (std::size_t c = begin; c < end; ++c) {
        const auto b = g_expanded.column(c);
        for (std::size_t k = 0; k < n; ++k) {
          const auto a = left.column(k);
          double dot = 0.0;
          for (std::size_t r = 0; r < n; ++r) dot += a[r] * b[r];
          grad_(k, c) += dot;
        }
      }
    });
  }

  // M0 also enters as the first left operand.
  void add_direct(const DenseMatrix& g) {
    if (restricted_) {
      for (const auto& [k, c] : positions_) grad_(k, c) += g(k, c);
      return;
    }
    grad_ += g;
  }

  DenseMatrix take() { return std::move(grad_); }

 private:
  DenseMatrix grad_;
  std::vector<std::pair<NodeId, NodeId>> positions_;
  bool restricted_ = false;
  unsigned threads_ = 1;
};

// dC_f / dM_N for the clamped cross-entropy.
inline DenseMatrix flow_loss_gradient(const DenseMatrix& mn, const FlowLabel& label) {
  const std::size_t n = label.size();
  DenseMatrix g(n, n);
  const double scale = 1.0 / static_cast<double>(n);
  for (NodeId m = 0; m < n; ++m) {
    const NodeId a = label.attractor[m];
    const double p = mn(a, m);
    if (p >= kLogClamp) g(a, m) = -scale / p;
  }
  return g;
}

inline void run_backward(const MclTape& tape, const FlowLabel& label,
                         GradMode mode, GradientSink& sink, unsigned threads) {
  if (tape.steps.empty()) throw Error("mcl_backward: tape has no iterations");
  check_label(tape.initial, label);
  const FlowMatrix& m0 = tape.initial;

  // Rebuild M_N from the last pruned iterate.
  const DenseMatrix last = tape.steps.back().pruned.to_dense();
  DenseMatrix output = last;
  if (tape.final_renormalize) {
    output = inflate(FlowMatrix::from_dense(last), threads).dense();
  }
  DenseMatrix g = flow_loss_gradient(output, label);
  if (tape.final_renormalize && mode == GradMode::exact) {
    inflate_backward(last, g, threads);
  }

  for (std::size_t t = tape.steps.size(); t >= 1; --t) {
    const MclStep& step = tape.steps[t - 1];
    const DenseMatrix inflated = step.inflated.to_dense();
    // Prune passes gradient where the forward kept a positive entry.
    for (std::size_t k = 0; k < g.data().size(); ++k) {
      const double x = inflated.data()[k];
      if (!(x > 0.0 && x >= tape.prune_threshold)) g.data()[k] = 0.0;
    }
    if (mode == GradMode::exact) {
      inflate_backward(step.expanded.to_dense(), g, threads);
    }
    const DenseMatrix left =
        t == 1 ? m0.to_dense() : tape.steps[t - 2].pruned.to_dense();
    sink.add_expand(left, g);
    g = times_transpose(g, m0, threads);
  }
  sink.add_direct(g);
}

}  // namespace detail

// dC_f/dM0 over every entry of M0, accumulated over all executed iterations
// plus M0's role as the first left operand.
inline DenseMatrix mcl_backward(const MclTape& tape, const FlowLabel& label,
                                GradMode mode, unsigned threads = 1) {
  detail::GradientSink sink(tape.initial.size(), threads);
  detail::run_backward(tape, label, mode, sink, threads);
  return sink.take();
}

// Same gradient evaluated only at `positions`; all other entries are left
// at zero. This is what training uses, with the lattice support.
inline DenseMatrix mcl_backward_at(const MclTape& tape, const FlowLabel& label,
                                   GradMode mode,
                                   std::vector<std::pair<NodeId, NodeId>> positions,
                                   unsigned threads = 1) {
  detail::GradientSink sink(tape.initial.size(), std::move(positions), threads);
  detail::run_backward(tape, label, mode, sink, threads);
  return sink.take();
}

inline double flow_cost(const FlowMatrix& m0, const FlowLabel& label,
                        const MclConfig& cfg) {
  return flow_loss(markov_cluster(m0, cfg).matrix, label).cost;
}

// Central differences of C_f with respect to each stored entry of M0.
// Positions outside M0's sparsity pattern are left at zero.
inline DenseMatrix finite_diff_grad(const FlowMatrix& m0, const FlowLabel& label,
                                    const MclConfig& cfg, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw Error("finite_diff_grad: eps must lie in [1e-7, 1e-3]");
  }
  check_label(m0, label);
  const std::size_t n = m0.size();
  std::vector<FlowMatrix::Column> base(n);
  for (NodeId c = 0; c < n; ++c) {
    m0.for_each_nonzero(c, [&](NodeId r, double v) { base[c].push_back({r, v}); });
  }
  DenseMatrix out(n, n);
  for (NodeId c = 0; c < n; ++c) {
    for (std::size_t e = 0; e < base[c].size(); ++e) {
      auto plus = base;
      auto minus = base;
      plus[c][e].value += eps;
      minus[c][e].value -= eps;
      const double up = flow_cost(FlowMatrix::from_columns(n, std::move(plus)), label, cfg);
      const double down = flow_cost(FlowMatrix::from_columns(n, std::move(minus)), label, cfg);
      out(base[c][e].row, c) = (up - down) / (2.0 * eps);
    }
  }
  return out;
}

}  // namespace mcn

#endif  // MCN_MCL_GRAD_HPP_
