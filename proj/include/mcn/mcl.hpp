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

#ifndef MCN_MCL_HPP_
#define MCN_MCL_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcn/common.hpp"
#include "mcn/flow_matrix.hpp"
#include "mcn/grid.hpp"

namespace mcn {

// Raised by inflate when every entry of a column is zero, i.e. every flow
// out of that node was pruned.
class ZeroColumnError : public Error {
 public:
  ZeroColumnError(NodeId column, std::optional<std::size_t> iteration)
      : Error(message(column, iteration)), column_(column), iteration_(iteration) {}

  NodeId column() const { return column_; }
  std::optional<std::size_t> iteration() const { return iteration_; }

 private:
  static std::string message(NodeId column, std::optional<std::size_t> it) {
    std::string out = "all-zero column " + std::to_string(column) + " in inflate";
    if (it) out += " at iteration " + std::to_string(*it);
    return out;
  }

  NodeId column_;
  std::optional<std::size_t> iteration_;
};

struct MclConfig {
  std::size_t max_iters = 8;
  // Entries strictly below this are zeroed. 0.15 at inference, 0 in training.
  double prune_threshold = 0.15;
  double convergence_eps = 1e-6;
  bool early_stop = true;
  bool final_renormalize = true;
  unsigned threads = 1;

  static MclConfig inference() { return {}; }
  static MclConfig training() {
    MclConfig cfg;
    cfg.prune_threshold = 0.0;
    return cfg;
  }

  void validate() const {
    if (max_iters < 1) throw Error("max_iters must be >= 1");
    if (!(prune_threshold >= 0.0 && prune_threshold < 1.0)) {
      throw Error("prune_threshold must lie in [0, 1)");
    }
    if (!(convergence_eps > 0.0)) throw Error("convergence_eps must be > 0");
  }
};

// result = lhs * rhs. Column n of the result mixes the columns of lhs named
// by the nonzeros of rhs's column n.
inline FlowMatrix expand(const FlowMatrix& lhs, const FlowMatrix& rhs,
                         unsigned threads = 1) {
  if (lhs.size() != rhs.size()) {
    throw Error("expand: dimension mismatch (" + std::to_string(lhs.size()) +
                " vs " + std::to_string(rhs.size()) + ")");
  }
  const std::size_t n = lhs.size();
  if (lhs.is_dense()) {
    DenseMatrix out(n, n);
    const DenseMatrix& a = lhs.dense();
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
      for (NodeId c = begin; c < end; ++c) {
        auto dst = out.column(c);
        rhs.for_each_nonzero(c, [&](NodeId k, double w) {
          const auto src = a.column(k);
          for (std::size_t r = 0; r < n; ++r) dst[r] += w * src[r];
        });
      }
    });
    return FlowMatrix::from_dense(std::move(out));
  }

  std::vector<FlowMatrix::Column> cols(n);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> acc(n, 0.0);
    std::vector<char> seen(n, 0);
    std::vector<NodeId> touched;
    for (NodeId c = begin; c < end; ++c) {
      touched.clear();
      rhs.for_each_nonzero(c, [&](NodeId k, double w) {
        const auto rows = lhs.sparse_rows(k);
        const auto vals = lhs.sparse_values(k);
        for (std::size_t e = 0; e < rows.size(); ++e) {
          if (!seen[rows[e]]) {
            seen[rows[e]] = 1;
            touched.push_back(rows[e]);
          }
          acc[rows[e]] += w * vals[e];
        }
      });
      std::sort(touched.begin(), touched.end());
      auto& col = cols[c];
      col.reserve(touched.size());
      for (NodeId r : touched) {
        col.push_back({r, acc[r]});
        acc[r] = 0.0;
        seen[r] = 0;
      }
    }
  });
  FlowMatrix out = FlowMatrix::from_columns(n, std::move(cols));
  out.densify_if_filled();
  return out;
}

// Divides every column by its sum.
inline FlowMatrix inflate(const FlowMatrix& m, unsigned threads = 1) {
  const std::size_t n = m.size();
  if (m.is_dense()) {
    DenseMatrix out = m.dense();
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
      for (NodeId c = begin; c < end; ++c) {
        auto col = out.column(c);
        double s = 0.0;
        for (double v : col) s += v;
        if (!(s > 0.0)) throw ZeroColumnError(c, std::nullopt);
        for (double& v : col) v /= s;
      }
    });
    return FlowMatrix::from_dense(std::move(out));
  }
  std::vector<FlowMatrix::Column> cols(n);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (NodeId c = begin; c < end; ++c) {
      const double s = m.column_sum(c);
      if (!(s > 0.0)) throw ZeroColumnError(c, std::nullopt);
      m.for_each_nonzero(c, [&](NodeId r, double v) { cols[c].push_back({r, v / s}); });
    }
  });
  return FlowMatrix::from_columns(n, std::move(cols));
}

// Zeroes entries strictly below `threshold`.
inline FlowMatrix prune(const FlowMatrix& m, double threshold,
                        unsigned threads = 1) {
  if (threshold < 0.0) throw Error("prune threshold must be >= 0");
  const std::size_t n = m.size();
  if (m.is_dense()) {
    DenseMatrix out = m.dense();
    for (double& v : out.data()) {
      if (v < threshold) v = 0.0;
    }
    return FlowMatrix::from_dense(std::move(out));
  }
  std::vector<FlowMatrix::Column> cols(n);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (NodeId c = begin; c < end; ++c) {
      m.for_each_nonzero(c, [&](NodeId r, double v) {
        if (!(v < threshold)) cols[c].push_back({r, v});
      });
    }
  });
  return FlowMatrix::from_columns(n, std::move(cols));
}

struct MclStep {
  FlowMatrix expanded;  // M_t = M_{t-1}^P * M0
  FlowMatrix inflated;  // M_t^I
  FlowMatrix pruned;    // M_t^P
};

// Everything the backward pass needs to replay one forward run.
struct MclTape {
  FlowMatrix initial;  // M0, also the first left operand
  std::vector<MclStep> steps;
  double prune_threshold = 0.0;
  bool final_renormalize = true;
};

struct MclResult {
  FlowMatrix matrix;  // M_N
  std::optional<MclTape> tape;
  std::size_t iterations_run = 0;
};

// Expand, inflate and prune for up to cfg.max_iters iterations.
inline MclResult markov_cluster(const FlowMatrix& m0, const MclConfig& cfg,
                                bool record_tape = false) {
  cfg.validate();
  MclResult result;
  if (record_tape) {
    result.tape.emplace();
    result.tape->initial = m0;
    result.tape->prune_threshold = cfg.prune_threshold;
    result.tape->final_renormalize = cfg.final_renormalize;
  }
  FlowMatrix current = m0;
  for (std::size_t t = 1; t <= cfg.max_iters; ++t) {
    FlowMatrix expanded = expand(current, m0, cfg.threads);
    FlowMatrix inflated;
    try {
      inflated = inflate(expanded, cfg.threads);
    } catch (const ZeroColumnError& e) {
      throw ZeroColumnError(e.column(), t);
    }
    FlowMatrix pruned = prune(inflated, cfg.prune_threshold, cfg.threads);
    const bool converged =
        cfg.early_stop && max_abs_diff(pruned, current) < cfg.convergence_eps;
    result.iterations_run = t;
    if (record_tape) {
      result.tape->steps.push_back({std::move(expanded), std::move(inflated), pruned});
    }
    current = std::move(pruned);
    if (converged) break;
  }
  if (cfg.final_renormalize) {
    try {
      current = inflate(current, cfg.threads);
    } catch (const ZeroColumnError& e) {
      throw ZeroColumnError(e.column(), result.iterations_run);
    }
  }
  result.matrix = std::move(current);
  return result;
}

struct ExtractionConfig {
  double fg_cutoff = 0.5;
  std::size_t min_cluster_size = 1;
};

struct ClusterAssignment {
  std::vector<NodeId> attractor;  // argmax row of every column
  std::map<NodeId, std::vector<NodeId>> clusters;  // foreground only
  std::vector<NodeId> background;

  bool is_background(NodeId m) const {
    return std::binary_search(background.begin(), background.end(), m);
  }

  friend bool operator==(const ClusterAssignment&, const ClusterAssignment&) = default;
};

// Argmax of every column (ties to the lowest row; an empty column points at
// itself), grouped by attractor. A group is background when it is a lone
// self-attracted node, when its mean foreground probability is below the
// cutoff, or when it is smaller than min_cluster_size.
inline ClusterAssignment extract_clusters(const FlowMatrix& mn,
                                          const NodeGrid* fg_prob = nullptr,
                                          const ExtractionConfig& cfg = {}) {
  const std::size_t n = mn.size();
  if (fg_prob != nullptr && fg_prob->size() != n) {
    throw Error("extract_clusters: foreground grid has " +
                std::to_string(fg_prob->size()) + " nodes, matrix has " +
                std::to_string(n));
  }
  ClusterAssignment out;
  out.attractor.resize(n);
  std::map<NodeId, std::vector<NodeId>> groups;
  for (NodeId c = 0; c < n; ++c) {
    NodeId best = c;
    double best_value = 0.0;
    bool any = false;
    mn.for_each_nonzero(c, [&](NodeId r, double v) {
      if (!any || v > best_value) {
        best = r;
        best_value = v;
        any = true;
      }
    });
    out.attractor[c] = best;
    groups[best].push_back(c);
  }
  for (auto& [attr, members] : groups) {
    bool background = members.size() == 1 && members.front() == attr;
    if (!background && fg_prob != nullptr) {
      double mean = 0.0;
      for (NodeId m : members) mean += (*fg_prob)[m];
      mean /= static_cast<double>(members.size());
      background = mean < cfg.fg_cutoff;
    }
    background = background || members.size() < cfg.min_cluster_size;
    if (background) {
      out.background.insert(out.background.end(), members.begin(), members.end());
    } else {
      out.clusters.emplace(attr, std::move(members));
    }
  }
  std::sort(out.background.begin(), out.background.end());
  return out;
}

}  // namespace mcn

#endif  // MCN_MCL_HPP_
