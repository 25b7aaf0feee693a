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

#ifndef MCN_FLOW_MAPS_HPP_
#define MCN_FLOW_MAPS_HPP_

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mcn/grid.hpp"

namespace mcn {

// Per-node outgoing flows: f0 (self-loop), f1 (bottom), f2 (right), f3 (left).
struct FlowMaps {
  GridShape shape;
  std::array<NodeGrid, 4> flow;

  FlowMaps() = default;
  explicit FlowMaps(const GridShape& s)
      : shape(s), flow{NodeGrid(s), NodeGrid(s), NodeGrid(s), NodeGrid(s)} {}

  NodeGrid& operator[](Direction d) { return flow[static_cast<std::size_t>(d)]; }
  const NodeGrid& operator[](Direction d) const {
    return flow[static_cast<std::size_t>(d)];
  }
  double& at(NodeId m, Direction d) { return (*this)[d][m]; }
  double at(NodeId m, Direction d) const { return (*this)[d][m]; }
};

struct FlowIssue {
  NodeId node = 0;
  double sum_deviation = 0.0;  // |f0+f1+f2+f3 - 1|
  double min_entry = 0.0;
};

struct FlowValidation {
  bool passed = true;
  double max_sum_deviation = 0.0;
  double min_entry = std::numeric_limits<double>::infinity();
  std::vector<FlowIssue> issues;

  std::string describe() const {
    if (passed) return "flow maps valid";
    std::string out = std::to_string(issues.size()) + " invalid node(s)";
    if (!issues.empty()) {
      const FlowIssue& first = issues.front();
      out += "; first: node " + std::to_string(first.node) +
             " sum deviation " + std::to_string(first.sum_deviation) +
             " min entry " + std::to_string(first.min_entry);
    }
    return out;
  }
};

inline constexpr double kFlowSumTolerance = 1e-6;

inline FlowValidation validate_flow_maps(const FlowMaps& fm,
                                         double tolerance = kFlowSumTolerance) {
  fm.shape.validate();
  for (const NodeGrid& plane : fm.flow) {
    if (plane.rows() != fm.shape.rows || plane.cols() != fm.shape.cols) {
      throw Error("flow plane shape " + std::to_string(plane.rows()) + "x" +
                  std::to_string(plane.cols()) + " does not match grid " +
                  std::to_string(fm.shape.rows) + "x" +
                  std::to_string(fm.shape.cols));
    }
  }
  FlowValidation report;
  for (NodeId m = 0; m < fm.shape.node_count(); ++m) {
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    bool finite = true;
    for (const NodeGrid& plane : fm.flow) {
      sum += plane[m];
      lo = std::min(lo, plane[m]);
      finite = finite && std::isfinite(plane[m]);
    }
    const double dev = finite ? std::abs(sum - 1.0)
                              : std::numeric_limits<double>::infinity();
    report.max_sum_deviation = std::max(report.max_sum_deviation, dev);
    report.min_entry = std::min(report.min_entry, lo);
    if (dev > tolerance || lo < 0.0 || !finite) {
      report.passed = false;
      report.issues.push_back({m, dev, lo});
    }
  }
  return report;
}

}  // namespace mcn

#endif  // MCN_FLOW_MAPS_HPP_
