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

#ifndef MCN_LABELING_HPP_
#define MCN_LABELING_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "mcn/common.hpp"
#include "mcn/flow_label.hpp"
#include "mcn/flow_maps.hpp"
#include "mcn/geometry.hpp"
#include "mcn/grid.hpp"

namespace mcn {

inline Point2 node_center(NodeId m, const GridShape& shape) {
  const Cell c = node_coords(m, shape);
  const double u = static_cast<double>(shape.stride);
  return {static_cast<double>(c.col) * u + shape.offset,
          static_cast<double>(c.row) * u + shape.offset};
}

// Nodes whose image-space centers lie inside the box, ascending.
inline std::vector<NodeId> nodes_in_box(const RotatedBox& box, const GridShape& shape) {
  std::vector<NodeId> out;
  for (NodeId m = 0; m < shape.node_count(); ++m) {
    if (box.contains(node_center(m, shape))) out.push_back(m);
  }
  return out;
}

struct AttractorPlacement {
  NodeId attractor = 0;
  RotatedBox adjusted;
};

// Column of the lattice node nearest to pixel x; ties go to the lower column.
inline std::size_t nearest_column(double x, const GridShape& shape) {
  const double t = (x - shape.offset) / static_cast<double>(shape.stride);
  const double j = std::ceil(t - 0.5);
  return static_cast<std::size_t>(
      std::clamp(j, 0.0, static_cast<double>(shape.cols - 1)));
}

// The attractor sits on the bottom-most row occupied by the box, in the
// column nearest to the point where the major axis meets the lower short
// side. When both short sides are equally low (horizontal boxes) that point
// is taken midway, i.e. at the box center's x. If the chosen node falls
// outside the box, the box grows about its center along its own axes just
// enough to contain it.
inline AttractorPlacement locate_attractor(const RotatedBox& box, const GridShape& shape) {
  const RotatedBox b = box.normalized();
  const std::vector<NodeId> nodes = nodes_in_box(b, shape);
  if (nodes.empty()) {
    throw Error("box at (" + std::to_string(box.cx) + ", " + std::to_string(box.cy) +
                ") contains no lattice node; too small for stride " +
                std::to_string(shape.stride));
  }
  const Point2 half = b.major_axis() * (b.w / 2);
  const Point2 end_a = b.center() + half;
  const Point2 end_b = b.center() - half;
  double dx = b.cx;
  if (std::abs(end_a.y - end_b.y) > 1e-6) dx = end_a.y > end_b.y ? end_a.x : end_b.x;

  std::size_t bottom = 0;
  for (NodeId m : nodes) bottom = std::max(bottom, node_coords(m, shape).row);
  const NodeId attractor = node_index(bottom, nearest_column(dx, shape), shape);

  AttractorPlacement out{attractor, box};
  const Point2 p = node_center(attractor, shape);
  if (!b.contains(p)) {
    const Point2 d = p - b.center();
    RotatedBox grown = b;
    grown.w = std::max(b.w, 2 * std::abs(dot(d, b.major_axis())));
    grown.h = std::max(b.h, 2 * std::abs(dot(d, b.minor_axis())));
    out.adjusted = grown.normalized();
  }
  return out;
}

// Per-node attractor index. Background nodes point at themselves.
struct AttractorMask {
  GridShape shape;
  std::vector<NodeId> attractor;
  std::vector<int> owner;                  // box index per node, -1 for background
  std::vector<RotatedBox> adjusted_boxes;  // one per input box
  std::vector<NodeId> box_attractors;      // one per input box

  bool is_foreground(NodeId m) const { return owner[m] >= 0; }
};

inline AttractorMask build_attractor_mask(const std::vector<RotatedBox>& boxes,
                                          const GridShape& shape) {
  shape.validate();
  AttractorMask mask;
  mask.shape = shape;
  mask.attractor.resize(shape.node_count());
  for (NodeId m = 0; m < shape.node_count(); ++m) mask.attractor[m] = m;
  mask.owner.assign(shape.node_count(), -1);
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const AttractorPlacement placed = locate_attractor(boxes[k], shape);
    for (NodeId m : nodes_in_box(placed.adjusted, shape)) {
      if (mask.owner[m] >= 0) {
        throw Error("node " + std::to_string(m) + " is claimed by box " +
                    std::to_string(mask.owner[m]) + " and box " + std::to_string(k));
      }
      mask.owner[m] = static_cast<int>(k);
      mask.attractor[m] = placed.attractor;
    }
    mask.adjusted_boxes.push_back(placed.adjusted);
    mask.box_attractors.push_back(placed.attractor);
  }
  return mask;
}

// Fore/background label per node.
struct ObjectMask {
  GridShape shape;
  std::vector<std::uint8_t> foreground;
};

inline ObjectMask build_object_mask(const AttractorMask& mask) {
  ObjectMask out{mask.shape, std::vector<std::uint8_t>(mask.owner.size(), 0)};
  for (NodeId m = 0; m < mask.owner.size(); ++m) out.foreground[m] = mask.owner[m] >= 0;
  return out;
}

inline FlowLabel build_flow_label(const AttractorMask& mask) {
  return {mask.shape, mask.attractor};
}

// Number of bottom/right/left steps from every node to its attractor,
// staying inside the node's own cluster. 0 for attractors and background,
// -1 where no such path exists.
inline std::vector<int> attractor_distances(const AttractorMask& mask) {
  const GridShape& shape = mask.shape;
  std::vector<int> dist(shape.node_count(), -1);
  for (NodeId m = 0; m < shape.node_count(); ++m) {
    if (mask.attractor[m] == m) dist[m] = 0;
  }
  for (std::size_t k = 0; k < mask.box_attractors.size(); ++k) {
    std::deque<NodeId> queue{mask.box_attractors[k]};
    while (!queue.empty()) {
      const NodeId v = queue.front();
      queue.pop_front();
      const Cell c = node_coords(v, shape);
      // Predecessors: the node above steps down, the node to the left steps
      // right, the node to the right steps left.
      std::vector<NodeId> preds;
      if (c.row > 0) preds.push_back(v - 1);
      if (c.col > 0) preds.push_back(v - shape.rows);
      if (c.col + 1 < shape.cols) preds.push_back(v + shape.rows);
      for (NodeId u : preds) {
        if (mask.owner[u] == static_cast<int>(k) && dist[u] < 0) {
          dist[u] = dist[v] + 1;
          queue.push_back(u);
        }
      }
    }
  }
  return dist;
}

// Flows whose Markov chain is absorbing exactly at attractors and background
// nodes: every other box node splits its mass uniformly over the steps that
// shorten its in-cluster path to the attractor.
inline FlowMaps ground_truth_flows(const AttractorMask& mask) {
  const GridShape& shape = mask.shape;
  const std::vector<int> dist = attractor_distances(mask);
  FlowMaps out(shape);
  for (NodeId m = 0; m < shape.node_count(); ++m) {
    if (mask.attractor[m] == m) {
      out.at(m, Direction::self) = 1.0;
      continue;
    }
    if (dist[m] < 0) {
      throw Error("node " + std::to_string(m) + " cannot reach attractor " +
                  std::to_string(mask.attractor[m]) +
                  " with bottom/right/left steps inside its box");
    }
    std::vector<Direction> steps;
    for (Direction d : {Direction::bottom, Direction::right, Direction::left}) {
      const auto v = neighbor(m, d, shape);
      if (v && mask.owner[*v] == mask.owner[m] && dist[*v] == dist[m] - 1) steps.push_back(d);
    }
    for (Direction d : steps) out.at(m, d) = 1.0 / static_cast<double>(steps.size());
  }
  return out;
}

// Ground-truth scene: lattice plus rotated boxes in pixel coordinates.
struct Scene {
  GridShape shape;
  std::vector<RotatedBox> boxes;
};

}  // namespace mcn

#endif  // MCN_LABELING_HPP_
