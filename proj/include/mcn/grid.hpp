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

#ifndef MCN_GRID_HPP_
#define MCN_GRID_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcn/common.hpp"

namespace mcn {

// Lattice geometry. Node (i, j) sits at pixel (j * stride + offset,
// i * stride + offset); rows grow downward in image space.
struct GridShape {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::size_t stride = 16;
  double offset = 8.0;

  std::size_t node_count() const { return rows * cols; }

  void validate() const {
    if (rows < 1 || cols < 1 || stride < 1) {
      throw Error("grid shape must have rows, cols and stride >= 1 (got " +
                  std::to_string(rows) + "x" + std::to_string(cols) +
                  ", stride " + std::to_string(stride) + ")");
    }
  }

  bool same_lattice(const GridShape& other) const {
    return rows == other.rows && cols == other.cols;
  }

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

// Column-major flat index: m = i + rows * j.
using NodeId = std::size_t;

struct Cell {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

inline NodeId node_index(std::size_t i, std::size_t j, const GridShape& shape) {
  if (i >= shape.rows || j >= shape.cols) {
    throw Error("cell (" + std::to_string(i) + ", " + std::to_string(j) +
                ") outside " + std::to_string(shape.rows) + "x" +
                std::to_string(shape.cols) + " grid");
  }
  return i + shape.rows * j;
}

inline Cell node_coords(NodeId m, const GridShape& shape) {
  if (m >= shape.node_count()) {
    throw Error("node " + std::to_string(m) + " outside grid of " +
                std::to_string(shape.node_count()) + " nodes");
  }
  return {m % shape.rows, m / shape.rows};
}

// Outgoing flow directions, in flow-map plane order.
enum class Direction : std::size_t { self = 0, bottom = 1, right = 2, left = 3 };

inline constexpr std::array<Direction, 4> kDirections = {
    Direction::self, Direction::bottom, Direction::right, Direction::left};

// Node reached by one step in `dir`, or nullopt when the step leaves the grid.
inline std::optional<NodeId> neighbor(NodeId m, Direction dir,
                                      const GridShape& shape) {
  const Cell c = node_coords(m, shape);
  switch (dir) {
    case Direction::self:
      return m;
    case Direction::bottom:
      if (c.row + 1 >= shape.rows) return std::nullopt;
      return m + 1;
    case Direction::right:
      if (c.col + 1 >= shape.cols) return std::nullopt;
      return m + shape.rows;
    case Direction::left:
      if (c.col == 0) return std::nullopt;
      return m - shape.rows;
  }
  return std::nullopt;
}

// One scalar per lattice node, stored column-major like NodeId.
class NodeGrid {
 public:
  NodeGrid() = default;
  NodeGrid(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  explicit NodeGrid(const GridShape& shape, double fill = 0.0)
      : NodeGrid(shape.rows, shape.cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](NodeId m) { return values_[m]; }
  double operator[](NodeId m) const { return values_[m]; }
  double& at(std::size_t i, std::size_t j) { return values_[i + rows_ * j]; }
  double at(std::size_t i, std::size_t j) const {
    return values_[i + rows_ * j];
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool same_shape(const NodeGrid& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const NodeGrid&, const NodeGrid&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

}  // namespace mcn

#endif  // MCN_GRID_HPP_
