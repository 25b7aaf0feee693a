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

#ifndef MCN_FLOW_MATRIX_HPP_
#define MCN_FLOW_MATRIX_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcn/flow_maps.hpp"
#include "mcn/grid.hpp"

namespace mcn {

// Plain column-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r + rows_ * c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r + rows_ * c];
  }

  std::span<double> column(std::size_t c) {
    return {data_.data() + rows_ * c, rows_};
  }
  std::span<const double> column(std::size_t c) const {
    return {data_.data() + rows_ * c, rows_};
  }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  DenseMatrix& operator+=(const DenseMatrix& other) {
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error("max_abs_diff: dimension mismatch");
  }
  double out = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    out = std::max(out, std::abs(a.data()[k] - b.data()[k]));
  }
  return out;
}

// Square matrix over lattice nodes; column n is the outgoing distribution of
// a walk started at node n. Stored either as compressed sparse columns or
// dense column-major.
class FlowMatrix {
 public:
  enum class Storage { sparse, dense };

  struct Entry {
    NodeId row = 0;
    double value = 0.0;
  };
  using Column = std::vector<Entry>;

  // Fraction of filled entries above which iterates switch to dense storage.
  static constexpr double kDenseFillFraction = 0.25;

  FlowMatrix() = default;

  static FlowMatrix identity(std::size_t n) {
    std::vector<Column> cols(n);
    for (std::size_t c = 0; c < n; ++c) cols[c].push_back({c, 1.0});
    return from_columns(n, std::move(cols));
  }

  // Entries may come unsorted and duplicated; duplicates are summed and
  // exact zeros dropped.
  static FlowMatrix from_columns(std::size_t n, std::vector<Column> cols) {
    if (cols.size() != n) throw Error("from_columns: expected n columns");
    FlowMatrix out;
    out.n_ = n;
    out.storage_ = Storage::sparse;
    out.col_ptr_.assign(n + 1, 0);
    for (std::size_t c = 0; c < n; ++c) {
      Column& col = cols[c];
      std::sort(col.begin(), col.end(),
                [](const Entry& a, const Entry& b) { return a.row < b.row; });
      std::size_t k = 0;
      while (k < col.size()) {
        const NodeId row = col[k].row;
        if (row >= n) throw Error("from_columns: row index out of range");
        double v = 0.0;
        while (k < col.size() && col[k].row == row) v += col[k++].value;
        if (v != 0.0) {
          out.row_idx_.push_back(row);
          out.values_.push_back(v);
        }
      }
      out.col_ptr_[c + 1] = out.row_idx_.size();
    }
    return out;
  }

  static FlowMatrix from_dense(DenseMatrix m) {
    if (m.rows() != m.cols()) throw Error("flow matrix must be square");
    FlowMatrix out;
    out.n_ = m.rows();
    out.storage_ = Storage::dense;
    out.dense_ = std::move(m);
    return out;
  }

  std::size_t size() const { return n_; }
  Storage storage() const { return storage_; }
  bool is_dense() const { return storage_ == Storage::dense; }

  std::size_t nnz() const {
    if (!is_dense()) return values_.size();
    return static_cast<std::size_t>(std::count_if(
        dense_.data().begin(), dense_.data().end(),
        [](double v) { return v != 0.0; }));
  }

  double operator()(NodeId r, NodeId c) const {
    if (is_dense()) return dense_(r, c);
    const auto rows = sparse_rows(c);
    const auto it = std::lower_bound(rows.begin(), rows.end(), r);
    if (it == rows.end() || *it != r) return 0.0;
    return values_[col_ptr_[c] + static_cast<std::size_t>(it - rows.begin())];
  }

  // Visits stored nonzeros of column c in ascending row order.
  template <class Fn>
  void for_each_nonzero(NodeId c, Fn&& fn) const {
    if (is_dense()) {
      const auto col = dense_.column(c);
      for (std::size_t r = 0; r < n_; ++r) {
        if (col[r] != 0.0) fn(static_cast<NodeId>(r), col[r]);
      }
      return;
    }
    for (std::size_t k = col_ptr_[c]; k < col_ptr_[c + 1]; ++k) {
      fn(row_idx_[k], values_[k]);
    }
  }

  double column_sum(NodeId c) const {
    double s = 0.0;
    for_each_nonzero(c, [&](NodeId, double v) { s += v; });
    return s;
  }

  bool is_column_stochastic(double tolerance = kFlowSumTolerance) const {
    for (NodeId c = 0; c < n_; ++c) {
      if (std::abs(column_sum(c) - 1.0) > tolerance) return false;
    }
    return true;
  }

  DenseMatrix to_dense() const {
    if (is_dense()) return dense_;
    DenseMatrix out(n_, n_);
    for (NodeId c = 0; c < n_; ++c) {
      for_each_nonzero(c, [&](NodeId r, double v) { out(r, c) = v; });
    }
    return out;
  }

  void densify_if_filled(double fraction = kDenseFillFraction) {
    if (is_dense() || n_ == 0) return;
    const double filled = static_cast<double>(values_.size()) /
                          (static_cast<double>(n_) * static_cast<double>(n_));
    if (filled > fraction) *this = from_dense(to_dense());
  }

  std::span<const NodeId> sparse_rows(NodeId c) const {
    return {row_idx_.data() + col_ptr_[c], col_ptr_[c + 1] - col_ptr_[c]};
  }
  std::span<const double> sparse_values(NodeId c) const {
    return {values_.data() + col_ptr_[c], col_ptr_[c + 1] - col_ptr_[c]};
  }
  const DenseMatrix& dense() const { return dense_; }

 private:
  std::size_t n_ = 0;
  Storage storage_ = Storage::sparse;
  std::vector<std::size_t> col_ptr_{0};
  std::vector<NodeId> row_idx_;
  std::vector<double> values_;
  DenseMatrix dense_;
};

inline double max_abs_diff(const FlowMatrix& a, const FlowMatrix& b) {
  if (a.size() != b.size()) throw Error("max_abs_diff: dimension mismatch");
  std::vector<double> scratch(a.size(), 0.0);
  double out = 0.0;
  for (NodeId c = 0; c < a.size(); ++c) {
    a.for_each_nonzero(c, [&](NodeId r, double v) { scratch[r] = v; });
    b.for_each_nonzero(c, [&](NodeId r, double v) {
      out = std::max(out, std::abs(scratch[r] - v));
      scratch[r] = 0.0;
    });
    a.for_each_nonzero(c, [&](NodeId r, double) {
      out = std::max(out, std::abs(scratch[r]));
      scratch[r] = 0.0;
    });
  }
  return out;
}

// Row that receives flow `dir` of node n in M0. Flow whose neighbor lies
// off the grid is redirected onto the diagonal.
inline NodeId flow_target(NodeId n, Direction dir, const GridShape& shape) {
  return neighbor(n, dir, shape).value_or(n);
}

// Column n of M0 holds node n's four outgoing flows.
inline FlowMatrix build_flow_matrix(const FlowMaps& fm) {
  const FlowValidation report = validate_flow_maps(fm);
  if (!report.passed) throw Error("invalid flow maps: " + report.describe());
  const std::size_t n = fm.shape.node_count();
  std::vector<FlowMatrix::Column> cols(n);
  for (NodeId c = 0; c < n; ++c) {
    for (Direction d : kDirections) {
      const double v = fm.at(c, d);
      if (v != 0.0) cols[c].push_back({flow_target(c, d, fm.shape), v});
    }
  }
  return FlowMatrix::from_columns(n, std::move(cols));
}

// Gathers a gradient with respect to M0 back onto the four flow planes;
// the adjoint of build_flow_matrix's scatter. `grad(row, col)` returns
// dC/dM0(row, col).
template <class GradFn>
std::array<NodeGrid, 4> flow_maps_gradient(const GridShape& shape,
                                           GradFn&& grad) {
  std::array<NodeGrid, 4> out{NodeGrid(shape), NodeGrid(shape),
                              NodeGrid(shape), NodeGrid(shape)};
  for (NodeId c = 0; c < shape.node_count(); ++c) {
    for (Direction d : kDirections) {
      out[static_cast<std::size_t>(d)][c] = grad(flow_target(c, d, shape), c);
    }
  }
  return out;
}

// Every (row, col) position M0 can occupy on this lattice, sorted by column
// then row, without duplicates.
inline std::vector<std::pair<NodeId, NodeId>> lattice_support(
    const GridShape& shape) {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (NodeId c = 0; c < shape.node_count(); ++c) {
    std::vector<NodeId> rows;
    for (Direction d : kDirections) rows.push_back(flow_target(c, d, shape));
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    for (NodeId r : rows) out.emplace_back(r, c);
  }
  return out;
}

}  // namespace mcn

#endif  // MCN_FLOW_MATRIX_HPP_
