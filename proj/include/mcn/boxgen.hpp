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

#ifndef MCN_BOXGEN_HPP_
#define MCN_BOXGEN_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>
#include <vector>

#include "mcn/common.hpp"
#include "mcn/fml.hpp"
#include "mcn/geometry.hpp"
#include "mcn/grid.hpp"
#include "mcn/labeling.hpp"
#include "mcn/mcl.hpp"

namespace mcn {

enum class ExtentMode {
  stddev,    // sqrt of the covariance eigenvalue
  variance,  // the eigenvalue itself
};

struct PcaBoxParams {
  double scale = 1.75;
  ExtentMode extent_mode = ExtentMode::stddev;
  // Lattice stride; degenerate clusters get extents of at least unit / 2.
  double unit = 16.0;

  void validate() const {
    if (!(scale > 0.0)) throw Error("PCA box scale must be > 0");
    if (!(unit > 0.0)) throw Error("PCA box unit must be > 0");
  }
};

inline std::vector<Point2> nodes_to_image_coords(const std::vector<NodeId>& nodes,
                                                 const GridShape& shape) {
  if (nodes.empty()) throw Error("nodes_to_image_coords: empty node set");
  std::vector<Point2> out;
  out.reserve(nodes.size());
  for (NodeId m : nodes) out.push_back(node_center(m, shape));
  return out;
}

struct PrincipalAxes {
  Point2 mean;
  Point2 major;  // unit vector, x >= 0
  double major_var = 0.0;
  double minor_var = 0.0;
};

// Sample covariance of the points and its eigen-decomposition.
inline PrincipalAxes principal_axes(const std::vector<Point2>& points) {
  if (points.empty()) throw Error("principal_axes: no points");
  PrincipalAxes out;
  for (const Point2& p : points) out.mean = out.mean + p;
  out.mean = out.mean * (1.0 / static_cast<double>(points.size()));
  if (points.size() < 2) {
    out.major = {1.0, 0.0};
    return out;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const Point2& p : points) {
    const Point2 d = p - out.mean;
    sxx += d.x * d.x;
    sxy += d.x * d.y;
    syy += d.y * d.y;
  }
  const double denom = static_cast<double>(points.size() - 1);
  sxx /= denom;
  sxy /= denom;
  syy /= denom;
  const double mid = (sxx + syy) / 2;
  const double radius = std::hypot((sxx - syy) / 2, sxy);
  out.major_var = mid + radius;
  out.minor_var = std::max(0.0, mid - radius);
  Point2 v;
  if (std::abs(sxy) > 1e-12 * std::max(1.0, mid)) {
    v = {out.major_var - syy, sxy};
  } else {
    v = sxx >= syy ? Point2{1.0, 0.0} : Point2{0.0, 1.0};
  }
  const double len = std::hypot(v.x, v.y);
  v = v * (1.0 / len);
  if (v.x < 0 || (v.x == 0 && v.y < 0)) v = v * -1.0;
  out.major = v;
  return out;
}

// Box with corners scale * (+-e1 * axis1 +- e2 * axis2) + centroid.
inline RotatedBox pca_box(const std::vector<Point2>& points, const PcaBoxParams& params) {
  params.validate();
  const PrincipalAxes axes = principal_axes(points);
  RotatedBox out;
  out.cx = axes.mean.x;
  out.cy = axes.mean.y;
  if (points.size() == 1) {
    out.w = out.h = params.unit;
    return out;
  }
  auto extent = [&](double var) {
    const double e = params.extent_mode == ExtentMode::stddev ? std::sqrt(var) : var;
    return std::max(e, params.unit / 2);
  };
  out.w = 2 * params.scale * extent(axes.major_var);
  out.h = 2 * params.scale * extent(axes.minor_var);
  out.theta = std::atan2(axes.major.y, axes.major.x);
  return out.normalized();
}

struct Detection {
  NodeId cluster = 0;  // attractor id
  RotatedBox box;
};

// One box per foreground cluster, in ascending attractor order.
inline std::vector<Detection> clusters_to_boxes(const ClusterAssignment& assignment,
                                                const GridShape& shape,
                                                PcaBoxParams params = {}) {
  params.unit = static_cast<double>(shape.stride);
  std::vector<Detection> out;
  for (const auto& [attractor, members] : assignment.clusters) {
    out.push_back({attractor, pca_box(nodes_to_image_coords(members, shape), params)});
  }
  return out;
}

struct DetectionMatch {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double iou = 0.0;
};

struct DetectionScore {
  std::size_t true_positives = 0;
  std::size_t num_pred = 0;
  std::size_t num_gt = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  std::vector<DetectionMatch> matches;

  // Precision with no predictions is 0 unless there was nothing to find;
  // likewise for recall.
  void finalize() {
    precision = num_pred > 0 ? static_cast<double>(true_positives) / num_pred
                             : (num_gt == 0 ? 1.0 : 0.0);
    recall = num_gt > 0 ? static_cast<double>(true_positives) / num_gt
                        : (num_pred == 0 ? 1.0 : 0.0);
    f_score = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }

  // Pools counts across scenes.
  DetectionScore& operator+=(const DetectionScore& other) {
    true_positives += other.true_positives;
    num_pred += other.num_pred;
    num_gt += other.num_gt;
    matches.insert(matches.end(), other.matches.begin(), other.matches.end());
    finalize();
    return *this;
  }
};

// Greedy one-to-one matching by descending IoU.
inline DetectionScore evaluate_detections(const std::vector<RotatedBox>& pred,
                                          const std::vector<RotatedBox>& gt,
                                          double iou_threshold = 0.5) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw Error("iou_threshold must lie in (0, 1)");
  }
  std::vector<DetectionMatch> candidates;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double iou = rotated_iou(pred[p], gt[g]);
      if (iou >= iou_threshold) candidates.push_back({p, g, iou});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const DetectionMatch& a, const DetectionMatch& b) { return a.iou > b.iou; });
  std::vector<char> pred_used(pred.size(), 0), gt_used(gt.size(), 0);
  DetectionScore score;
  score.num_pred = pred.size();
  score.num_gt = gt.size();
  for (const DetectionMatch& m : candidates) {
    if (pred_used[m.pred] || gt_used[m.gt]) continue;
    pred_used[m.pred] = gt_used[m.gt] = 1;
    score.matches.push_back(m);
  }
  score.true_positives = score.matches.size();
  score.finalize();
  return score;
}

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;  // root stays the smallest id
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

// Connected components of foreground nodes joined by undirected links whose
// score exceeds link_threshold.
inline ClusterAssignment local_link_baseline(const NodeSignals& sig, double link_threshold,
                                             double fg_threshold) {
  check_signals(sig);
  if (!(link_threshold > 0 && link_threshold < 1 && fg_threshold > 0 && fg_threshold < 1)) {
    throw Error("local_link_baseline: thresholds must lie in (0, 1)");
  }
  const GridShape& shape = sig.shape;
  const std::size_t n = shape.node_count();
  auto foreground = [&](NodeId m) { return sig.presence[m] > fg_threshold; };
  detail::DisjointSets sets(n);
  constexpr std::array<Direction, 3> kLinks = {Direction::bottom, Direction::right,
                                               Direction::left};
  for (NodeId m = 0; m < n; ++m) {
    if (!foreground(m)) continue;
    for (std::size_t k = 0; k < 3; ++k) {
      const auto v = neighbor(m, kLinks[k], shape);
      if (v && foreground(*v) && sig.link[k][m] > link_threshold) sets.unite(m, *v);
    }
  }
  ClusterAssignment out;
  out.attractor.resize(n);
  for (NodeId m = 0; m < n; ++m) {
    if (!foreground(m)) {
      out.attractor[m] = m;
      out.background.push_back(m);
      continue;
    }
    out.attractor[m] = sets.find(m);
    out.clusters[out.attractor[m]].push_back(m);
  }
  return out;
}

}  // namespace mcn

#endif  // MCN_BOXGEN_HPP_
