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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "mcn/flow_matrix.hpp"
#include "mcn/labeling.hpp"
#include "mcn/toy_model.hpp"

namespace mcn {
namespace {

// Box covering node rows [r0, r1] and columns [c0, c1] with half-cell margins.
RotatedBox cell_box(std::size_t r0, std::size_t c0, std::size_t r1, std::size_t c1,
                    const GridShape& s = GridShape{}) {
  const double u = static_cast<double>(s.stride);
  const double x0 = static_cast<double>(c0) * u, x1 = static_cast<double>(c1 + 1) * u;
  const double y0 = static_cast<double>(r0) * u, y1 = static_cast<double>(r1 + 1) * u;
  return {(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0, 0.0};
}

TEST(NodesInBox, BoundaryInclusiveExample) {
  const GridShape s{4, 4};
  const RotatedBox box{16, 16, 16, 16, 0.0};  // pixels [8, 24] on both axes
  const std::vector<NodeId> expected{node_index(0, 0, s), node_index(1, 0, s),
                                     node_index(0, 1, s), node_index(1, 1, s)};
  EXPECT_EQ(nodes_in_box(box, s), expected);
}

TEST(NodesInBox, TinyBoxIsEmpty) {
  EXPECT_TRUE(nodes_in_box(RotatedBox{16, 16, 4, 4, 0.0}, GridShape{4, 4}).empty());
}

TEST(NodesInBox, QuarterTurnMatchesSwappedTwin) {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> pos(20, 200), len(10, 120), ang(-1.5, 1.5);
  const GridShape s{16, 16};
  for (int k = 0; k < 200; ++k) {
    const RotatedBox a{pos(rng), pos(rng), len(rng), len(rng), ang(rng)};
    const RotatedBox b{a.cx, a.cy, a.h, a.w, a.theta + std::numbers::pi / 2};
    EXPECT_EQ(nodes_in_box(a, s), nodes_in_box(b, s));
  }
}

TEST(LocateAttractor, HorizontalFourByTwoBox) {
  const GridShape s{8, 8};
  // Node rows 2..3, columns 1..4: the lower edge midpoint is at x = 48, which
  // lies halfway between columns 2 and 3.
  const AttractorPlacement p = locate_attractor(cell_box(2, 1, 3, 4), s);
  EXPECT_EQ(p.attractor, node_index(3, 2, s));
  EXPECT_EQ(p.adjusted, cell_box(2, 1, 3, 4));
}

TEST(LocateAttractor, OddWidthPicksCenterColumn) {
  const GridShape s{8, 8};
  const AttractorPlacement p = locate_attractor(cell_box(1, 2, 2, 6), s);
  EXPECT_EQ(p.attractor, node_index(2, 4, s));
}

TEST(LocateAttractor, TiltedBoxUsesLowerShortSide) {
  const GridShape s{16, 16};
  // Long box sloping down to the right: the lower short side is on the right.
  const RotatedBox box{128, 128, 120, 24, std::numbers::pi / 6};
  const AttractorPlacement p = locate_attractor(box, s);
  const Point2 d = box.center() + box.major_axis() * (box.w / 2);
  EXPECT_EQ(node_coords(p.attractor, s).col, nearest_column(d.x, s));
  std::size_t bottom = 0;
  for (NodeId m : nodes_in_box(box, s)) bottom = std::max(bottom, node_coords(m, s).row);
  EXPECT_EQ(node_coords(p.attractor, s).row, bottom);
  EXPECT_TRUE(p.adjusted.contains(node_center(p.attractor, s)));
}

TEST(LocateAttractor, AdjustmentGrowsAboutCenter) {
  const GridShape s{16, 16};
  const RotatedBox box{128, 128, 120, 24, std::numbers::pi / 6};
  const AttractorPlacement p = locate_attractor(box, s);
  EXPECT_NEAR(p.adjusted.cx, box.cx, 1e-12);
  EXPECT_NEAR(p.adjusted.cy, box.cy, 1e-12);
  EXPECT_NEAR(p.adjusted.theta, box.normalized().theta, 1e-12);
  EXPECT_GE(p.adjusted.w, box.w - 1e-12);
  EXPECT_GE(p.adjusted.h, box.h - 1e-12);
}

TEST(LocateAttractor, MirrorBoxesGiveMirrorAttractors) {
  const GridShape s{16, 16};
  const double width = static_cast<double>(s.stride * s.cols);
  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> pos(70, 186), len(40, 100), hgt(20, 40), ang(-1.2, 1.2);
  int checked = 0;
  for (int k = 0; k < 300; ++k) {
    const RotatedBox a{pos(rng), pos(rng), len(rng), hgt(rng), ang(rng)};
    const RotatedBox b{width - a.cx, a.cy, a.w, a.h, -a.theta};
    const Point2 end = a.center() + a.major_axis() * (a.w / 2 * (std::sin(a.theta) >= 0 ? 1 : -1));
    const double t = (end.x - s.offset) / static_cast<double>(s.stride);
    if (std::abs(t - std::floor(t) - 0.5) < 1e-6 || std::abs(std::sin(a.theta)) < 1e-6) continue;
    const Cell ca = node_coords(locate_attractor(a, s).attractor, s);
    const Cell cb = node_coords(locate_attractor(b, s).attractor, s);
    EXPECT_EQ(ca.row, cb.row);
    EXPECT_EQ(ca.col, s.cols - 1 - cb.col);
    ++checked;
  }
  EXPECT_GT(checked, 250);
}

TEST(LocateAttractor, EmptyBoxThrows) {
  EXPECT_THROW(locate_attractor(RotatedBox{16, 16, 4, 4, 0.0}, GridShape{4, 4}), Error);
}

TEST(AttractorMask, NoBoxesIsIdentity) {
  const GridShape s{5, 7};
  const AttractorMask mask = build_attractor_mask({}, s);
  for (NodeId m = 0; m < s.node_count(); ++m) {
    EXPECT_EQ(mask.attractor[m], m);
    EXPECT_FALSE(mask.is_foreground(m));
  }
}

TEST(AttractorMask, TwoByThreeBoxOnEightByEight) {
  const GridShape s{8, 8};
  const AttractorMask mask = build_attractor_mask({cell_box(3, 2, 4, 4)}, s);
  std::size_t shared = 0, self = 0;
  for (NodeId m = 0; m < s.node_count(); ++m) {
    if (mask.attractor[m] == mask.box_attractors[0] && mask.is_foreground(m)) ++shared;
    if (!mask.is_foreground(m)) {
      EXPECT_EQ(mask.attractor[m], m);
      ++self;
    }
  }
  EXPECT_EQ(shared, 6u);
  EXPECT_EQ(self, 58u);
}

TEST(AttractorMask, TwoDisjointBoxesGiveTwoAttractors) {
  const GridShape s{8, 8};
  const AttractorMask mask = build_attractor_mask({cell_box(0, 0, 1, 2), cell_box(5, 4, 6, 7)}, s);
  std::set<NodeId> values;
  for (NodeId m = 0; m < s.node_count(); ++m) {
    if (mask.attractor[m] != m) values.insert(mask.attractor[m]);
  }
  values.insert(mask.box_attractors.begin(), mask.box_attractors.end());
  EXPECT_EQ(values.size(), 2u);
}

TEST(AttractorMask, OverlapNamesNodeAndBoxes) {
  const GridShape s{8, 8};
  try {
    (void)build_attractor_mask({cell_box(0, 0, 2, 2), cell_box(2, 2, 3, 4)}, s);
    FAIL() << "expected overlap error";
  } catch (const Error& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("node " + std::to_string(node_index(2, 2, s))), std::string::npos) << what;
    EXPECT_NE(what.find("box 0"), std::string::npos);
    EXPECT_NE(what.find("box 1"), std::string::npos);
  }
}

TEST(FlowLabel, MatchesDenseConstruction) {
  const GridShape s{6, 6};
  const std::vector<RotatedBox> boxes{cell_box(0, 0, 1, 2, s), cell_box(3, 3, 5, 4, s)};
  const AttractorMask mask = build_attractor_mask(boxes, s);
  const FlowLabel label = build_flow_label(mask);
  const std::size_t n = s.node_count();
  std::vector<std::vector<double>> dense(n, std::vector<double>(n, 0.0));
  for (NodeId m = 0; m < n; ++m) dense[m][m] = 1.0;
  for (const RotatedBox& box : boxes) {
    const AttractorPlacement p = locate_attractor(box, s);
    for (NodeId m : nodes_in_box(p.adjusted, s)) {
      dense[m].assign(n, 0.0);
      dense[m][p.attractor] = 1.0;
    }
  }
  for (NodeId m = 0; m < n; ++m) EXPECT_EQ(expand_one_hot(label, m), dense[m]) << "node " << m;
  EXPECT_THROW(expand_one_hot(label, n), Error);
}

TEST(GroundTruthFlows, BackgroundOnly) {
  const FlowMaps fm = ground_truth_flows(build_attractor_mask({}, GridShape{3, 3}));
  for (NodeId m = 0; m < 9; ++m) EXPECT_EQ(fm.at(m, Direction::self), 1.0);
}

TEST(GroundTruthFlows, OneByThreeBox) {
  const GridShape s{4, 5};
  const AttractorMask mask = build_attractor_mask({cell_box(1, 1, 1, 3, s)}, s);
  ASSERT_EQ(mask.box_attractors[0], node_index(1, 2, s));
  const FlowMaps fm = ground_truth_flows(mask);
  EXPECT_EQ(fm.at(node_index(1, 1, s), Direction::right), 1.0);
  EXPECT_EQ(fm.at(node_index(1, 3, s), Direction::left), 1.0);
  EXPECT_EQ(fm.at(node_index(1, 2, s), Direction::self), 1.0);
}

TEST(GroundTruthFlows, NodeBelowAttractorIsRejected) {
  const GridShape s{4, 4};
  AttractorMask mask = build_attractor_mask({cell_box(0, 0, 1, 1, s)}, s);
  // Move the attractor to the top row by hand: the bottom row cannot climb.
  const NodeId top = node_index(0, 0, s);
  for (NodeId m = 0; m < s.node_count(); ++m) {
    if (mask.is_foreground(m)) mask.attractor[m] = top;
  }
  mask.box_attractors[0] = top;
  EXPECT_THROW(ground_truth_flows(mask), Error);
}

TEST(LabelingProperty, SyntheticScenesSatisfyInvariants) {
  SceneConfig cfg;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SyntheticScene sample = synth_scene(cfg, seed);
    const AttractorMask& mask = sample.mask;
    const GridShape& s = mask.shape;
    for (std::size_t k = 0; k < mask.box_attractors.size(); ++k) {
      EXPECT_TRUE(mask.adjusted_boxes[k].contains(node_center(mask.box_attractors[k], s)));
      for (const Point2& p : sample.scene.boxes[k].corners()) {
        EXPECT_TRUE(mask.adjusted_boxes[k].contains(p, 1e-6));
      }
    }
    const ObjectMask obj = build_object_mask(mask);
    const std::set<NodeId> attractors(mask.box_attractors.begin(), mask.box_attractors.end());
    for (NodeId m = 0; m < s.node_count(); ++m) {
      const bool self = mask.attractor[m] == m;
      EXPECT_EQ(self, !mask.is_foreground(m) || attractors.count(m) == 1);
      EXPECT_EQ(obj.foreground[m] == 1, !self || attractors.count(m) == 1);
      if (mask.is_foreground(m)) {
        EXPECT_EQ(mask.attractor[m], mask.box_attractors[static_cast<std::size_t>(mask.owner[m])]);
      }
    }
    const FlowMaps fm = ground_truth_flows(mask);
    ASSERT_TRUE(validate_flow_maps(fm).passed) << "seed " << seed;
    const FlowMatrix m0 = build_flow_matrix(fm);
    for (NodeId m = 0; m < s.node_count(); ++m) {
      EXPECT_EQ(m0(m, m) == 1.0, mask.attractor[m] == m) << "seed " << seed << " node " << m;
    }
  }
}

}  // namespace
}  // namespace mcn
