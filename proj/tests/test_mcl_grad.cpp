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
#include <random>

#include "mcn/flow_label.hpp"
#include "mcn/labeling.hpp"
#include "mcn/mcl.hpp"
#include "mcn/mcl_grad.hpp"
#include "support.hpp"

namespace mcn {
namespace {

using testing::from_rows;

MclConfig training_iters(std::size_t n) {
  MclConfig cfg = MclConfig::training();
  cfg.max_iters = n;
  cfg.early_stop = false;
  return cfg;
}

TEST(FlowLoss, OneHotAtLabelIsZero) {
  const FlowMatrix mn = from_rows({{0.0, 0.0, 0.0}, {1.0, 1.0, 0.0}, {0.0, 0.0, 1.0}});
  const FlowLabel label{GridShape{3, 1}, {1, 1, 2}};
  EXPECT_LE(flow_loss(mn, label).cost, 1e-9);
}

TEST(FlowLoss, UniformOverFourGivesLogFour) {
  testing::Dense d = testing::dense_zeros(4);
  for (auto& row : d) row[0] = 0.25;
  for (NodeId c = 1; c < 4; ++c) d[c][c] = 1.0;
  const FlowLossResult r = flow_loss(from_rows(d), FlowLabel{GridShape{2, 2}, {2, 1, 2, 3}});
  EXPECT_NEAR(r.per_node[0], std::log(4.0), 1e-12);
  EXPECT_NEAR(r.cost, std::log(4.0) / 4, 1e-12);
}

TEST(FlowLoss, MatchesElementwiseCrossEntropy) {
  std::mt19937_64 rng(21);
  const GridShape s{3, 3};
  const FlowMatrix m0 = build_flow_matrix(testing::random_flow_maps(s, rng));
  const FlowMatrix mn = markov_cluster(m0, training_iters(3)).matrix;
  std::uniform_int_distribution<NodeId> pick(0, 8);
  FlowLabel label{s, std::vector<NodeId>(9)};
  for (NodeId& a : label.attractor) a = pick(rng);
  double ref = 0.0;
  for (NodeId m = 0; m < 9; ++m) {
    const std::vector<double> y = expand_one_hot(label, m);
    for (NodeId r = 0; r < 9; ++r) {
      if (y[r] > 0) ref -= y[r] * std::log(std::max(mn(r, m), 1e-12));
    }
  }
  const FlowLossResult r = flow_loss(mn, label);
  EXPECT_NEAR(r.cost, ref / 9, 1e-12);
  double mean = 0.0;
  for (double v : r.per_node.values()) mean += v;
  EXPECT_NEAR(r.cost, mean / 9, 1e-9);
}

TEST(FlowLoss, BoundedByClamp) {
  const FlowLossResult r =
      flow_loss(FlowMatrix::identity(4), FlowLabel{GridShape{2, 2}, {1, 0, 3, 2}});
  EXPECT_NEAR(r.cost, -std::log(1e-12), 1e-9);
  EXPECT_GE(r.cost, 0.0);
}

TEST(FlowLoss, LabelSizeMismatchThrows) {
  EXPECT_THROW(flow_loss(FlowMatrix::identity(4), FlowLabel{GridShape{3, 1}, {0, 1, 2}}), Error);
  EXPECT_THROW(flow_loss(FlowMatrix::identity(2), FlowLabel{GridShape{2, 1}, {0, 5}}), Error);
}

// Two-node chain, one iteration: node 0 keeps x and sends y down, node 1
// keeps z (and w = M0(0,1) = 0). Partials derived by hand from
// M_N(1,0) = (xy + yz) / (x^2 + xy + yz) and M_N(1,1) = 1. The entry E(0,1)
// is zero in the forward pass, so the only path to w runs through E(0,0).
TEST(MclBackward, TwoNodeChainOneIteration) {
  const double x = 0.3, y = 0.7, z = 1.0;
  const FlowMatrix m0 = from_rows({{x, 0.0}, {y, z}});
  const FlowLabel label{GridShape{2, 1}, {1, 1}};
  const MclResult r = markov_cluster(m0, training_iters(1), true);
  const DenseMatrix g = mcl_backward(*r.tape, label, GradMode::exact);
  const double s0 = x * x + x * y + y * z;
  const double e10 = x * y + y * z;
  EXPECT_NEAR(g(0, 0), -0.5 * (y / e10 - (2 * x + y) / s0), 1e-12);
  EXPECT_NEAR(g(1, 0), -0.5 * ((x + z) / e10 - (x + z) / s0), 1e-12);
  EXPECT_NEAR(g(1, 1), -0.5 * (y / e10 - y / s0), 1e-12);
  EXPECT_NEAR(g(0, 1), 0.5 * y / s0, 1e-12);
  EXPECT_NEAR(flow_loss(r.matrix, label).cost, -0.5 * std::log(e10 / s0), 1e-12);
}

TEST(MclBackward, ExactModeMatchesFiniteDifferencesThreeIterations) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = testing::random_grad_instance(seed);
    const MclConfig cfg = training_iters(3);
    const MclResult r = markov_cluster(inst.m0, cfg, true);
    const DenseMatrix g = mcl_backward(*r.tape, inst.label, GradMode::exact);
    const DenseMatrix fd = finite_diff_grad(inst.m0, inst.label, cfg, 1e-5);
    const auto agree = testing::compare_on_support(inst.m0, g, fd);
    EXPECT_TRUE(agree.within(1e-4, 1e-7))
        << "seed " << seed << " rel " << agree.max_rel << " abs " << agree.max_abs_small;
  }
}

TEST(MclBackward, ExactModeMatchesFiniteDifferencesUpToFiveByFive) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> side(3, 5), iters(1, 4);
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const std::size_t rows = side(rng), cols = side(rng), n = iters(rng);
    const auto inst = testing::random_grad_instance(100 + trial, rows, cols);
    const MclConfig cfg = training_iters(n);
    const MclResult r = markov_cluster(inst.m0, cfg, true);
    const DenseMatrix g = mcl_backward(*r.tape, inst.label, GradMode::exact);
    const DenseMatrix fd = finite_diff_grad(inst.m0, inst.label, cfg, 1e-6);
    const auto agree = testing::compare_on_support(inst.m0, g, fd);
    EXPECT_TRUE(agree.within(1e-4, 1e-7)) << rows << "x" << cols << " N=" << n << " rel "
                                          << agree.max_rel << " abs " << agree.max_abs_small;
  }
}

TEST(MclBackward, WithoutFinalRenormalization) {
  const auto inst = testing::random_grad_instance(7);
  MclConfig cfg = training_iters(3);
  cfg.final_renormalize = false;
  const MclResult r = markov_cluster(inst.m0, cfg, true);
  const DenseMatrix g = mcl_backward(*r.tape, inst.label, GradMode::exact);
  const auto agree = testing::compare_on_support(
      inst.m0, g, finite_diff_grad(inst.m0, inst.label, cfg, 1e-6));
  EXPECT_TRUE(agree.within(1e-4, 1e-7)) << agree.max_rel;
}

TEST(MclBackward, PositivePruneThresholdMatchesAwayFromKinks) {
  const auto inst = testing::random_grad_instance(3);
  MclConfig cfg = training_iters(2);
  cfg.prune_threshold = 0.02;
  const MclResult r = markov_cluster(inst.m0, cfg, true);
  // Skip if any inflated entry sits within the perturbation of the threshold.
  for (const MclStep& st : r.tape->steps) {
    const DenseMatrix d = st.inflated.to_dense();
    for (double v : d.data()) {
      if (std::abs(v - cfg.prune_threshold) < 1e-4) GTEST_SKIP() << "entry at the prune kink";
    }
  }
  const DenseMatrix g = mcl_backward(*r.tape, inst.label, GradMode::exact);
  const auto agree = testing::compare_on_support(
      inst.m0, g, finite_diff_grad(inst.m0, inst.label, cfg, 1e-6));
  EXPECT_TRUE(agree.within(1e-4, 1e-7)) << agree.max_rel;
}

TEST(MclBackward, ZeroAtGroundTruthOptimum) {
  SceneConfig cfg;
  const SyntheticScene s = synth_scene(cfg, 4);
  const FlowMatrix m0 = build_flow_matrix(ground_truth_flows(s.mask));
  const MclResult r = markov_cluster(m0, training_iters(8), true);
  const FlowLabel label = build_flow_label(s.mask);
  ASSERT_LE(flow_loss(r.matrix, label).cost, 1e-9);
  const DenseMatrix g = mcl_backward_at(*r.tape, label, GradMode::exact,
                                        lattice_support(s.scene.shape));
  double worst = 0.0;
  for (double v : g.data()) worst = std::max(worst, std::abs(v));
  EXPECT_LE(worst, 1e-9);
}

TEST(MclBackward, RestrictedPositionsMatchFullGradient) {
  const auto inst = testing::random_grad_instance(11);
  const MclResult r = markov_cluster(inst.m0, training_iters(3), true);
  const DenseMatrix full = mcl_backward(*r.tape, inst.label, GradMode::exact);
  const auto support = lattice_support(inst.label.shape);
  const DenseMatrix part = mcl_backward_at(*r.tape, inst.label, GradMode::exact, support);
  for (const auto& [row, col] : support) EXPECT_NEAR(part(row, col), full(row, col), 1e-14);
  const DenseMatrix threaded = mcl_backward(*r.tape, inst.label, GradMode::exact, 4);
  EXPECT_LT(max_abs_diff(full, threaded), 1e-12);
}

TEST(MclBackward, EmptyTapeThrows) {
  MclTape tape;
  tape.initial = FlowMatrix::identity(2);
  EXPECT_THROW(mcl_backward(tape, FlowLabel{GridShape{2, 1}, {0, 1}}, GradMode::exact), Error);
}

TEST(MclBackward, DirectionalDerivativeIdentity) {
  const auto inst = testing::random_grad_instance(17);
  const MclConfig cfg = training_iters(3);
  const MclResult r = markov_cluster(inst.m0, cfg, true);
  const DenseMatrix g = mcl_backward(*r.tape, inst.label, GradMode::exact);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  const std::size_t n = inst.m0.size();
  std::vector<FlowMatrix::Column> plus(n), minus(n);
  double inner = 0.0;
  const double eps = 1e-6;
  for (NodeId c = 0; c < n; ++c) {
    inst.m0.for_each_nonzero(c, [&](NodeId row, double v) {
      const double e = gauss(rng);
      inner += e * g(row, c);
      plus[c].push_back({row, v + eps * e});
      minus[c].push_back({row, v - eps * e});
    });
  }
  const double up = flow_cost(FlowMatrix::from_columns(n, plus), inst.label, cfg);
  const double down = flow_cost(FlowMatrix::from_columns(n, minus), inst.label, cfg);
  EXPECT_NEAR(up - down, 2 * eps * inner, 1e-6 * std::abs(2 * eps * inner) + 1e-12);
}

TEST(FiniteDiffGrad, ConstantRegionIsZero) {
  // Perturbing a one-hot diagonal is undone by the normalization.
  const FlowMatrix m0 = FlowMatrix::identity(4);
  const FlowLabel label{GridShape{2, 2}, {0, 1, 2, 3}};
  const DenseMatrix fd = finite_diff_grad(m0, label, training_iters(2), 1e-5);
  for (double v : fd.data()) EXPECT_EQ(v, 0.0);
}

TEST(FiniteDiffGrad, RejectsStepOutsideRange) {
  const FlowLabel label{GridShape{2, 1}, {0, 1}};
  EXPECT_THROW(finite_diff_grad(FlowMatrix::identity(2), label, training_iters(1), 1e-8), Error);
  EXPECT_THROW(finite_diff_grad(FlowMatrix::identity(2), label, training_iters(1), 1e-2), Error);
}

TEST(MclBackwardProperty, ApproximateModeDescends) {
  std::size_t descended = 0;
  const std::size_t trials = 200;
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<std::size_t> iters(1, 4);
  for (std::uint64_t t = 0; t < trials; ++t) {
    const auto inst = testing::random_grad_instance(1000 + t);
    descended += testing::approx_step_descends(inst, training_iters(iters(rng)), 1e-3);
  }
  EXPECT_GE(static_cast<double>(descended), 0.95 * static_cast<double>(trials))
      << descended << " of " << trials;
}

TEST(MclBackward, ModesAgreeOnMassPreservingDirections) {
  // With threshold 0 every iterate of a stochastic M0 is stochastic, so the
  // exact normalization Jacobian differs from the identity by a per-column
  // constant. Moving mass within a column cancels that constant.
  const auto inst = testing::random_grad_instance(23);
  const MclConfig cfg = training_iters(2);
  const MclResult r = markov_cluster(inst.m0, cfg, true);
  const DenseMatrix exact = mcl_backward(*r.tape, inst.label, GradMode::exact);
  const DenseMatrix approx = mcl_backward(*r.tape, inst.label, GradMode::approx);
  const std::size_t n = inst.m0.size();
  for (NodeId c = 0; c < n; ++c) {
    // Direction: move mass between the first two stored entries of column c.
    std::vector<NodeId> rows;
    inst.m0.for_each_nonzero(c, [&](NodeId row, double) { rows.push_back(row); });
    if (rows.size() < 2) continue;
    const double de = exact(rows[0], c) - exact(rows[1], c);
    const double da = approx(rows[0], c) - approx(rows[1], c);
    EXPECT_NEAR(de, da, 1e-9 * std::max(1.0, std::abs(de))) << "column " << c;
  }
}

}  // namespace
}  // namespace mcn
