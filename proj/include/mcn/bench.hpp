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

#ifndef MCN_BENCH_HPP_
#define MCN_BENCH_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mcn/common.hpp"
#include "mcn/flow_matrix.hpp"
#include "mcn/labeling.hpp"
#include "mcn/mcl.hpp"
#include "mcn/toy_model.hpp"

namespace mcn {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Ordinary least squares y = slope * x + intercept. nullopt when fewer than
// two distinct x values are given.
inline std::optional<LinearFit> linear_fit(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error("linear_fit: x and y differ in length");
  const double n = static_cast<double>(xs.size());
  if (xs.size() < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  if (sxx <= 0.0) return std::nullopt;
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

struct BenchPoint {
  std::size_t iters = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;
};

struct BenchResult {
  std::vector<BenchPoint> points;
  std::optional<LinearFit> fit;
  std::size_t trials = 0;
};

inline constexpr std::size_t kMinBenchTrials = 10;

// Absorbing flow matrix built from ground-truth flows of a dense random scene.
inline FlowMatrix bench_flow_matrix(const GridShape& shape, std::uint64_t seed) {
  SceneConfig cfg;
  cfg.shape = shape;
  const std::size_t area = shape.node_count();
  cfg.min_boxes = std::max<std::size_t>(1, area / 128);
  cfg.max_boxes = std::max<std::size_t>(1, area / 64);
  cfg.min_gap = 1;
  const SyntheticScene s = synth_scene(cfg, seed);
  return build_flow_matrix(ground_truth_flows(s.mask));
}

inline BenchResult bench_mcl(const GridShape& shape, std::size_t min_iters, std::size_t max_iters,
                             std::size_t trials, std::uint64_t seed, unsigned threads = 1) {
  if (min_iters < 1 || max_iters < min_iters) throw Error("bench_mcl: empty iteration range");
  if (trials < kMinBenchTrials) {
    throw Error("bench_mcl: need at least " + std::to_string(kMinBenchTrials) + " trials per N");
  }
  const FlowMatrix m0 = bench_flow_matrix(shape, seed);
  const std::size_t count = max_iters - min_iters + 1;
  std::vector<std::vector<double>> samples(count);
  MclConfig cfg = MclConfig::inference();
  cfg.early_stop = false;
  cfg.threads = threads;
  // Warm-up so the first measured call does not pay for page faults.
  (void)markov_cluster(m0, cfg);
  // Interleave N within each trial so slow drift affects all N alike.
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t k = 0; k < count; ++k) {
      cfg.max_iters = min_iters + k;
      const auto start = std::chrono::steady_clock::now();
      const MclResult r = markov_cluster(m0, cfg);
      const auto stop = std::chrono::steady_clock::now();
      if (r.iterations_run == 0) throw Error("bench_mcl: no iterations ran");
      samples[k].push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
  }
  BenchResult out;
  out.trials = trials;
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < count; ++k) {
    const auto& v = samples[k];
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size() - 1);
    out.points.push_back({min_iters + k, mean, std::sqrt(var)});
    xs.push_back(static_cast<double>(min_iters + k));
    ys.push_back(mean);
  }
  out.fit = linear_fit(xs, ys);
  return out;
}

inline void write_bench_csv(std::ostream& out, const BenchResult& r) {
  out << "N,mean_ms,std_ms\n";
  for (const BenchPoint& p : r.points) out << p.iters << ',' << p.mean_ms << ',' << p.std_ms << '\n';
  if (r.fit) {
    out << "# fit slope_ms=" << r.fit->slope << " intercept_ms=" << r.fit->intercept
        << " r2=" << r.fit->r2 << " trials=" << r.trials << '\n';
  } else {
    out << "# fit degenerate (single N) trials=" << r.trials << '\n';
  }
}

}  // namespace mcn

#endif  // MCN_BENCH_HPP_
