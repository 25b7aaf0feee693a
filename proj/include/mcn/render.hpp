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

#ifndef MCN_RENDER_HPP_
#define MCN_RENDER_HPP_

#include <array>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mcn/boxgen.hpp"
#include "mcn/flow_maps.hpp"
#include "mcn/geometry.hpp"
#include "mcn/labeling.hpp"
#include "mcn/mcl.hpp"

namespace mcn {

struct RenderStyle {
  double edge_width_min = 0.5;
  double edge_width_range = 4.0;
  double node_radius = 2.5;
  double attractor_radius = 4.0;
};

struct RenderInput {
  Scene scene;
  const FlowMaps* flows = nullptr;
  const ClusterAssignment* clusters = nullptr;
  std::vector<RotatedBox> predicted;
};

inline double edge_width(double flow, const RenderStyle& style = {}) {
  return style.edge_width_min + flow * style.edge_width_range;
}

namespace detail {

// Fixed-precision numbers keep the output byte-stable.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline const char* cluster_color(std::size_t k) {
  static constexpr std::array<const char*, 8> palette = {
      "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#a6761d", "#17becf", "#8c564b"};
  return palette[k % palette.size()];
}

inline void polygon(std::ostringstream& out, const RotatedBox& b, const char* color) {
  out << "<polygon points=\"";
  const auto c = b.corners();
  for (std::size_t k = 0; k < c.size(); ++k) {
    out << (k ? " " : "") << num(c[k].x) << ',' << num(c[k].y);
  }
  out << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
}

}  // namespace detail

inline std::string render_svg(const RenderInput& in, const RenderStyle& style = {}) {
  const GridShape& s = in.scene.shape;
  s.validate();
  if (in.flows != nullptr && !in.flows->shape.same_lattice(s)) {
    throw Error("render_svg: flow maps do not match the scene grid");
  }
  if (in.clusters != nullptr && in.clusters->attractor.size() != s.node_count()) {
    throw Error("render_svg: cluster assignment does not match the scene grid");
  }
  using detail::num;
  const double width = static_cast<double>(s.cols * s.stride);
  const double height = static_cast<double>(s.rows * s.stride);
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" fill=\"white\"/>\n";

  if (in.flows != nullptr) {
    out << "<g id=\"flows\" stroke=\"#555555\" fill=\"none\">\n";
    const double reach = 0.45 * static_cast<double>(s.stride);
    for (NodeId m = 0; m < s.node_count(); ++m) {
      const Point2 p = node_center(m, s);
      const double f0 = in.flows->at(m, Direction::self);
      if (f0 > 0) {
        const double r = 0.3 * static_cast<double>(s.stride);
        out << "<path class=\"self\" d=\"M " << num(p.x - r / 2) << ' ' << num(p.y) << " A "
            << num(r / 2) << ' ' << num(r / 2) << " 0 1 1 " << num(p.x + r / 2) << ' '
            << num(p.y) << "\" stroke-width=\"" << num(edge_width(f0, style)) << "\"/>\n";
      }
      for (Direction d : {Direction::bottom, Direction::right, Direction::left}) {
        const double f = in.flows->at(m, d);
        const auto nb = neighbor(m, d, s);
        if (f <= 0 || !nb) continue;
        const Point2 q = node_center(*nb, s);
        const Point2 dir = (q - p) * (1.0 / static_cast<double>(s.stride));
        const Point2 e = p + dir * reach;
        out << "<line x1=\"" << num(p.x) << "\" y1=\"" << num(p.y) << "\" x2=\"" << num(e.x)
            << "\" y2=\"" << num(e.y) << "\" stroke-width=\"" << num(edge_width(f, style))
            << "\"/>\n";
      }
    }
    out << "</g>\n";
  }

  out << "<g id=\"nodes\">\n";
  std::map<NodeId, std::size_t> color_of;
  if (in.clusters != nullptr) {
    for (const auto& [attractor, members] : in.clusters->clusters) {
      color_of.emplace(attractor, color_of.size());
    }
  }
  for (NodeId m = 0; m < s.node_count(); ++m) {
    const Point2 p = node_center(m, s);
    const char* fill = "#bbbbbb";
    if (in.clusters != nullptr && !in.clusters->is_background(m)) {
      const auto it = color_of.find(in.clusters->attractor[m]);
      if (it != color_of.end()) fill = detail::cluster_color(it->second);
    }
    out << "<circle cx=\"" << num(p.x) << "\" cy=\"" << num(p.y) << "\" r=\""
        << num(style.node_radius) << "\" fill=\"" << fill << "\"/>\n";
  }
  for (const auto& [attractor, idx] : color_of) {
    const Point2 p = node_center(attractor, s);
    out << "<circle class=\"attractor\" cx=\"" << num(p.x) << "\" cy=\"" << num(p.y)
        << "\" r=\"" << num(style.attractor_radius) << "\" fill=\"blue\"/>\n";
  }
  out << "</g>\n";

  out << "<g id=\"ground-truth\">\n";
  for (const RotatedBox& b : in.scene.boxes) detail::polygon(out, b, "red");
  out << "</g>\n<g id=\"predicted\">\n";
  for (const RotatedBox& b : in.predicted) detail::polygon(out, b, "yellow");
  out << "</g>\n</svg>\n";
  return out.str();
}

}  // namespace mcn

#endif  // MCN_RENDER_HPP_
