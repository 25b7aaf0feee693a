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

#ifndef MCN_GEOMETRY_HPP_
#define MCN_GEOMETRY_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "mcn/common.hpp"

namespace mcn {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
  Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
  Point2 operator*(double s) const { return {x * s, y * s}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }

// Wraps an angle into (-pi/2, pi/2].
inline double wrap_half_turn(double theta) {
  constexpr double pi = std::numbers::pi;
  double t = std::fmod(theta, pi);
  if (t <= -pi / 2) t += pi;
  if (t > pi / 2) t -= pi;
  return t;
}

// Oriented rectangle in pixel coordinates. The major axis points along
// (cos theta, sin theta); with image rows growing downward, positive theta
// tilts the axis toward +y.
struct RotatedBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  double theta = 0.0;

  Point2 center() const { return {cx, cy}; }
  Point2 major_axis() const { return {std::cos(theta), std::sin(theta)}; }
  Point2 minor_axis() const { return {-std::sin(theta), std::cos(theta)}; }
  double area() const { return w * h; }

  friend bool operator==(const RotatedBox&, const RotatedBox&) = default;

  // Same rectangle with w >= h and theta in (-pi/2, pi/2]. When w == h the
  // axis closer to horizontal is chosen as major.
  RotatedBox normalized() const {
    RotatedBox out = *this;
    if (out.h > out.w) {
      std::swap(out.w, out.h);
      out.theta += std::numbers::pi / 2;
    }
    out.theta = wrap_half_turn(out.theta);
    if (out.w == out.h && std::abs(out.theta) > std::numbers::pi / 4) {
      out.theta = wrap_half_turn(out.theta + std::numbers::pi / 2);
    }
    return out;
  }

  // Corners for sign patterns (+,+), (+,-), (-,-), (-,+) of (major, minor).
  std::array<Point2, 4> corners() const {
    const Point2 c = center();
    const Point2 u = major_axis() * (w / 2);
    const Point2 v = minor_axis() * (h / 2);
    return {c + u + v, c + u - v, c - u - v, c - u + v};
  }

  static RotatedBox from_corners(const std::array<Point2, 4>& k) {
    const Point2 c = (k[0] + k[1] + k[2] + k[3]) * 0.25;
    const Point2 half_u = (k[0] + k[1]) * 0.5 - c;
    const Point2 half_v = (k[0] + k[3]) * 0.5 - c;
    RotatedBox out;
    out.cx = c.x;
    out.cy = c.y;
    out.w = 2 * std::hypot(half_u.x, half_u.y);
    out.h = 2 * std::hypot(half_v.x, half_v.y);
    out.theta = std::atan2(half_u.y, half_u.x);
    return out.normalized();
  }

  // Boundary-inclusive containment.
  bool contains(const Point2& p, double tolerance = 1e-9) const {
    const Point2 d = p - center();
    return std::abs(dot(d, major_axis())) <= w / 2 + tolerance &&
           std::abs(dot(d, minor_axis())) <= h / 2 + tolerance;
  }
};

inline double polygon_area(const std::vector<Point2>& poly) {
  double twice = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    twice += cross(poly[k], poly[(k + 1) % poly.size()]);
  }
  return std::abs(twice) / 2;
}

// Sutherland-Hodgman clip of `subject` by the convex counter-clockwise
// polygon `clip`.
inline std::vector<Point2> clip_convex(std::vector<Point2> subject,
                                       const std::vector<Point2>& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Point2 a = clip[e];
    const Point2 b = clip[(e + 1) % clip.size()];
    auto side = [&](const Point2& p) { return cross(b - a, p - a); };
    std::vector<Point2> next;
    for (std::size_t k = 0; k < subject.size(); ++k) {
      const Point2 p = subject[k];
      const Point2 q = subject[(k + 1) % subject.size()];
      const double sp = side(p);
      const double sq = side(q);
      if (sp >= 0) next.push_back(p);
      if ((sp >= 0) != (sq >= 0)) {
        const double t = sp / (sp - sq);
        next.push_back(p + (q - p) * t);
      }
    }
    subject = std::move(next);
  }
  return subject;
}

inline std::vector<Point2> ccw_corners(const RotatedBox& box) {
  const auto k = box.corners();
  std::vector<Point2> poly(k.begin(), k.end());
  double twice = 0.0;
  for (std::size_t i = 0; i < 4; ++i) twice += cross(poly[i], poly[(i + 1) % 4]);
  if (twice < 0) std::reverse(poly.begin(), poly.end());
  return poly;
}

inline double intersection_area(const RotatedBox& a, const RotatedBox& b) {
  return polygon_area(clip_convex(ccw_corners(a), ccw_corners(b)));
}

inline double rotated_iou(const RotatedBox& a, const RotatedBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace mcn

#endif  // MCN_GEOMETRY_HPP_
