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

#ifndef MCN_IO_HPP_
#define MCN_IO_HPP_

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcn/boxgen.hpp"
#include "mcn/fml.hpp"
#include "mcn/flow_maps.hpp"
#include "mcn/geometry.hpp"
#include "mcn/grid.hpp"
#include "mcn/labeling.hpp"
#include "mcn/mcl.hpp"
#include "mcn/toy_model.hpp"

namespace mcn {

// Four-plane binary container: 4 magic bytes, little-endian u32 rows, cols,
// stride, then four planes of rows*cols little-endian float32 in column-major
// node order. "SFG1" holds f0..f3, "SIG1" holds P, S1..S3.
inline constexpr std::string_view kFlowMagic = "SFG1";
inline constexpr std::string_view kSignalMagic = "SIG1";

struct PlaneFile {
  GridShape shape;
  std::array<NodeGrid, 4> planes;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff),
                         static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& source) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw Error(source + ": truncated plane file header");
  }
  return static_cast<std::uint32_t>(bytes[0]) | static_cast<std::uint32_t>(bytes[1]) << 8 |
         static_cast<std::uint32_t>(bytes[2]) << 16 | static_cast<std::uint32_t>(bytes[3]) << 24;
}

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw Error(std::string("plane file: ") + what + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace detail

inline void write_planes(std::ostream& out, std::string_view magic, const GridShape& shape,
                         const std::array<const NodeGrid*, 4>& planes) {
  out.write(magic.data(), 4);
  detail::put_u32(out, detail::checked_u32(shape.rows, "rows"));
  detail::put_u32(out, detail::checked_u32(shape.cols, "cols"));
  detail::put_u32(out, detail::checked_u32(shape.stride, "stride"));
  for (const NodeGrid* plane : planes) {
    if (plane->rows() != shape.rows || plane->cols() != shape.cols) {
      throw Error("write_planes: plane shape does not match grid");
    }
    for (double v : plane->values()) {
      detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  if (!out) throw Error("write_planes: output stream failed");
}

// The node offset is not stored; it is restored as stride / 2.
inline PlaneFile read_planes(std::istream& in, std::string_view magic, const std::string& source) {
  char head[4];
  if (!in.read(head, 4) || std::string_view(head, 4) != magic) {
    throw Error(source + ": not a " + std::string(magic) + " file (bad magic bytes)");
  }
  PlaneFile file;
  file.shape.rows = detail::get_u32(in, source);
  file.shape.cols = detail::get_u32(in, source);
  file.shape.stride = detail::get_u32(in, source);
  file.shape.offset = static_cast<double>(file.shape.stride) / 2;
  try {
    file.shape.validate();
  } catch (const Error& e) {
    throw Error(source + ": " + e.what());
  }
  for (NodeGrid& plane : file.planes) {
    plane = NodeGrid(file.shape);
    for (double& v : plane.values()) {
      unsigned char b[4];
      if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(source + ": truncated plane data");
      const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                                 static_cast<std::uint32_t>(b[1]) << 8 |
                                 static_cast<std::uint32_t>(b[2]) << 16 |
                                 static_cast<std::uint32_t>(b[3]) << 24;
      v = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return file;
}

inline void write_sfg(std::ostream& out, const FlowMaps& fm) {
  write_planes(out, kFlowMagic, fm.shape, {&fm.flow[0], &fm.flow[1], &fm.flow[2], &fm.flow[3]});
}

inline FlowMaps read_sfg(std::istream& in, const std::string& source = "<stream>") {
  PlaneFile file = read_planes(in, kFlowMagic, source);
  FlowMaps fm;
  fm.shape = file.shape;
  fm.flow = std::move(file.planes);
  return fm;
}

inline void write_signals(std::ostream& out, const NodeSignals& sig) {
  write_planes(out, kSignalMagic, sig.shape,
               {&sig.presence, &sig.link[0], &sig.link[1], &sig.link[2]});
}

inline NodeSignals read_signals(std::istream& in, const std::string& source = "<stream>") {
  PlaneFile file = read_planes(in, kSignalMagic, source);
  NodeSignals sig;
  sig.shape = file.shape;
  sig.presence = std::move(file.planes[0]);
  for (std::size_t k = 0; k < 3; ++k) sig.link[k] = std::move(file.planes[k + 1]);
  return sig;
}

// Node features: magic "FEA1", u32 rows, cols, stride, dim, then dim planes
// of float32 in column-major node order.
inline constexpr std::string_view kFeatureMagic = "FEA1";

inline void write_features(std::ostream& out, const NodeFeatures& f) {
  out.write(kFeatureMagic.data(), 4);
  detail::put_u32(out, detail::checked_u32(f.shape.rows, "rows"));
  detail::put_u32(out, detail::checked_u32(f.shape.cols, "cols"));
  detail::put_u32(out, detail::checked_u32(f.shape.stride, "stride"));
  detail::put_u32(out, detail::checked_u32(f.dim, "dim"));
  for (std::size_t c = 0; c < f.dim; ++c) {
    for (NodeId m = 0; m < f.shape.node_count(); ++m) {
      detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(f.at(m, c))));
    }
  }
  if (!out) throw Error("write_features: output stream failed");
}

inline NodeFeatures read_features(std::istream& in, const std::string& source = "<stream>") {
  char head[4];
  if (!in.read(head, 4) || std::string_view(head, 4) != kFeatureMagic) {
    throw Error(source + ": not a FEA1 file (bad magic bytes)");
  }
  NodeFeatures f;
  f.shape.rows = detail::get_u32(in, source);
  f.shape.cols = detail::get_u32(in, source);
  f.shape.stride = detail::get_u32(in, source);
  f.shape.offset = static_cast<double>(f.shape.stride) / 2;
  f.dim = detail::get_u32(in, source);
  try {
    f.shape.validate();
  } catch (const Error& e) {
    throw Error(source + ": " + e.what());
  }
  if (f.dim == 0 || f.dim > 4096) throw Error(source + ": implausible feature dimension");
  f.values.assign(f.shape.node_count() * f.dim, 0.0);
  for (std::size_t c = 0; c < f.dim; ++c) {
    for (NodeId m = 0; m < f.shape.node_count(); ++m) {
      f.at(m, c) = static_cast<double>(std::bit_cast<float>(detail::get_u32(in, source)));
    }
  }
  return f;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path + ": cannot open for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot open for writing");
  return out;
}

// ---- JSON ----------------------------------------------------------------

inline nlohmann::json box_to_json(const RotatedBox& b) {
  return {{"cx", b.cx}, {"cy", b.cy}, {"w", b.w}, {"h", b.h}, {"theta", b.theta}};
}

inline RotatedBox box_from_json(const nlohmann::json& j) {
  return {j.at("cx").get<double>(), j.at("cy").get<double>(), j.at("w").get<double>(),
          j.at("h").get<double>(), j.at("theta").get<double>()};
}

// {"width", "height", "stride", "boxes": [{"cx","cy","w","h","theta"}]}
inline nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const RotatedBox& b : scene.boxes) boxes.push_back(box_to_json(b));
  return {{"width", scene.shape.cols * scene.shape.stride},
          {"height", scene.shape.rows * scene.shape.stride},
          {"stride", scene.shape.stride},
          {"boxes", boxes}};
}

inline Scene scene_from_json(const nlohmann::json& j) {
  try {
    Scene scene;
    const auto stride = j.at("stride").get<std::size_t>();
    const auto width = j.at("width").get<std::size_t>();
    const auto height = j.at("height").get<std::size_t>();
    if (stride == 0 || width % stride != 0 || height % stride != 0) {
      throw Error("scene width/height must be positive multiples of stride");
    }
    scene.shape = {height / stride, width / stride, stride, static_cast<double>(stride) / 2};
    scene.shape.validate();
    for (const auto& b : j.at("boxes")) scene.boxes.push_back(box_from_json(b));
    return scene;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed scene JSON: ") + e.what());
  }
}

inline nlohmann::json grid_to_json(const GridShape& shape) {
  return {{"rows", shape.rows}, {"cols", shape.cols}, {"stride", shape.stride},
          {"offset", shape.offset}};
}

inline GridShape grid_from_json(const nlohmann::json& j) {
  GridShape shape{j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("stride").get<std::size_t>(), 0.0};
  shape.offset = j.contains("offset") ? j.at("offset").get<double>()
                                      : static_cast<double>(shape.stride) / 2;
  shape.validate();
  return shape;
}

// {"attractor": [...], "clusters": {"id": [...]}, "background": [...],
//  "iterations_run": k, "grid": {...}}
inline nlohmann::json clusters_to_json(const ClusterAssignment& a, std::size_t iterations_run,
                                       const GridShape& shape) {
  nlohmann::json clusters = nlohmann::json::object();
  for (const auto& [attr, members] : a.clusters) clusters[std::to_string(attr)] = members;
  return {{"attractor", a.attractor},
          {"clusters", clusters},
          {"background", a.background},
          {"iterations_run", iterations_run},
          {"grid", grid_to_json(shape)}};
}

struct ClusterFile {
  ClusterAssignment assignment;
  std::size_t iterations_run = 0;
  std::optional<GridShape> shape;
};

inline ClusterFile clusters_from_json(const nlohmann::json& j) {
  try {
    ClusterFile file;
    file.assignment.attractor = j.at("attractor").get<std::vector<NodeId>>();
    for (const auto& [key, members] : j.at("clusters").items()) {
      file.assignment.clusters[std::stoul(key)] = members.get<std::vector<NodeId>>();
    }
    file.assignment.background = j.at("background").get<std::vector<NodeId>>();
    file.iterations_run = j.value("iterations_run", std::size_t{0});
    if (j.contains("grid")) file.shape = grid_from_json(j.at("grid"));
    return file;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed cluster JSON: ") + e.what());
  } catch (const std::logic_error& e) {
    throw Error(std::string("malformed cluster JSON: ") + e.what());
  }
}

// [{"corners": [[x, y] x 4], "cluster": id}]
inline nlohmann::json detections_to_json(const std::vector<Detection>& dets) {
  nlohmann::json out = nlohmann::json::array();
  for (const Detection& d : dets) {
    nlohmann::json corners = nlohmann::json::array();
    for (const Point2& p : d.box.corners()) corners.push_back({p.x, p.y});
    out.push_back({{"corners", corners}, {"cluster", d.cluster}});
  }
  return out;
}

inline std::vector<Detection> detections_from_json(const nlohmann::json& j) {
  try {
    std::vector<Detection> out;
    for (const auto& item : j) {
      std::array<Point2, 4> k;
      const auto& corners = item.at("corners");
      if (corners.size() != 4) throw Error("detection needs exactly 4 corners");
      for (std::size_t i = 0; i < 4; ++i) {
        k[i] = {corners[i].at(0).get<double>(), corners[i].at(1).get<double>()};
      }
      out.push_back({item.value("cluster", NodeId{0}), RotatedBox::from_corners(k)});
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed detections JSON: ") + e.what());
  }
}

namespace detail {

inline nlohmann::json tensor_json(const std::vector<double>& theta, std::size_t offset,
                                  std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return {{"shape", shape},
          {"data", std::vector<double>(theta.begin() + static_cast<std::ptrdiff_t>(offset),
                                       theta.begin() + static_cast<std::ptrdiff_t>(offset + n))}};
}

inline void tensor_from_json(const nlohmann::json& j, std::vector<double>& theta,
                             std::size_t offset, const std::vector<std::size_t>& shape,
                             const char* name) {
  if (j.at("shape").get<std::vector<std::size_t>>() != shape) {
    throw Error(std::string("model JSON: tensor ") + name + " has the wrong shape");
  }
  const auto data = j.at("data").get<std::vector<double>>();
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (data.size() != n) throw Error(std::string("model JSON: tensor ") + name + " size mismatch");
  std::copy(data.begin(), data.end(), theta.begin() + static_cast<std::ptrdiff_t>(offset));
}

}  // namespace detail

// {"features", "hidden", "W1", "b1", "W2", "b2": {"shape", "data"}, "fml": {...}}
inline nlohmann::json model_to_json(const ToyPredictor& m) {
  const auto& th = m.parameters();
  const FmlParams f = m.fml();
  return {{"features", m.features()},
          {"hidden", m.hidden()},
          {"W1", detail::tensor_json(th, m.w1_offset(), {m.hidden(), m.input_dim()})},
          {"b1", detail::tensor_json(th, m.b1_offset(), {m.hidden()})},
          {"W2", detail::tensor_json(th, m.w2_offset(), {ToyPredictor::kOutputs, m.hidden()})},
          {"b2", detail::tensor_json(th, m.b2_offset(), {ToyPredictor::kOutputs})},
          {"fml", {{"alpha", f.alpha}, {"beta", f.beta}, {"gamma", f.gamma}}}};
}

inline ToyPredictor model_from_json(const nlohmann::json& j) {
  try {
    ToyPredictor m(j.at("features").get<std::size_t>(), j.at("hidden").get<std::size_t>());
    auto& th = m.parameters();
    detail::tensor_from_json(j.at("W1"), th, m.w1_offset(), {m.hidden(), m.input_dim()}, "W1");
    detail::tensor_from_json(j.at("b1"), th, m.b1_offset(), {m.hidden()}, "b1");
    detail::tensor_from_json(j.at("W2"), th, m.w2_offset(), {ToyPredictor::kOutputs, m.hidden()},
                             "W2");
    detail::tensor_from_json(j.at("b2"), th, m.b2_offset(), {ToyPredictor::kOutputs}, "b2");
    const auto& f = j.at("fml");
    const FmlParams p{f.at("alpha").get<double>(), f.at("beta").get<double>(),
                      f.at("gamma").get<double>()};
    p.validate();
    m.set_fml(p);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed model JSON: ") + e.what());
  }
}

inline nlohmann::json read_json(std::istream& in, const std::string& source) {
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(source + ": invalid JSON: " + e.what());
  }
}

}  // namespace mcn

#endif  // MCN_IO_HPP_
