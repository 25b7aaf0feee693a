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

#ifndef MCN_FLOW_LABEL_HPP_
#define MCN_FLOW_LABEL_HPP_

#include <string>
#include <vector>

#include "mcn/grid.hpp"

namespace mcn {

// Target attractor of every node. Node m's target distribution is the
// one-hot vector at attractor[m]; it is materialized only on demand.
struct FlowLabel {
  GridShape shape;
  std::vector<NodeId> attractor;

  std::size_t size() const { return attractor.size(); }

  friend bool operator==(const FlowLabel&, const FlowLabel&) = default;
};

inline std::vector<double> expand_one_hot(const FlowLabel& label, NodeId m) {
  if (m >= label.size()) {
    throw Error("expand_one_hot: node " + std::to_string(m) + " out of range");
  }
  std::vector<double> out(label.size(), 0.0);
  out[label.attractor[m]] = 1.0;
  return out;
}

}  // namespace mcn

#endif  // MCN_FLOW_LABEL_HPP_
