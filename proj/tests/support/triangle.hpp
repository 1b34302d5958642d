#pragma once

#include "hiercoord/coupling_graph.hpp"

namespace hctest {

/// Three subsystems, every pair coupled both ways, controlled {1, 3}.
inline hiercoord::TopologySpec triangle_spec(int dim = 1, int horizon = 1) {
  hiercoord::TopologySpec t;
  t.subsystem_count = 3;
  t.controlled = {1, 3};
  t.horizon = horizon;
  for (int s = 1; s <= 3; ++s) {
    for (int d = 1; d <= 3; ++d) {
      if (s != d) t.edges.push_back({{s}, {d}, dim, {}, {}});
    }
  }
  return t;
}

}  // namespace hctest
