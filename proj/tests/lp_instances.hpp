#pragma once

// Exact transport optima frozen by tests/oracles/lp_oracle.py.

#include <cstddef>
#include <vector>

namespace testing_support {

struct LpInstance {
  std::size_t n;
  std::size_t k;
  std::vector<double> cost;
  std::vector<double> prior;
  double optimum;
};

inline const std::vector<LpInstance>& lp_instances() {
  static const std::vector<LpInstance> table = {
#include "data/lp_instances.inc"
  };
  return table;
}

}  // namespace testing_support
