#pragma once

#include <string>
#include <vector>

#include "eflab/algebra.hpp"
#include "eflab/random.hpp"

namespace eflab::test_support {

inline const std::vector<std::string>& default_battery() {
  static const std::vector<std::string> specs = {"M2", "M3", "M4", "C+C:1/2,1/2", "C+C:1/3,2/3", "M2+M3:0.4,0.6"};
  return specs;
}

inline Element random_element(const AlgebraRef& alg, Rng& rng) { return ginibre_element(alg, rng); }

}  // namespace eflab::test_support
