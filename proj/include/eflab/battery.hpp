#pragma once

#include <string>
#include <vector>

#include "eflab/parser.hpp"

namespace eflab {

/// Fixed sentence battery. The first ten are prenex sentences of the normed
/// space language (linear terms only), so almost isometries move their
/// values continuously; the last ten use products, adjoints and the unit.
inline const std::vector<std::string>& battery_texts() {
  static const std::vector<std::string> texts = {
      "sup x1:C1. n2(x1)",
      "sup x1:C1. inf x2:C1. n2(x1 - x2)",
      "sup x1:C1. inf x2:C1. max(n2(x1 + x2) -. 1, 1 -. n2(x1 + x2))",
      "inf x1:C1. sup x2:C1. n2(x1 + x2)",
      "sup x1:C1. sup x2:C1. n2(x1 - x2)",
      "sup x1:C1. inf x2:C2. n2(x1 - 0.5*x2)",
      "sup x1:C1. inf x2:C1. inf x3:C1. n2(x1 - 0.5*x2 - 0.5*x3)",
      "sup x1:C1. inf x2:C1. max(n2(x2) -. 0.5, n2(x1 - x2) -. 0.5)",
      "sup x1:C1. sup x2:C1. inf x3:C1. n2(x1 + x2 - 2*x3)",
      "sup x1:C1. inf x2:C1. reip(x1, x2) + 1",
      "sup x1:C1. sup x2:C1. n2(x1*x2 - x2*x1)",
      "inf x1:C1. max(max(n2(x1*x1 - x1), n2(x1^* - x1)), max(reip(x1, one) -. 0.5, 0.5 -. reip(x1, one)))",
      "sup x1:U. inf x2:U. n2(x1*x2 - x2*x1)",
      "inf x1:U. n2(x1*x1 + one)",
      "sup x1:C1. inf x2:U. n2(x1*x2 - x2^*)",
      "sup x1:C1. inf x2:C1. n2(x1*x2 - x2*x1)",
      "inf x1:U. inf x2:U. n2(x1*x2 + x2*x1)",
      "sup x1:C1. sup x2:C1. imip(x1*x2*x2, x2*x1)",
      "inf x1:C1. sup x2:U. n2(x1*x2 - x2*x1) + n2(x1 - one)",
      "sup x1:U. inf x2:C1. n2(x1*x2 - one)",
  };
  return texts;
}

inline std::vector<FormulaPtr> sentence_battery() {
  std::vector<FormulaPtr> out;
  for (const auto& t : battery_texts()) out.push_back(parse_sentence(t));
  return out;
}

/// The ten normed-space sentences at the head of the battery.
inline std::vector<FormulaPtr> prenex_battery() {
  auto all = sentence_battery();
  all.resize(10);
  return all;
}

}  // namespace eflab
