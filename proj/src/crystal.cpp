#include "crystal.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "elements.hpp"

namespace xtal {

std::map<int, int> composition(const Crystal& c) {
  std::map<int, int> comp;
  for (int s : c.species) comp[s]++;
  return comp;
}

std::vector<int> ratio_signature(const std::map<int, int>& comp) {
  std::vector<int> counts;
  counts.reserve(comp.size());
  int g = 0;
  for (const auto& [sp, n] : comp) {
    counts.push_back(n);
    g = std::gcd(g, n);
  }
  if (g > 1)
    for (int& n : counts) n /= g;
  std::sort(counts.begin(), counts.end());
  return counts;
}

std::string formula(const Crystal& c, const ElementTable& elements) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [sp, n] : composition(c)) {
    if (!first) out << ' ';
    first = false;
    out << elements.at(sp).symbol << n;
  }
  return out.str();
}

}  // namespace xtal
