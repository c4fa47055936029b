#include "elements.hpp"

#include <fstream>
#include <sstream>

namespace xtal {

ElementTable ElementTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open element table: " + path);

  ElementTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ElementInfo e;
    if (!(ss >> e.symbol >> e.z >> e.period >> e.group >>
          e.electronegativity >> e.covalent_radius >> e.atomic_mass)) {
      throw ParseError("element table line " + std::to_string(lineno) +
                       ": expected 7 columns");
    }
    if (e.z <= 0 || e.period <= 0 || e.group <= 0 || e.covalent_radius <= 0 ||
        e.atomic_mass <= 0) {
      throw ParseError("element table line " + std::to_string(lineno) +
                       ": non-positive field");
    }
    int idx = static_cast<int>(t.rows_.size());
    if (!t.by_symbol_.emplace(e.symbol, idx).second) {
      throw ParseError("duplicate element symbol: " + e.symbol);
    }
    t.rows_.push_back(e);
  }
  if (t.rows_.empty()) throw ParseError("element table is empty: " + path);

  // Column statistics for z-scored descriptors.
  Descriptor sum = Descriptor::Zero();
  Descriptor sumsq = Descriptor::Zero();
  Descriptor count = Descriptor::Zero();
  for (const auto& e : t.rows_) {
    double cols[5] = {double(e.z), double(e.period), double(e.group),
                      e.electronegativity, e.covalent_radius};
    for (int c = 0; c < 5; ++c) {
      if (c == 3 && cols[c] == 0.0) continue;
      sum[c] += cols[c];
      sumsq[c] += cols[c] * cols[c];
      count[c] += 1.0;
    }
  }
  for (int c = 0; c < 5; ++c) {
    double m = sum[c] / count[c];
    double var = sumsq[c] / count[c] - m * m;
    t.mean_[c] = m;
    t.stdev_[c] = var > 0 ? std::sqrt(var) : 1.0;
  }
  return t;
}

const ElementInfo& ElementTable::at(int idx) const {
  if (idx < 0 || idx >= size()) throw DomainError("element index out of range");
  return rows_[static_cast<size_t>(idx)];
}

int ElementTable::index_of(const std::string& symbol) const {
  auto it = by_symbol_.find(symbol);
  if (it == by_symbol_.end()) throw DomainError("unknown element: " + symbol);
  return it->second;
}

bool ElementTable::has(const std::string& symbol) const {
  return by_symbol_.count(symbol) != 0;
}

ElementTable::Descriptor ElementTable::descriptor(int idx) const {
  const ElementInfo& e = at(idx);
  Descriptor v;
  v << double(e.z), double(e.period), double(e.group), e.electronegativity,
      e.covalent_radius;
  if (e.electronegativity == 0.0) v[3] = mean_[3];
  return (v - mean_).cwiseQuotient(stdev_);
}

}  // namespace xtal
