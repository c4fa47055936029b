#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "common.hpp"

namespace xtal {

struct ElementInfo {
  std::string symbol;
  int z = 0;
  int period = 0;
  int group = 0;
  double electronegativity = 0.0;  // 0 marks "undefined" (noble gases)
  double covalent_radius = 0.0;    // Angstrom
  double atomic_mass = 0.0;
};

// Element table backing species encoding and substitution descriptors.
class ElementTable {
public:
  static ElementTable load(const std::string& path);
  // The table shipped in data/elements.tsv, located via XTALGEN_DATA_DIR or
  // an explicit path. Throws ParseError on malformed rows.

  int size() const { return static_cast<int>(rows_.size()); }
  const ElementInfo& at(int idx) const;
  // Index for a symbol; throws DomainError if unknown.
  int index_of(const std::string& symbol) const;
  bool has(const std::string& symbol) const;

  // (atomic number, period, group, electronegativity, covalent radius),
  // each z-scored across the table. Rows with electronegativity 0 are
  // excluded from that column's statistics and get the column mean
  // (z-score 0).
  using Descriptor = Eigen::Matrix<double, 5, 1>;
  Descriptor descriptor(int idx) const;

private:
  std::vector<ElementInfo> rows_;
  std::unordered_map<std::string, int> by_symbol_;
  Descriptor mean_ = Descriptor::Zero();
  Descriptor stdev_ = Descriptor::Ones();
};

}  // namespace xtal
