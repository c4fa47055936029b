#pragma once

#include <map>
#include <string>
#include <vector>

#include "common.hpp"

namespace xtal {

// Per-site annotation tying an expanded structure back to its basic
// (symmetry-reduced) description.
struct SiteInfo {
  int wyckoff_index = 0;  // index into the group entry's position list
  int species = 0;        // element table index shared by the whole orbit
  Vec3 basic = Vec3::Zero();
};

struct Crystal {
  Mat3 lattice = Mat3::Identity();  // columns are the cell vectors
  std::vector<int> species;         // per atom, element table index
  std::vector<Vec3> frac;           // per atom, wrapped into [0,1)

  // Optional symmetry annotation. group == 0 means unannotated.
  int group = 0;
  std::vector<SiteInfo> sites;
  std::vector<int> site_of_atom;  // per atom -> index into sites

  int natoms() const { return static_cast<int>(frac.size()); }
  int nsites() const { return static_cast<int>(sites.size()); }
  bool annotated() const { return group != 0; }

  Vec3 cartesian(int i) const { return lattice * frac[static_cast<size_t>(i)]; }
  double volume() const { return lattice.determinant(); }
};

// Species index -> atom count.
std::map<int, int> composition(const Crystal& c);

// Counts divided by their gcd and sorted ascending, e.g. {4,4} -> {1,1}.
// Two crystals can exchange element assignments iff these agree.
std::vector<int> ratio_signature(const std::map<int, int>& comp);

class ElementTable;
// "Na4 Cl4" style listing in species-index order.
std::string formula(const Crystal& c, const ElementTable& elements);

}  // namespace xtal
