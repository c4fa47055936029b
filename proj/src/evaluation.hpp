#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crystal.hpp"

namespace xtal {

struct MatchSettings {
  double stol = 0.5;       // site tolerance, units of cbrt(V/N)
  double angle_tol = 10.0; // degrees
  double ltol = 0.3;       // relative length tolerance
};

struct MatchReport {
  bool matched = false;
  std::optional<double> rmsd;  // normalized by cbrt(V/N); present iff matched
};

// Periodic structure matcher: compares cell parameters, then searches
// translations seeded by anchor-atom pairings of the rarest element, with a
// per-element minimum-cost assignment and two rounds of centroid refinement.
// Symmetric in its arguments; invariant to rigid rotation, periodic
// translation, and atom reindexing of either input.
MatchReport match_structures(const Crystal& pred, const Crystal& ref,
                             const MatchSettings& s = MatchSettings{});

double match_rate(const std::vector<MatchReport>& reports);
double mean_rmsd(const std::vector<MatchReport>& reports);

// True iff every pairwise Cartesian distance, including periodic images over
// the 27 neighboring cells, exceeds 0.5 angstrom.
bool structural_validity(const Crystal& c);
extern const double kMinInteratomicDistance;

// One-dimensional Wasserstein-1 distance between empirical samples.
double wasserstein1(std::vector<double> a, std::vector<double> b);

// Density in g/cm^3 from the atomic-mass column and the cell volume.
class ElementTable;
struct PropertyStats {
  double d_density = 0.0;
  double d_nelem = 0.0;
};
double crystal_density(const Crystal& c, const ElementTable& elements);
PropertyStats property_stats(const std::vector<Crystal>& gen,
                             const std::vector<Crystal>& ref,
                             const ElementTable& elements);

// Tabular report: one row per pair (index, matched, rmsd or "-").
void write_match_table(const std::string& path,
                       const std::vector<MatchReport>& reports);

}  // namespace xtal
