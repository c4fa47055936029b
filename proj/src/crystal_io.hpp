#pragma once

#include <string>

#include "crystal.hpp"
#include "elements.hpp"
#include "spacegroup.hpp"

namespace xtal {

// Structured text document for one crystal: schema version, lattice as an
// explicit matrix (rows are cell vectors) or as (k, group), and an atom list
// with element symbols, fractional coordinates, and optional Wyckoff tags.
//
// Reading with a space-group table reconstructs the site annotation by
// matching atoms onto Wyckoff orbits; without a table the geometry is
// returned unannotated. Writing an annotated crystal records the group and
// per-atom letters so the annotation survives the round trip.

Crystal read_crystal(const std::string& path, const ElementTable& elements,
                     const SpaceGroupTable* groups = nullptr);
Crystal read_crystal_text(const std::string& text, const ElementTable& elements,
                          const SpaceGroupTable* groups = nullptr);

void write_crystal(const std::string& path, const Crystal& c,
                   const ElementTable& elements,
                   const SpaceGroupTable* groups = nullptr);
std::string crystal_to_text(const Crystal& c, const ElementTable& elements,
                            const SpaceGroupTable* groups = nullptr);

// Minimal CIF in the P1 setting: cell parameters plus fractional sites.
void export_cif(const std::string& path, const Crystal& c,
                const ElementTable& elements);

// Shortest decimal representation that parses back to the same double.
std::string shortest_double(double x);

}  // namespace xtal
