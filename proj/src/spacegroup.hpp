#pragma once

#include <map>
#include <string>
#include <vector>

#include "common.hpp"
#include "crystal.hpp"
#include "lattice.hpp"

namespace xtal {

// One Wyckoff position: the orbit template {(R_i, t_i)} plus the projection
// data for its basic-coordinate subspace (defined by the first pair).
struct WyckoffPosition {
  char letter = 'a';
  int multiplicity = 0;
  std::vector<Mat3> R;
  std::vector<Vec3> t;

  Mat3 pinv0 = Mat3::Zero();        // pseudo-inverse of R[0]
  std::vector<Mat3> pinv;           // pseudo-inverse of each R[i]
  Mat3 free_proj = Mat3::Zero();    // pinv0 * R[0]; diagonal 0/1
  std::array<bool, 3> free_slot{};  // diagonal of free_proj
  Vec3 slot_scale = Vec3::Zero();   // sqrt((pinv0 pinv0^T)_cc) on free slots
  int dof = 0;

  // {w(R_i f + t_i)} for all i.
  std::vector<Vec3> expand(const Vec3& f_basic) const;
  // Least-squares pull-back through the first pair: pinv0 * v.
  Vec3 project_basic(const Vec3& v) const;
  // Basic coordinate of an orbit point generated by pair i.
  Vec3 basic_from_point(const Vec3& f, int i) const;
};

struct AffineOp {
  Mat3 R;
  Vec3 t;
  Vec3 apply(const Vec3& f) const { return wrap01(Vec3(R * f + t)); }
};

struct SpaceGroupEntry {
  int number = 0;
  std::string symbol;
  LatticeFamily family = LatticeFamily::triclinic;
  std::vector<AffineOp> ops;
  std::vector<WyckoffPosition> wyckoffs;

  int order() const { return static_cast<int>(ops.size()); }
  const WyckoffPosition& position(char letter) const;
  int position_index(char letter) const;  // -1 when absent
};

class SpaceGroupTable {
public:
  // Loads every sg_*.txt under `dir` and validates each entry (exact group
  // closure over rational arithmetic, multiplicities, projector structure).
  static SpaceGroupTable load(const std::string& dir);
  static SpaceGroupEntry load_file(const std::string& path);

  bool has(int number) const { return entries_.count(number) != 0; }
  const SpaceGroupEntry& at(int number) const;
  std::vector<int> numbers() const;

private:
  std::map<int, SpaceGroupEntry> entries_;
};

// True iff every group op maps the atom set onto itself (species preserved)
// with per-atom wrapped fractional distance at most tol.
bool verify_symmetry(const Crystal& c, const SpaceGroupEntry& entry, double tol);

struct BasicSite {
  int wyckoff_index = 0;
  int species = 0;
  Vec3 basic = Vec3::Zero();
};

// Expands basic sites into a full annotated crystal. Basic coordinates whose
// constrained slots deviate from zero by more than 1e-8 raise DomainError.
Crystal expand_structure(const std::vector<BasicSite>& sites, const Mat3& lattice,
                         const SpaceGroupEntry& entry);

// Checks that an annotated crystal's expansion reproduces its atom list
// (exact species, coordinates within tol). Throws DomainError otherwise.
void validate_annotation(const Crystal& c, const SpaceGroupEntry& entry,
                         double tol = 1e-8);

}  // namespace xtal
