#pragma once

#include <array>

#include "common.hpp"

namespace xtal {

// Lattice matrices hold the three cell vectors as columns. All encode/decode
// operations are O(3)-invariant: rotating the cell changes only the discarded
// orthogonal factor.

enum class LatticeFamily {
  triclinic,
  monoclinic,
  orthorhombic,
  tetragonal,
  hexagonal,
  cubic,
};

const char* family_name(LatticeFamily f);

// The six symmetric basis matrices spanning symmetric 3x3 matrices.
// Mutually orthogonal under the Frobenius inner product with squared norms
// (2, 2, 2, 2, 6, 3).
const std::array<Mat3, 6>& k_basis();

// S = sum_i k_i B_i.
Mat3 symmetric_from_k(const Vec6& k);

// k_i = <S, B_i>_F / <B_i, B_i>_F, computed from symmetrized entries so the
// result never depends on an eigenbasis.
Vec6 k_from_symmetric(const Mat3& S);

// Matrix exponential / logarithm for symmetric (resp. SPD) 3x3 matrices via
// a single eigendecomposition with descending eigenvalue order.
Mat3 exp_symmetric(const Mat3& S);
Mat3 log_spd(const Mat3& J);

struct PolarResult {
  Mat3 Q;  // orthogonal, det +1 when det(L) > 0
  Mat3 S;  // symmetric, L = Q * exp(S)
};

// J = L^T L = U diag(lambda) U^T; S = 1/2 U log(lambda) U^T; Q = L exp(-S).
// Throws DomainError when det(L) <= 0 or entries are not finite.
PolarResult polar_decompose(const Mat3& L);

Vec6 k_from_lattice(const Mat3& L);

// exp(sum k_i B_i): the rotation-free representative of the encoded cell.
Mat3 lattice_from_k(const Vec6& k);

struct CellParams {
  double a = 1, b = 1, c = 1;
  double alpha = 90, beta = 90, gamma = 90;  // degrees
};

CellParams params_from_lattice(const Mat3& L);

// Canonical lower-triangular cell: third vector along z, second in the yz
// plane. Throws DomainError when the parameters do not describe a positive
// definite cell.
Mat3 lattice_from_params(const CellParams& p);

LatticeFamily family_of_group(int group);  // 1..230

struct FamilyMask {
  LatticeFamily family = LatticeFamily::triclinic;
  Vec6 m = Vec6::Ones();               // table flags (1 = unconstrained row entry)
  Vec6 fixed = Vec6::Zero();           // pinned values
  std::array<bool, 6> has_fixed{};     // which dimensions carry a pinned value

  // Dimensions the diffusion actually evolves: flagged free and not pinned.
  Vec6 free_mask() const {
    Vec6 f;
    for (int i = 0; i < 6; ++i) f[i] = (m[i] != 0.0 && !has_fixed[i]) ? 1.0 : 0.0;
    return f;
  }
};

FamilyMask family_mask(int group);

// Pinned dims take their fixed value, other constrained dims become 0, free
// dims pass through.
Vec6 project_k(const Vec6& k, const FamilyMask& mask);

// True when the cell parameters satisfy the family's shape row
// (angles within 1e-8 degrees, lengths within 1e-10 relative).
bool lattice_params_check(const Mat3& L, LatticeFamily family);

}  // namespace xtal
