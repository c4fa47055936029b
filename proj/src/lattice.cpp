#include "lattice.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>

namespace xtal {

const char* family_name(LatticeFamily f) {
  switch (f) {
    case LatticeFamily::triclinic: return "triclinic";
    case LatticeFamily::monoclinic: return "monoclinic";
    case LatticeFamily::orthorhombic: return "orthorhombic";
    case LatticeFamily::tetragonal: return "tetragonal";
    case LatticeFamily::hexagonal: return "hexagonal";
    case LatticeFamily::cubic: return "cubic";
  }
  return "?";
}

const std::array<Mat3, 6>& k_basis() {
  static const std::array<Mat3, 6> basis = [] {
    std::array<Mat3, 6> b;
    for (auto& m : b) m.setZero();
    b[0](0, 1) = b[0](1, 0) = 1;          // k1
    b[1](0, 2) = b[1](2, 0) = 1;          // k2
    b[2](1, 2) = b[2](2, 1) = 1;          // k3
    b[3](0, 0) = 1; b[3](1, 1) = -1;      // k4
    b[4](0, 0) = 1; b[4](1, 1) = 1; b[4](2, 2) = -2;  // k5
    b[5].setIdentity();                   // k6
    return b;
  }();
  return basis;
}

Mat3 symmetric_from_k(const Vec6& k) {
  const auto& B = k_basis();
  Mat3 S = Mat3::Zero();
  for (int i = 0; i < 6; ++i) S += k[i] * B[i];
  return S;
}

Vec6 k_from_symmetric(const Mat3& S) {
  // Symmetrized entries; each coefficient is an entrywise linear functional.
  double s01 = 0.5 * (S(0, 1) + S(1, 0));
  double s02 = 0.5 * (S(0, 2) + S(2, 0));
  double s12 = 0.5 * (S(1, 2) + S(2, 1));
  double s00 = S(0, 0), s11 = S(1, 1), s22 = S(2, 2);
  Vec6 k;
  k[0] = s01;
  k[1] = s02;
  k[2] = s12;
  k[3] = 0.5 * (s00 - s11);
  k[4] = (s00 + s11 - 2.0 * s22) / 6.0;
  k[5] = (s00 + s11 + s22) / 3.0;
  return k;
}

namespace {

struct EigenSym {
  Vec3 lambda;  // descending
  Mat3 U;       // columns match lambda order
};

EigenSym eigen_descending(const Mat3& A) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(A);
  if (es.info() != Eigen::Success) throw DomainError("eigendecomposition failed");
  EigenSym r;
  // Eigen returns ascending order; reverse it.
  for (int i = 0; i < 3; ++i) {
    r.lambda[i] = es.eigenvalues()[2 - i];
    r.U.col(i) = es.eigenvectors().col(2 - i);
  }
  return r;
}

Mat3 apply_spectral(const Mat3& A, double (*f)(double)) {
  EigenSym e = eigen_descending(A);
  Mat3 out = Mat3::Zero();
  for (int i = 0; i < 3; ++i)
    out += f(e.lambda[i]) * (e.U.col(i) * e.U.col(i).transpose());
  return out;
}

void require_finite(const Mat3& L) {
  if (!L.allFinite()) throw DomainError("lattice matrix has non-finite entries");
}

}  // namespace

Mat3 exp_symmetric(const Mat3& S) {
  Mat3 sym = 0.5 * (S + S.transpose());
  bool diagonal = true;
  for (int r = 0; r < 3 && diagonal; ++r)
    for (int c = 0; c < 3; ++c)
      if (r != c && sym(r, c) != 0.0) { diagonal = false; break; }
  if (diagonal) {
    // Keeps axis-aligned cells exactly axis-aligned (cubic k gives an exact
    // diagonal lattice rather than one polluted by eigensolver round-off).
    Mat3 out = Mat3::Zero();
    for (int i = 0; i < 3; ++i) out(i, i) = std::exp(sym(i, i));
    return out;
  }
  return apply_spectral(sym, +[](double x) { return std::exp(x); });
}

Mat3 log_spd(const Mat3& J) {
  EigenSym e = eigen_descending(0.5 * (J + J.transpose()));
  if (e.lambda[2] <= 0.0)
    throw DomainError("matrix is not positive definite");
  Mat3 out = Mat3::Zero();
  for (int i = 0; i < 3; ++i)
    out += std::log(e.lambda[i]) * (e.U.col(i) * e.U.col(i).transpose());
  return out;
}

PolarResult polar_decompose(const Mat3& L) {
  require_finite(L);
  if (L.determinant() <= 0.0)
    throw DomainError("lattice matrix must have positive determinant");
  Mat3 J = L.transpose() * L;
  EigenSym e = eigen_descending(0.5 * (J + J.transpose()));
  if (e.lambda[2] <= 0.0) throw DomainError("degenerate lattice matrix");
  PolarResult r;
  r.S = Mat3::Zero();
  Mat3 inv_sqrt = Mat3::Zero();
  for (int i = 0; i < 3; ++i) {
    Mat3 proj = e.U.col(i) * e.U.col(i).transpose();
    r.S += 0.5 * std::log(e.lambda[i]) * proj;
    inv_sqrt += (1.0 / std::sqrt(e.lambda[i])) * proj;
  }
  r.Q = L * inv_sqrt;
  return r;
}

Vec6 k_from_lattice(const Mat3& L) {
  return k_from_symmetric(polar_decompose(L).S);
}

Mat3 lattice_from_k(const Vec6& k) {
  return exp_symmetric(symmetric_from_k(k));
}

CellParams params_from_lattice(const Mat3& L) {
  require_finite(L);
  if (L.determinant() <= 0.0)
    throw DomainError("lattice matrix must have positive determinant");
  Vec3 l1 = L.col(0), l2 = L.col(1), l3 = L.col(2);
  CellParams p;
  p.a = l1.norm();
  p.b = l2.norm();
  p.c = l3.norm();
  auto angle = [](const Vec3& u, const Vec3& v) {
    double c = u.dot(v) / (u.norm() * v.norm());
    c = std::clamp(c, -1.0, 1.0);
    return rad2deg(std::acos(c));
  };
  p.alpha = angle(l2, l3);
  p.beta = angle(l1, l3);
  p.gamma = angle(l1, l2);
  return p;
}

Mat3 lattice_from_params(const CellParams& p) {
  if (!(p.a > 0 && p.b > 0 && p.c > 0))
    throw DomainError("cell lengths must be positive");
  for (double ang : {p.alpha, p.beta, p.gamma})
    if (!(ang > 0 && ang < 180))
      throw DomainError("cell angles must lie in (0, 180)");
  double ca = std::cos(deg2rad(p.alpha)), cb = std::cos(deg2rad(p.beta));
  double cg = std::cos(deg2rad(p.gamma)), sa = std::sin(deg2rad(p.alpha));
  // Lower-triangular gauge: l3 along z, l2 in the yz plane.
  Vec3 l3(0, 0, p.c);
  Vec3 l2(0, p.b * sa, p.b * ca);
  double z1 = p.a * cb;
  double y1 = p.a * (cg - cb * ca) / sa;
  double x1sq = p.a * p.a - y1 * y1 - z1 * z1;
  if (x1sq <= 0)
    throw DomainError("cell parameters do not define a positive definite cell");
  Vec3 l1(std::sqrt(x1sq), y1, z1);
  Mat3 L;
  L.col(0) = l1;
  L.col(1) = l2;
  L.col(2) = l3;
  return L;
}

LatticeFamily family_of_group(int group) {
  if (group < 1 || group > 230)
    throw DomainError("space group number out of range: " + std::to_string(group));
  if (group <= 2) return LatticeFamily::triclinic;
  if (group <= 15) return LatticeFamily::monoclinic;
  if (group <= 74) return LatticeFamily::orthorhombic;
  if (group <= 142) return LatticeFamily::tetragonal;
  if (group <= 194) return LatticeFamily::hexagonal;
  return LatticeFamily::cubic;
}

FamilyMask family_mask(int group) {
  FamilyMask fm;
  fm.family = family_of_group(group);
  switch (fm.family) {
    case LatticeFamily::triclinic:
      fm.m << 1, 1, 1, 1, 1, 1;
      break;
    case LatticeFamily::monoclinic:
      fm.m << 0, 1, 0, 1, 1, 1;
      break;
    case LatticeFamily::orthorhombic:
      fm.m << 0, 0, 0, 1, 1, 1;
      break;
    case LatticeFamily::tetragonal:
      fm.m << 0, 0, 0, 0, 1, 1;
      break;
    case LatticeFamily::hexagonal:
      // Trigonal and hexagonal groups share hexagonal axes: the off-diagonal
      // k1 is pinned to the 120-degree value rather than diffused.
      fm.m << 1, 0, 0, 0, 1, 1;
      fm.fixed[0] = -std::log(3.0) / 4.0;
      fm.has_fixed[0] = true;
      break;
    case LatticeFamily::cubic:
      fm.m << 0, 0, 0, 0, 0, 1;
      break;
  }
  return fm;
}

Vec6 project_k(const Vec6& k, const FamilyMask& mask) {
  Vec6 out;
  for (int i = 0; i < 6; ++i) {
    if (mask.has_fixed[i])
      out[i] = mask.fixed[i];
    else if (mask.m[i] != 0.0)
      out[i] = k[i];
    else
      out[i] = 0.0;
  }
  return out;
}

bool lattice_params_check(const Mat3& L, LatticeFamily family) {
  CellParams p = params_from_lattice(L);
  const double atol = 1e-8;    // degrees
  const double ltol = 1e-10;   // relative
  auto len_eq = [&](double x, double y) {
    return std::abs(x - y) <= ltol * 0.5 * (x + y);
  };
  auto ang_eq = [&](double x, double y) { return std::abs(x - y) <= atol; };
  switch (family) {
    case LatticeFamily::triclinic:
      return true;
    case LatticeFamily::monoclinic:
      return ang_eq(p.alpha, 90) && ang_eq(p.gamma, 90);
    case LatticeFamily::orthorhombic:
      return ang_eq(p.alpha, 90) && ang_eq(p.beta, 90) && ang_eq(p.gamma, 90);
    case LatticeFamily::tetragonal:
      return len_eq(p.a, p.b) && ang_eq(p.alpha, 90) && ang_eq(p.beta, 90) &&
             ang_eq(p.gamma, 90);
    case LatticeFamily::hexagonal:
      return len_eq(p.a, p.b) && ang_eq(p.alpha, 90) && ang_eq(p.beta, 90) &&
             ang_eq(p.gamma, 120);
    case LatticeFamily::cubic:
      return len_eq(p.a, p.b) && len_eq(p.b, p.c) && ang_eq(p.alpha, 90) &&
             ang_eq(p.beta, 90) && ang_eq(p.gamma, 90);
  }
  return false;
}

}  // namespace xtal
