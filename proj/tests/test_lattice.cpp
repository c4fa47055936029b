#include <doctest.h>

#include <cmath>

#include "lattice.hpp"
#include "rng.hpp"

using namespace xtal;

namespace {

// Independent matrix exponential: scaling and squaring over a plain Taylor
// sum, no eigendecomposition anywhere.
Mat3 exp_taylor(const Mat3& A) {
  int squarings = 0;
  Mat3 B = A;
  while (B.norm() > 0.25) {
    B *= 0.5;
    ++squarings;
  }
  Mat3 sum = Mat3::Identity();
  Mat3 term = Mat3::Identity();
  for (int n = 1; n <= 24; ++n) {
    term = (term * B) / double(n);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

Mat3 random_cell(Rng& rng) {
  Mat3 L;
  do {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) L(r, c) = rng.uniform(-2.0, 2.0);
  } while (L.determinant() < 0.2);
  return L;
}

Vec6 random_k(Rng& rng) {
  Vec6 k;
  for (int i = 0; i < 6; ++i) k[i] = rng.uniform(-0.8, 0.8);
  return k;
}

}  // namespace

TEST_CASE("basis matrices: symmetric, orthogonal, pinned norms") {
  const auto& B = k_basis();
  const double want_sq[6] = {2, 2, 2, 2, 6, 3};
  for (int i = 0; i < 6; ++i) {
    CHECK((B[i] - B[i].transpose()).norm() == 0.0);
    CHECK(B[i].squaredNorm() == want_sq[i]);
    for (int j = i + 1; j < 6; ++j)
      CHECK((B[i].array() * B[j].array()).sum() == 0.0);
  }
}

TEST_CASE("polar decomposition of a diagonal cell") {
  Mat3 L = 2.0 * Mat3::Identity();
  PolarResult pr = polar_decompose(L);
  CHECK((pr.Q - Mat3::Identity()).norm() < 1e-14);
  Mat3 want = std::log(2.0) * Mat3::Identity();
  CHECK((pr.S - want).norm() < 1e-14);
}

TEST_CASE("polar decomposition round trip on random cells") {
  Rng rng(11);
  for (int it = 0; it < 200; ++it) {
    Mat3 L = random_cell(rng);
    PolarResult pr = polar_decompose(L);
    CHECK((pr.S - pr.S.transpose()).norm() < 1e-12);
    CHECK((pr.Q.transpose() * pr.Q - Mat3::Identity()).norm() < 1e-10);
    CHECK(pr.Q.determinant() > 0.0);
    CHECK((L - pr.Q * exp_taylor(pr.S)).norm() < 1e-10);
  }
}

TEST_CASE("polar decomposition rejects bad cells") {
  Mat3 mirrored = Mat3::Identity();
  mirrored(0, 0) = -1.0;
  CHECK_THROWS_AS(polar_decompose(mirrored), DomainError);
  Mat3 flat = Mat3::Identity();
  flat(2, 2) = 0.0;
  CHECK_THROWS_AS(polar_decompose(flat), DomainError);
  Mat3 bad = Mat3::Identity();
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(polar_decompose(bad), DomainError);
}

TEST_CASE("k extraction closed forms") {
  CHECK(k_from_symmetric(Mat3::Zero()).norm() == 0.0);

  const double a = 2.3, b = 1.7, c = 0.9;
  Mat3 S = Vec3(std::log(a), std::log(b), std::log(c)).asDiagonal();
  Vec6 k = k_from_symmetric(S);
  CHECK(k[0] == 0.0);
  CHECK(k[1] == 0.0);
  CHECK(k[2] == 0.0);
  CHECK(k[3] == doctest::Approx(std::log(a / b) / 2).epsilon(1e-14));
  CHECK(k[4] == doctest::Approx(std::log(a * b / (c * c)) / 6).epsilon(1e-14));
  CHECK(k[5] == doctest::Approx(std::log(a * b * c) / 3).epsilon(1e-14));
}

TEST_CASE("hexagonal cell pins the shear coefficient at -log(3)/4") {
  const double a = 3.1, c = 5.0;
  Mat3 L;  // columns are the cell vectors
  L.col(0) = Vec3(a, 0, 0);
  L.col(1) = Vec3(-a / 2, a * std::sqrt(3.0) / 2, 0);
  L.col(2) = Vec3(0, 0, c);
  Vec6 k = k_from_lattice(L);
  CHECK(k[0] == doctest::Approx(-std::log(3.0) / 4).epsilon(1e-12));
  CHECK(std::abs(k[1]) < 1e-12);
  CHECK(std::abs(k[2]) < 1e-12);
  CHECK(std::abs(k[3]) < 1e-12);
}

TEST_CASE("symmetric_from_k closed forms and round trips") {
  Vec6 e6 = Vec6::Zero();
  e6[5] = 1.0;
  CHECK((symmetric_from_k(e6) - Mat3::Identity()).norm() == 0.0);

  Vec6 k2 = Vec6::Zero();
  k2[5] = std::log(2.0);
  CHECK((exp_symmetric(symmetric_from_k(k2)) - 2.0 * Mat3::Identity()).norm() <
        1e-14);

  Rng rng(5);
  for (int it = 0; it < 200; ++it) {
    Vec6 k = random_k(rng);
    Vec6 back = k_from_symmetric(symmetric_from_k(k));
    CHECK((back - k).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("exp/log of symmetric matrices agree with the series oracle") {
  Rng rng(17);
  for (int it = 0; it < 100; ++it) {
    Mat3 S = symmetric_from_k(random_k(rng));
    Mat3 E = exp_symmetric(S);
    CHECK((E - exp_taylor(S)).norm() < 1e-11);
    CHECK((log_spd(E) - S).norm() < 1e-10);
  }
}

TEST_CASE("lattice_from_k closed forms") {
  CHECK((lattice_from_k(Vec6::Zero()) - Mat3::Identity()).norm() == 0.0);

  Vec6 cubic = Vec6::Zero();
  cubic[5] = std::log(4.2);
  CHECK((lattice_from_k(cubic) - 4.2 * Mat3::Identity()).norm() < 1e-13);

  Vec6 hex = Vec6::Zero();
  hex[0] = -std::log(3.0) / 4;
  hex[4] = 0.07;
  hex[5] = std::log(3.5);
  CellParams p = params_from_lattice(lattice_from_k(hex));
  CHECK(p.gamma == doctest::Approx(120.0).epsilon(1e-9));
  CHECK(p.alpha == doctest::Approx(90.0).epsilon(1e-9));
  CHECK(p.beta == doctest::Approx(90.0).epsilon(1e-9));
  CHECK(p.a == doctest::Approx(p.b).epsilon(1e-12));
}

TEST_CASE("cell parameters match the inner-product oracle") {
  Rng rng(23);
  for (int it = 0; it < 50; ++it) {
    Mat3 L = random_cell(rng);
    CellParams p = params_from_lattice(L);
    Vec3 v0 = L.col(0), v1 = L.col(1), v2 = L.col(2);
    CHECK(p.a == doctest::Approx(v0.norm()).epsilon(1e-13));
    CHECK(p.b == doctest::Approx(v1.norm()).epsilon(1e-13));
    CHECK(p.c == doctest::Approx(v2.norm()).epsilon(1e-13));
    auto deg = [](double x) { return x * 180.0 / kPi; };
    CHECK(p.alpha ==
          doctest::Approx(deg(std::acos(v1.dot(v2) / (v1.norm() * v2.norm()))))
              .epsilon(1e-12));
    CHECK(p.beta ==
          doctest::Approx(deg(std::acos(v0.dot(v2) / (v0.norm() * v2.norm()))))
              .epsilon(1e-12));
    CHECK(p.gamma ==
          doctest::Approx(deg(std::acos(v0.dot(v1) / (v0.norm() * v1.norm()))))
              .epsilon(1e-12));
  }
}

TEST_CASE("monoclinic coefficients decode to alpha = gamma = 90") {
  Rng rng(31);
  for (int it = 0; it < 50; ++it) {
    Vec6 k = random_k(rng);
    k = project_k(k, family_mask(14));
    CellParams p = params_from_lattice(lattice_from_k(k));
    CHECK(std::abs(p.alpha - 90.0) < 1e-8);
    CHECK(std::abs(p.gamma - 90.0) < 1e-8);
  }
}

TEST_CASE("lattice_from_params gauge and round trip") {
  CellParams p;
  p.a = 5.1;
  p.b = 6.2;
  p.c = 7.3;
  p.alpha = 81.0;
  p.beta = 93.0;
  p.gamma = 99.0;
  Mat3 L = lattice_from_params(p);
  CHECK(L(0, 2) == 0.0);  // third vector along z
  CHECK(L(1, 2) == 0.0);
  CHECK(L(0, 1) == 0.0);  // second vector in the yz plane
  CHECK(L.determinant() > 0.0);
  CellParams q = params_from_lattice(L);
  CHECK(q.a == doctest::Approx(p.a).epsilon(1e-12));
  CHECK(q.b == doctest::Approx(p.b).epsilon(1e-12));
  CHECK(q.c == doctest::Approx(p.c).epsilon(1e-12));
  CHECK(q.alpha == doctest::Approx(p.alpha).epsilon(1e-12));
  CHECK(q.beta == doctest::Approx(p.beta).epsilon(1e-12));
  CHECK(q.gamma == doctest::Approx(p.gamma).epsilon(1e-12));

  CellParams bad = p;
  bad.alpha = 179.0;
  bad.beta = 1.0;
  bad.gamma = 1.0;
  CHECK_THROWS_AS(lattice_from_params(bad), DomainError);
  bad = p;
  bad.a = 0.0;
  CHECK_THROWS_AS(lattice_from_params(bad), DomainError);
}

TEST_CASE("group number to family mapping") {
  CHECK(family_of_group(1) == LatticeFamily::triclinic);
  CHECK(family_of_group(2) == LatticeFamily::triclinic);
  CHECK(family_of_group(3) == LatticeFamily::monoclinic);
  CHECK(family_of_group(15) == LatticeFamily::monoclinic);
  CHECK(family_of_group(16) == LatticeFamily::orthorhombic);
  CHECK(family_of_group(74) == LatticeFamily::orthorhombic);
  CHECK(family_of_group(75) == LatticeFamily::tetragonal);
  CHECK(family_of_group(142) == LatticeFamily::tetragonal);
  CHECK(family_of_group(143) == LatticeFamily::hexagonal);
  CHECK(family_of_group(194) == LatticeFamily::hexagonal);
  CHECK(family_of_group(195) == LatticeFamily::cubic);
  CHECK(family_of_group(230) == LatticeFamily::cubic);
  CHECK_THROWS_AS(family_of_group(0), DomainError);
  CHECK_THROWS_AS(family_of_group(231), DomainError);
}

TEST_CASE("family masks match the constraint table") {
  FamilyMask m1 = family_mask(1);
  CHECK(m1.m == Vec6::Ones());
  for (bool f : m1.has_fixed) CHECK(!f);

  FamilyMask m14 = family_mask(14);
  CHECK(m14.m == (Vec6() << 0, 1, 0, 1, 1, 1).finished());

  FamilyMask m62 = family_mask(62);
  CHECK(m62.m == (Vec6() << 0, 0, 0, 1, 1, 1).finished());

  FamilyMask m99 = family_mask(99);
  CHECK(m99.m == (Vec6() << 0, 0, 0, 0, 1, 1).finished());

  FamilyMask m160 = family_mask(160);
  CHECK(m160.m == (Vec6() << 1, 0, 0, 0, 1, 1).finished());
  CHECK(m160.has_fixed[0]);
  CHECK(m160.fixed[0] == -std::log(3.0) / 4);
  CHECK(m160.free_mask() == (Vec6() << 0, 0, 0, 0, 1, 1).finished());

  FamilyMask m225 = family_mask(225);
  CHECK(m225.m == (Vec6() << 0, 0, 0, 0, 0, 1).finished());
  CHECK(m225.free_mask() == (Vec6() << 0, 0, 0, 0, 0, 1).finished());
}

TEST_CASE("project_k") {
  Rng rng(41);
  Vec6 k = random_k(rng);
  CHECK(project_k(k, family_mask(1)) == k);

  Vec6 nines = (Vec6() << 9, 9, 9, 9, 9, 2).finished();
  Vec6 hex = project_k(nines, family_mask(186));
  CHECK(hex[0] == -std::log(3.0) / 4);
  CHECK(hex[1] == 0.0);
  CHECK(hex[2] == 0.0);
  CHECK(hex[3] == 0.0);
  CHECK(hex[4] == 9.0);
  CHECK(hex[5] == 2.0);

  const int groups[6] = {1, 14, 62, 99, 186, 225};
  for (int g : groups) {
    FamilyMask m = family_mask(g);
    for (int it = 0; it < 20; ++it) {
      Vec6 once = project_k(random_k(rng), m);
      CHECK(project_k(once, m) == once);  // idempotent
    }
  }
}

TEST_CASE("family shape check on decoded coefficients") {
  Rng rng(47);
  const int groups[6] = {1, 14, 62, 99, 186, 225};
  const LatticeFamily fams[6] = {
      LatticeFamily::triclinic,  LatticeFamily::monoclinic,
      LatticeFamily::orthorhombic, LatticeFamily::tetragonal,
      LatticeFamily::hexagonal,  LatticeFamily::cubic};
  for (int i = 0; i < 6; ++i) {
    FamilyMask m = family_mask(groups[i]);
    for (int it = 0; it < 25; ++it) {
      Mat3 L = lattice_from_k(project_k(random_k(rng), m));
      CHECK(lattice_params_check(L, fams[i]));
    }
  }
  // a hexagonal cell is not cubic, and a perturbed angle breaks the family
  Vec6 hex = project_k(random_k(rng), family_mask(186));
  CHECK(!lattice_params_check(lattice_from_k(hex), LatticeFamily::cubic));
  Mat3 cube = 4.0 * Mat3::Identity();
  cube(0, 1) = 0.1;
  CHECK(!lattice_params_check(cube, LatticeFamily::cubic));
}
