#include <doctest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "rng.hpp"
#include "spacegroup.hpp"

using namespace xtal;

namespace {

const SpaceGroupTable& table() {
  static SpaceGroupTable t = SpaceGroupTable::load(XTALGEN_DATA_DIR
                                                   "/spacegroups");
  return t;
}

// Key for op-set comparisons: wrapped translation quantized to 1/24ths.
std::vector<long> op_key(const AffineOp& op) {
  std::vector<long> key;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) key.push_back(std::lround(op.R(r, c)));
  for (int i = 0; i < 3; ++i)
    key.push_back(std::lround(wrap01(op.t[i]) * 24.0) % 24);
  return key;
}

}  // namespace

TEST_CASE("group 1 is the identity group") {
  const SpaceGroupEntry& g = table().at(1);
  REQUIRE(g.order() == 1);
  CHECK((g.ops[0].R - Mat3::Identity()).norm() == 0.0);
  CHECK(g.ops[0].t.norm() == 0.0);
  REQUIRE(g.wyckoffs.size() == 1);
  CHECK(g.wyckoffs[0].multiplicity == 1);
  CHECK(g.wyckoffs[0].dof == 3);
}

TEST_CASE("group 2 pairs every point with its inversion") {
  const SpaceGroupEntry& g = table().at(2);
  REQUIRE(g.order() == 2);
  std::set<std::vector<long>> keys;
  for (const AffineOp& op : g.ops) keys.insert(op_key(op));
  AffineOp identity{Mat3::Identity(), Vec3::Zero()};
  AffineOp inversion{-Mat3::Identity(), Vec3::Zero()};
  CHECK(keys.count(op_key(identity)) == 1);
  CHECK(keys.count(op_key(inversion)) == 1);

  // general position orbit of (0.1, 0.2, 0.3)
  const WyckoffPosition& gen = g.wyckoffs.back();
  REQUIRE(gen.multiplicity == 2);
  std::vector<Vec3> orbit = gen.expand(Vec3(0.1, 0.2, 0.3));
  REQUIRE(orbit.size() == 2);
  std::sort(orbit.begin(), orbit.end(),
            [](const Vec3& a, const Vec3& b) { return a.x() < b.x(); });
  CHECK((orbit[0] - Vec3(0.1, 0.2, 0.3)).norm() < 1e-15);
  CHECK((orbit[1] - Vec3(0.9, 0.8, 0.7)).norm() < 1e-15);
}

TEST_CASE("group 221 has 48 operations closed under composition") {
  const SpaceGroupEntry& g = table().at(221);
  REQUIRE(g.order() == 48);
  std::set<std::vector<long>> keys;
  for (const AffineOp& op : g.ops) keys.insert(op_key(op));
  REQUIRE(keys.size() == 48);
  // brute-force closure: products of loaded ops stay inside the set
  for (const AffineOp& a : g.ops)
    for (const AffineOp& b : g.ops) {
      AffineOp ab{a.R * b.R, a.R * b.t + a.t};
      CHECK(keys.count(op_key(ab)) == 1);
    }
}

TEST_CASE("every shipped group satisfies the group axioms") {
  for (int num : table().numbers()) {
    const SpaceGroupEntry& g = table().at(num);
    std::set<std::vector<long>> keys;
    for (const AffineOp& op : g.ops) keys.insert(op_key(op));
    REQUIRE(keys.size() == g.ops.size());
    AffineOp identity{Mat3::Identity(), Vec3::Zero()};
    CHECK(keys.count(op_key(identity)) == 1);
    for (const AffineOp& a : g.ops) {
      AffineOp inv{a.R.inverse(), -(a.R.inverse() * a.t)};
      CHECK(keys.count(op_key(inv)) == 1);
      for (const AffineOp& b : g.ops) {
        AffineOp ab{a.R * b.R, a.R * b.t + a.t};
        CHECK(keys.count(op_key(ab)) == 1);
      }
    }
  }
}

TEST_CASE("orbits are permuted, not changed, by group operations") {
  Rng rng(3);
  for (int num : table().numbers()) {
    const SpaceGroupEntry& g = table().at(num);
    for (const WyckoffPosition& w : g.wyckoffs) {
      // projecting a random vector lands on the position's subspace
      Vec3 basic =
          w.project_basic(Vec3(rng.uniform(), rng.uniform(), rng.uniform()));
      std::vector<Vec3> orbit = w.expand(basic);
      REQUIRE(static_cast<int>(orbit.size()) == w.multiplicity);
      for (const AffineOp& op : g.ops) {
        // op maps the orbit set onto itself
        for (const Vec3& p : orbit) {
          Vec3 q = op.apply(p);
          double best = 1e9;
          for (const Vec3& r : orbit) {
            double d = (Vec3(q - r).unaryExpr([](double x) {
                         return wrap_half(x);
                       })).norm();
            best = std::min(best, d);
          }
          CHECK(best < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("fixed-point position collapses every input") {
  const SpaceGroupEntry& g = table().at(225);
  const WyckoffPosition& a = g.position('a');
  CHECK(a.dof == 0);
  std::vector<Vec3> orbit = a.expand(Vec3(0, 0, 0));
  REQUIRE(orbit.size() == 4);
  CHECK(a.project_basic(Vec3(0.3, 0.4, 0.5)).norm() == 0.0);
}

TEST_CASE("projection through the first pair") {
  // identity representative: projection changes nothing
  const SpaceGroupEntry& g1 = table().at(1);
  const WyckoffPosition& gen = g1.wyckoffs[0];
  Vec3 v(0.31, 0.47, 0.93);
  CHECK((gen.project_basic(v) - v).norm() == 0.0);

  // an axis position keeps only the free component: group 99 site 1a has
  // representative (0, 0, z), i.e. R0 = diag(0, 0, 1)
  const SpaceGroupEntry& g99 = table().at(99);
  const WyckoffPosition& axis = g99.position('a');
  Mat3 zProj = Vec3(0, 0, 1).asDiagonal();
  REQUIRE((axis.R[0] - zProj).norm() == 0.0);
  Vec3 p = axis.project_basic(Vec3(0.3, 0.4, 0.5));
  CHECK((p - Vec3(0, 0, 0.5)).norm() < 1e-15);
}

TEST_CASE("least-squares pull-back agrees with the normal-equation oracle") {
  Rng rng(7);
  for (int num : table().numbers()) {
    const SpaceGroupEntry& g = table().at(num);
    for (const WyckoffPosition& w : g.wyckoffs) {
      Vec3 v(rng.uniform(), rng.uniform(), rng.uniform());
      Vec3 got = w.project_basic(v);
      // oracle: minimize |R0 x - v| over the column space, via SVD
      Eigen::JacobiSVD<Mat3> svd(w.R[0],
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
      Vec3 x = svd.solve(v);
      // compare the realized orbit points rather than raw solutions: both
      // must reach the same least-squares image
      CHECK((w.R[0] * got - w.R[0] * x).norm() < 1e-10);
    }
  }
}

TEST_CASE("rock-salt expansion reproduces the textbook cell") {
  const SpaceGroupEntry& g = table().at(225);
  std::vector<BasicSite> sites;
  sites.push_back({g.position_index('a'), 0, Vec3(0, 0, 0)});
  sites.push_back({g.position_index('b'), 1, Vec3(0, 0, 0)});
  Mat3 L = 5.64 * Mat3::Identity();
  Crystal c = expand_structure(sites, L, g);
  REQUIRE(c.natoms() == 8);
  CHECK(c.group == 225);

  std::vector<Vec3> want0 = {{0, 0, 0}, {0, 0.5, 0.5}, {0.5, 0, 0.5},
                             {0.5, 0.5, 0}};
  std::vector<Vec3> want1 = {{0, 0, 0.5}, {0, 0.5, 0}, {0.5, 0, 0},
                             {0.5, 0.5, 0.5}};
  for (int i = 0; i < 8; ++i) {
    const auto& want = c.species[size_t(i)] == 0 ? want0 : want1;
    double best = 1e9;
    for (const Vec3& p : want)
      best = std::min(best, (c.frac[size_t(i)] - p).norm());
    CHECK(best < 1e-15);
  }

  CHECK(verify_symmetry(c, g, 1e-9));
  validate_annotation(c, g);  // must not throw

  // perturbing one atom breaks the symmetry check
  Crystal broken = c;
  broken.frac[3][0] = wrap01(broken.frac[3][0] + 0.2);
  CHECK(!verify_symmetry(broken, g, 1e-3));
}

TEST_CASE("identity expansion under group 1") {
  const SpaceGroupEntry& g = table().at(1);
  std::vector<BasicSite> sites = {{0, 0, Vec3(0.12, 0.34, 0.56)},
                                  {0, 1, Vec3(0.9, 0.8, 0.7)}};
  Crystal c = expand_structure(sites, Mat3::Identity(), g);
  REQUIRE(c.natoms() == 2);
  CHECK((c.frac[0] - Vec3(0.12, 0.34, 0.56)).norm() == 0.0);
  CHECK((c.frac[1] - Vec3(0.9, 0.8, 0.7)).norm() == 0.0);
  CHECK(verify_symmetry(c, g, 1e-12));  // any crystal satisfies P1
}

TEST_CASE("expansion rejects basic coordinates off the subspace") {
  const SpaceGroupEntry& g = table().at(225);
  std::vector<BasicSite> sites = {{g.position_index('a'), 0,
                                   Vec3(0.2, 0, 0)}};
  CHECK_THROWS_AS(expand_structure(sites, Mat3::Identity(), g), DomainError);
}

TEST_CASE("multiplicities are consistent with the op count") {
  // |orbit| * |stabilizer| = |ops| implies multiplicity divides the order
  for (int num : table().numbers()) {
    const SpaceGroupEntry& g = table().at(num);
    for (const WyckoffPosition& w : g.wyckoffs) {
      CHECK(w.multiplicity >= 1);
      // the largest multiplicity belongs to the general position
      CHECK(w.multiplicity <= g.wyckoffs.back().multiplicity);
    }
  }
}
