#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "crystal.hpp"
#include "elements.hpp"
#include "evaluation.hpp"
#include "rng.hpp"
#include "spacegroup.hpp"
#include "templates.hpp"

using namespace xtal;

namespace {

const ElementTable& elements() {
  static ElementTable t = ElementTable::load(XTALGEN_DATA_DIR "/elements.tsv");
  return t;
}

const SpaceGroupTable& groups() {
  static SpaceGroupTable t = SpaceGroupTable::load(XTALGEN_DATA_DIR
                                                   "/spacegroups");
  return t;
}

Crystal rock_salt(double a = 5.6402) {
  const SpaceGroupEntry& g = groups().at(225);
  std::vector<BasicSite> sites = {
      {g.position_index('a'), elements().index_of("Na"), Vec3::Zero()},
      {g.position_index('b'), elements().index_of("Cl"), Vec3::Zero()}};
  return expand_structure(sites, a * Mat3::Identity(), g);
}

Crystal perovskite() {
  const SpaceGroupEntry& g = groups().at(221);
  std::vector<BasicSite> sites = {
      {g.position_index('a'), elements().index_of("Ca"), Vec3::Zero()},
      {g.position_index('b'), elements().index_of("Ti"), Vec3::Zero()},
      {g.position_index('c'), elements().index_of("O"), Vec3::Zero()}};
  return expand_structure(sites, 3.9 * Mat3::Identity(), g);
}

std::map<int, int> comp_of(std::initializer_list<std::pair<const char*, int>> spec) {
  std::map<int, int> comp;
  for (const auto& [symbol, count] : spec)
    comp[elements().index_of(symbol)] = count;
  return comp;
}

}  // namespace

TEST_CASE("index build reads the sample templates in name order") {
  TemplateIndex index =
      TemplateIndex::build(XTALGEN_DATA_DIR "/toy", elements(), groups());
  REQUIRE(index.size() == 5);
  CHECK(index.entry(0).source == "cas.json");
  CHECK(index.entry(1).source == "kbr.json");
  CHECK(index.entry(2).source == "lif.json");
  CHECK(index.entry(3).source == "mgo.json");
  CHECK(index.entry(4).source == "nacl.json");
  CHECK(index.entry(0).signature == std::vector<int>{1, 1});

  CHECK_THROWS_AS(index.entry(5), DomainError);
  CHECK_THROWS_AS(index.entry(-1), DomainError);
  CHECK_THROWS_AS(TemplateIndex::build("no/such/dir", elements(), groups()),
                  DomainError);
}

TEST_CASE("retrieval ranks the exact composition first") {
  TemplateIndex index =
      TemplateIndex::build(XTALGEN_DATA_DIR "/toy", elements(), groups());
  std::vector<RetrievalHit> hits = index.retrieve(comp_of({{"Na", 4}, {"Cl", 4}}));
  REQUIRE(hits.size() == 5);
  CHECK(hits[0].index == 4);
  CHECK(hits[0].similarity == 1.0);
  for (size_t i = 1; i < hits.size(); ++i) {
    CHECK(hits[i].similarity <= hits[i - 1].similarity);
    CHECK(hits[i].similarity < 1.0);
    CHECK(hits[i].similarity > 0.0);
  }

  // scaling the counts leaves the signature, hence the ranking, unchanged
  std::vector<RetrievalHit> doubled = index.retrieve(comp_of({{"Na", 8}, {"Cl", 8}}));
  REQUIRE(doubled.size() == 5);
  CHECK(doubled[0].index == hits[0].index);
  CHECK(doubled[0].similarity == hits[0].similarity);
}

TEST_CASE("retrieval filters by ratio signature") {
  std::vector<std::pair<std::string, Crystal>> named;
  named.emplace_back("nacl", rock_salt());
  named.emplace_back("catio3", perovskite());
  TemplateIndex index =
      TemplateIndex::from_crystals(std::move(named), elements(), groups());

  std::vector<RetrievalHit> hits =
      index.retrieve(comp_of({{"Sr", 1}, {"Zr", 1}, {"O", 3}}));
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].index == 1);

  CHECK(index.retrieve(comp_of({{"Si", 1}, {"O", 2}})).empty());

  TemplateIndex empty;
  CHECK_THROWS_AS(empty.retrieve(comp_of({{"Na", 1}, {"Cl", 1}})),
                  DomainError);
}

TEST_CASE("substitution onto the template's own composition is the identity") {
  Crystal tmpl = rock_salt();
  Crystal out =
      substitute_composition(tmpl, composition(tmpl), elements());
  CHECK(out.species == tmpl.species);
  CHECK(out.group == tmpl.group);
  CHECK(out.lattice == tmpl.lattice);
  for (int i = 0; i < tmpl.natoms(); ++i)
    CHECK(out.frac[size_t(i)] == tmpl.frac[size_t(i)]);
  for (int s = 0; s < tmpl.nsites(); ++s)
    CHECK(out.sites[size_t(s)].species == tmpl.sites[size_t(s)].species);
}

TEST_CASE("substitution picks the cheaper of the two pairings") {
  Crystal tmpl = rock_salt();
  int na = elements().index_of("Na");
  int cl = elements().index_of("Cl");
  int k = elements().index_of("K");
  int br = elements().index_of("Br");

  auto dist = [&](int x, int y) {
    return (elements().descriptor(x) - elements().descriptor(y)).norm();
  };
  double straight = dist(na, k) + dist(cl, br);
  double crossed = dist(na, br) + dist(cl, k);
  REQUIRE(straight != crossed);
  int na_target = straight < crossed ? k : br;
  int cl_target = straight < crossed ? br : k;

  Crystal out =
      substitute_composition(tmpl, comp_of({{"K", 4}, {"Br", 4}}), elements());
  for (int i = 0; i < tmpl.natoms(); ++i) {
    int expect = tmpl.species[size_t(i)] == na ? na_target : cl_target;
    CHECK(out.species[size_t(i)] == expect);
  }
  CHECK(composition(out) == comp_of({{"K", 4}, {"Br", 4}}));
}

TEST_CASE("substitution assigns within equal-ratio classes only") {
  Crystal tmpl = perovskite();
  Crystal out = substitute_composition(
      tmpl, comp_of({{"Sr", 1}, {"Zr", 1}, {"O", 3}}), elements());

  int o = elements().index_of("O");
  int n_oxygen = 0;
  for (int sp : out.species) n_oxygen += sp == o ? 1 : 0;
  CHECK(n_oxygen == 3);

  int ca = elements().index_of("Ca");
  int ti = elements().index_of("Ti");
  int sr = elements().index_of("Sr");
  int zr = elements().index_of("Zr");
  auto dist = [&](int x, int y) {
    return (elements().descriptor(x) - elements().descriptor(y)).norm();
  };
  double straight = dist(ca, sr) + dist(ti, zr);
  double crossed = dist(ca, zr) + dist(ti, sr);
  REQUIRE(straight != crossed);
  int ca_target = straight < crossed ? sr : zr;
  for (int i = 0; i < tmpl.natoms(); ++i) {
    if (tmpl.species[size_t(i)] == ca)
      CHECK(out.species[size_t(i)] == ca_target);
  }

  CHECK_THROWS_AS(
      substitute_composition(tmpl, comp_of({{"Si", 1}, {"O", 2}}), elements()),
      DomainError);
}

TEST_CASE("index rejects unannotated or asymmetric templates") {
  Crystal bare = rock_salt();
  bare.group = 0;
  bare.sites.clear();
  bare.site_of_atom.clear();
  std::vector<std::pair<std::string, Crystal>> named;
  named.emplace_back("bare", bare);
  CHECK_THROWS_AS(
      TemplateIndex::from_crystals(std::move(named), elements(), groups()),
      DomainError);

  Crystal bent = rock_salt();
  bent.frac[0][0] = wrap01(bent.frac[0][0] + 0.05);
  std::vector<std::pair<std::string, Crystal>> named2;
  named2.emplace_back("bent", bent);
  CHECK_THROWS_AS(
      TemplateIndex::from_crystals(std::move(named2), elements(), groups()),
      DomainError);
}

TEST_CASE("refine with a zero start level returns the template unchanged") {
  Crystal tmpl = rock_salt();
  NoiseSchedule sched = NoiseSchedule::make(50, 0.008, 0.005, 0.5, 5e-6);
  GroundTruth gt;
  OracleDenoiser oracle(gt);
  Rng rng(5);
  Crystal out = refine(tmpl, oracle, sched, groups(), 3, 0, rng);
  CHECK(out.lattice == tmpl.lattice);
  CHECK(out.species == tmpl.species);
  for (int i = 0; i < tmpl.natoms(); ++i)
    CHECK(out.frac[size_t(i)] == tmpl.frac[size_t(i)]);
}

TEST_CASE("oracle-driven refinement lands back on the template") {
  Crystal tmpl = rock_salt();
  const SpaceGroupEntry& entry = groups().at(225);
  const int h = elements().size();
  StructureLayout layout = layout_of(tmpl, entry, h);
  GroundTruth gt = ground_truth_of(tmpl, layout);
  NoiseSchedule sched = NoiseSchedule::make(200, 0.008, 0.005, 0.5, 5e-6);
  OracleDenoiser oracle(gt);

  for (std::uint64_t seed : {21, 22, 23}) {
    Rng rng(seed);
    SampleTrace trace;
    Crystal out = refine(tmpl, oracle, sched, groups(), h, 150, rng, &trace);
    CHECK(trace.max_k_violation == 0.0);
    CHECK(trace.max_F_violation < 1e-10);
    CHECK(verify_symmetry(out, entry, 1e-6));
    MatchReport r = match_structures(out, tmpl);
    REQUIRE(r.matched);
    CHECK(*r.rmsd < 0.05);
  }
}

TEST_CASE("refine rejects bad start levels and bare crystals") {
  Crystal tmpl = rock_salt();
  NoiseSchedule sched = NoiseSchedule::make(50, 0.008, 0.005, 0.5, 5e-6);
  GroundTruth gt;
  OracleDenoiser oracle(gt);
  Rng rng(5);
  CHECK_THROWS_AS(refine(tmpl, oracle, sched, groups(), 3, 51, rng),
                  DomainError);
  CHECK_THROWS_AS(refine(tmpl, oracle, sched, groups(), 3, -1, rng),
                  DomainError);

  Crystal bare = tmpl;
  bare.group = 0;
  bare.sites.clear();
  CHECK_THROWS_AS(refine(bare, oracle, sched, groups(), 3, 10, rng),
                  DomainError);
}
