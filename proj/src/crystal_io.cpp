#include "crystal_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lattice.hpp"

namespace xtal {

using nlohmann::json;

namespace {

constexpr double kOrbitTol = 1e-6;

Vec3 parse_vec3(const json& arr, const char* what) {
  if (!arr.is_array() || arr.size() != 3)
    throw ParseError(std::string(what) + " must be an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!arr[static_cast<size_t>(i)].is_number())
      throw ParseError(std::string(what) + " must be numeric");
    v[i] = arr[static_cast<size_t>(i)].get<double>();
  }
  return v;
}

Mat3 parse_lattice(const json& doc, const json& lat) {
  if (!lat.is_object()) throw ParseError("lattice must be an object");
  if (lat.contains("matrix")) {
    const json& m = lat["matrix"];
    if (!m.is_array() || m.size() != 3)
      throw ParseError("lattice matrix must have 3 rows");
    Mat3 L;
    for (int r = 0; r < 3; ++r)
      L.col(r) = parse_vec3(m[static_cast<size_t>(r)], "lattice matrix row");
    if (L.determinant() <= 0)
      throw ParseError("lattice matrix must have positive determinant");
    return L;
  }
  if (lat.contains("k")) {
    const json& karr = lat["k"];
    if (!karr.is_array() || karr.size() != 6)
      throw ParseError("lattice k must be an array of 6 numbers");
    Vec6 k;
    for (int i = 0; i < 6; ++i) k[i] = karr[static_cast<size_t>(i)].get<double>();
    if (!doc.contains("group"))
      throw ParseError("k-form lattice needs a group number");
    int group = doc["group"].get<int>();
    FamilyMask mask = family_mask(group);
    Vec6 proj = project_k(k, mask);
    if ((proj - k).cwiseAbs().maxCoeff() > 1e-10)
      throw ParseError("k vector violates the family constraints of its group");
    return lattice_from_k(k);
  }
  throw ParseError("lattice needs either a matrix or a k vector");
}

// Greedy orbit claim: expand a candidate basic coordinate and try to pair
// each orbit point with a distinct unclaimed atom of the right species.
bool claim_orbit(const WyckoffPosition& w, const Vec3& basic, int species,
                 const Crystal& c, std::vector<int>& site_of_atom,
                 int site_index, std::vector<int>& claimed_out) {
  claimed_out.clear();
  std::vector<bool> taken(c.frac.size(), false);
  for (int i = 0; i < w.multiplicity; ++i) {
    Vec3 p = wrap01(Vec3(w.R[static_cast<size_t>(i)] * basic +
                         w.t[static_cast<size_t>(i)]));
    int found = -1;
    for (int a = 0; a < c.natoms(); ++a) {
      if (site_of_atom[static_cast<size_t>(a)] >= 0 || taken[static_cast<size_t>(a)])
        continue;
      if (c.species[static_cast<size_t>(a)] != species) continue;
      Vec3 d = wrap_half(Vec3(c.frac[static_cast<size_t>(a)] - p));
      if (d.cwiseAbs().maxCoeff() <= kOrbitTol) {
        found = a;
        break;
      }
    }
    if (found < 0) return false;
    taken[static_cast<size_t>(found)] = true;
    claimed_out.push_back(found);
  }
  for (int a : claimed_out) site_of_atom[static_cast<size_t>(a)] = site_index;
  return true;
}

void annotate(Crystal& c, const SpaceGroupEntry& entry,
              const std::vector<std::string>& tags) {
  std::vector<int> site_of_atom(c.frac.size(), -1);
  std::vector<SiteInfo> sites;

  // Positions tried most-special first so a tagged-free atom lands on the
  // smallest orbit that reproduces its neighbors.
  std::vector<int> by_mult(entry.wyckoffs.size());
  for (size_t i = 0; i < by_mult.size(); ++i) by_mult[i] = static_cast<int>(i);
  std::stable_sort(by_mult.begin(), by_mult.end(), [&](int x, int y) {
    return entry.wyckoffs[static_cast<size_t>(x)].multiplicity <
           entry.wyckoffs[static_cast<size_t>(y)].multiplicity;
  });

  for (int a = 0; a < c.natoms(); ++a) {
    if (site_of_atom[static_cast<size_t>(a)] >= 0) continue;
    std::vector<int> candidates;
    const std::string& tag = tags[static_cast<size_t>(a)];
    if (!tag.empty()) {
      if (tag.size() != 1 || entry.position_index(tag[0]) < 0)
        throw ParseError("unknown Wyckoff letter '" + tag + "' in group " +
                         std::to_string(entry.number));
      candidates.push_back(entry.position_index(tag[0]));
    } else {
      candidates = by_mult;
    }

    bool placed = false;
    std::vector<int> claimed;
    for (int wi : candidates) {
      const WyckoffPosition& w = entry.wyckoffs[static_cast<size_t>(wi)];
      for (size_t pair = 0; pair < w.R.size() && !placed; ++pair) {
        Vec3 basic = w.basic_from_point(c.frac[static_cast<size_t>(a)],
                                        static_cast<int>(pair));
        Vec3 rebuilt = wrap01(Vec3(w.R[pair] * basic + w.t[pair]));
        Vec3 d = wrap_half(Vec3(c.frac[static_cast<size_t>(a)] - rebuilt));
        if (d.cwiseAbs().maxCoeff() > kOrbitTol) continue;
        if (claim_orbit(w, basic, c.species[static_cast<size_t>(a)], c,
                        site_of_atom, static_cast<int>(sites.size()), claimed)) {
          SiteInfo info;
          info.wyckoff_index = wi;
          info.species = c.species[static_cast<size_t>(a)];
          info.basic = basic;
          sites.push_back(info);
          placed = true;
        }
      }
      if (placed) break;
    }
    if (!placed)
      throw ParseError("atom " + std::to_string(a) +
                       " does not lie on any Wyckoff orbit of group " +
                       std::to_string(entry.number));
  }

  c.group = entry.number;
  c.sites = std::move(sites);
  c.site_of_atom = std::move(site_of_atom);
}

}  // namespace

Crystal read_crystal_text(const std::string& text, const ElementTable& elements,
                          const SpaceGroupTable* groups) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("crystal document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("crystal document must be an object");
  if (!doc.contains("schema") || !doc["schema"].is_number_integer() ||
      doc["schema"].get<int>() != 1)
    throw ParseError("unsupported crystal document schema");
  if (!doc.contains("lattice")) throw ParseError("missing lattice");
  if (!doc.contains("atoms") || !doc["atoms"].is_array() || doc["atoms"].empty())
    throw ParseError("missing atom list");

  Crystal c;
  c.lattice = parse_lattice(doc, doc["lattice"]);

  std::vector<std::string> tags;
  for (const json& atom : doc["atoms"]) {
    if (!atom.is_object() || !atom.contains("element") || !atom.contains("frac"))
      throw ParseError("each atom needs an element and a frac triple");
    c.species.push_back(elements.index_of(atom["element"].get<std::string>()));
    c.frac.push_back(wrap01(parse_vec3(atom["frac"], "frac")));
    tags.push_back(atom.contains("wyckoff") ? atom["wyckoff"].get<std::string>()
                                            : std::string());
  }

  if (doc.contains("group") && groups != nullptr) {
    int group = doc["group"].get<int>();
    if (!groups->has(group))
      throw DomainError("space group " + std::to_string(group) +
                        " is not in the shipped table");
    annotate(c, groups->at(group), tags);
  }
  return c;
}

Crystal read_crystal(const std::string& path, const ElementTable& elements,
                     const SpaceGroupTable* groups) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open crystal file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return read_crystal_text(buf.str(), elements, groups);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string crystal_to_text(const Crystal& c, const ElementTable& elements,
                            const SpaceGroupTable* groups) {
  json doc;
  doc["schema"] = 1;
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    Vec3 v = c.lattice.col(r);
    rows.push_back(json::array({v[0], v[1], v[2]}));
  }
  doc["lattice"] = json{{"matrix", rows}};

  bool tagged = c.annotated() && groups != nullptr && groups->has(c.group);
  if (c.group != 0) doc["group"] = c.group;

  json atoms = json::array();
  for (int a = 0; a < c.natoms(); ++a) {
    json atom;
    atom["element"] = elements.at(c.species[static_cast<size_t>(a)]).symbol;
    Vec3 f = wrap01(c.frac[static_cast<size_t>(a)]);
    atom["frac"] = json::array({f[0], f[1], f[2]});
    if (tagged) {
      const SiteInfo& site =
          c.sites[static_cast<size_t>(c.site_of_atom[static_cast<size_t>(a)])];
      char letter = groups->at(c.group)
                        .wyckoffs[static_cast<size_t>(site.wyckoff_index)]
                        .letter;
      atom["wyckoff"] = std::string(1, letter);
    }
    atoms.push_back(atom);
  }
  doc["atoms"] = atoms;
  return doc.dump(2) + "\n";
}

void write_crystal(const std::string& path, const Crystal& c,
                   const ElementTable& elements, const SpaceGroupTable* groups) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot open crystal file for writing: " + path);
  out << crystal_to_text(c, elements, groups);
  if (!out) throw DomainError("crystal write failed: " + path);
}

std::string shortest_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void export_cif(const std::string& path, const Crystal& c,
                const ElementTable& elements) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot open CIF file for writing: " + path);
  CellParams p = params_from_lattice(c.lattice);
  out << "data_crystal\n";
  out << "_symmetry_space_group_name_H-M 'P 1'\n";
  out << "_cell_length_a " << shortest_double(p.a) << "\n";
  out << "_cell_length_b " << shortest_double(p.b) << "\n";
  out << "_cell_length_c " << shortest_double(p.c) << "\n";
  out << "_cell_angle_alpha " << shortest_double(p.alpha) << "\n";
  out << "_cell_angle_beta " << shortest_double(p.beta) << "\n";
  out << "_cell_angle_gamma " << shortest_double(p.gamma) << "\n";
  out << "loop_\n";
  out << "_atom_site_type_symbol\n";
  out << "_atom_site_label\n";
  out << "_atom_site_fract_x\n";
  out << "_atom_site_fract_y\n";
  out << "_atom_site_fract_z\n";
  std::map<int, int> counter;
  for (int a = 0; a < c.natoms(); ++a) {
    const std::string& sym = elements.at(c.species[static_cast<size_t>(a)]).symbol;
    int n = ++counter[c.species[static_cast<size_t>(a)]];
    Vec3 f = wrap01(c.frac[static_cast<size_t>(a)]);
    out << sym << ' ' << sym << n << ' ' << shortest_double(f[0]) << ' '
        << shortest_double(f[1]) << ' ' << shortest_double(f[2]) << "\n";
  }
  if (!out) throw DomainError("CIF write failed: " + path);
}

}  // namespace xtal
