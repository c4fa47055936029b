#include "spacegroup.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hungarian.hpp"

namespace xtal {

namespace {

// Exact rational arithmetic for load-time validation. Symmetry data is small
// (denominators divide 24, generic test points use small primes), so plain
// 64-bit rationals never overflow here.
struct Rat {
  long long n = 0, d = 1;

  static Rat make(long long n, long long d) {
    if (d == 0) throw ParseError("rational with zero denominator");
    if (d < 0) { n = -n; d = -d; }
    long long g = std::gcd(n < 0 ? -n : n, d);
    if (g > 1) { n /= g; d /= g; }
    return Rat{n, d};
  }
  Rat operator+(const Rat& o) const { return make(n * o.d + o.n * d, d * o.d); }
  Rat operator*(const Rat& o) const { return make(n * o.n, d * o.d); }
  Rat mod1() const {
    long long r = n % d;
    if (r < 0) r += d;
    if (r == 0) return Rat{0, 1};
    return Rat{r, d};
  }
  bool operator==(const Rat& o) const { return n == o.n && d == o.d; }
  bool operator<(const Rat& o) const { return n * o.d < o.n * d; }
  double value() const { return double(n) / double(d); }
};

using RVec = std::array<Rat, 3>;
using RMat = std::array<std::array<Rat, 3>, 3>;

struct ROp {
  RMat R;
  RVec t;
};

RVec apply_mod1(const RMat& R, const RVec& t, const RVec& f) {
  RVec out;
  for (int r = 0; r < 3; ++r) {
    Rat acc = t[r];
    for (int c = 0; c < 3; ++c) acc = acc + R[r][c] * f[c];
    out[r] = acc.mod1();
  }
  return out;
}

ROp compose(const ROp& a, const ROp& b) {
  ROp out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      Rat acc{0, 1};
      for (int k = 0; k < 3; ++k) acc = acc + a.R[r][k] * b.R[k][c];
      out.R[r][c] = acc;
    }
  for (int r = 0; r < 3; ++r) {
    Rat acc = a.t[r];
    for (int k = 0; k < 3; ++k) acc = acc + a.R[r][k] * b.t[k];
    out.t[r] = acc.mod1();
  }
  return out;
}

bool same_op(const ROp& a, const ROp& b) {
  for (int r = 0; r < 3; ++r) {
    if (!(a.t[r] == b.t[r])) return false;
    for (int c = 0; c < 3; ++c)
      if (!(a.R[r][c] == b.R[r][c])) return false;
  }
  return true;
}

Rat parse_rat(const std::string& tok, int lineno) {
  auto bad = [&] {
    throw ParseError("line " + std::to_string(lineno) + ": bad rational '" +
                     tok + "'");
  };
  long long num = 0, den = 1;
  size_t slash = tok.find('/');
  try {
    size_t used = 0;
    num = std::stoll(tok.substr(0, slash), &used);
    if (used != (slash == std::string::npos ? tok.size() : slash)) bad();
    if (slash != std::string::npos) {
      den = std::stoll(tok.substr(slash + 1), &used);
      if (used != tok.size() - slash - 1) bad();
    }
  } catch (const std::logic_error&) {
    bad();
  }
  return Rat::make(num, den);
}

struct ParsedPair {
  RMat R;
  RVec t;
};

ParsedPair parse_pair_line(const std::string& line, int lineno) {
  std::istringstream ss(line);
  std::string tok;
  std::array<Rat, 12> vals;
  for (int i = 0; i < 12; ++i) {
    if (!(ss >> tok))
      throw ParseError("line " + std::to_string(lineno) +
                       ": expected 12 rationals");
    vals[i] = parse_rat(tok, lineno);
  }
  if (ss >> tok)
    throw ParseError("line " + std::to_string(lineno) + ": trailing tokens");
  ParsedPair p;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.R[r][c] = vals[r * 3 + c];
  for (int r = 0; r < 3; ++r) p.t[r] = vals[9 + r];
  return p;
}

Mat3 to_mat(const RMat& R) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = R[r][c].value();
  return m;
}

Vec3 to_vec(const RVec& t) {
  return Vec3(t[0].value(), t[1].value(), t[2].value());
}

Mat3 pseudo_inverse(const Mat3& A) {
  MatX dyn = A;
  Eigen::CompleteOrthogonalDecomposition<MatX> cod(dyn);
  MatX p = cod.pseudoInverse();
  Mat3 out;
  out = p;
  return out;
}

bool same_point(const RVec& a, const RVec& b) {
  return a[0] == b[0] && a[1] == b[1] && a[2] == b[2];
}

void validate_group(const SpaceGroupEntry& entry, const std::vector<ROp>& rops,
                    const std::vector<std::vector<ParsedPair>>& rpairs) {
  const std::string tag = "space group " + std::to_string(entry.number);
  const int n = static_cast<int>(rops.size());
  if (n == 0) throw DomainError(tag + ": no symmetry ops");

  ROp identity;
  for (int r = 0; r < 3; ++r) {
    identity.t[r] = Rat{0, 1};
    for (int c = 0; c < 3; ++c) identity.R[r][c] = Rat{r == c ? 1 : 0, 1};
  }

  auto find_op = [&](const ROp& op) {
    for (int i = 0; i < n; ++i)
      if (same_op(rops[i], op)) return i;
    return -1;
  };

  if (find_op(identity) < 0) throw DomainError(tag + ": identity op missing");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (same_op(rops[i], rops[j]))
        throw DomainError(tag + ": duplicate symmetry ops");
  for (int i = 0; i < n; ++i) {
    bool has_inverse = false;
    for (int j = 0; j < n; ++j) {
      ROp prod = compose(rops[i], rops[j]);
      if (find_op(prod) < 0)
        throw DomainError(tag + ": closure violation at ops " +
                          std::to_string(i) + "," + std::to_string(j));
      if (same_op(prod, identity)) has_inverse = true;
    }
    if (!has_inverse)
      throw DomainError(tag + ": op " + std::to_string(i) + " has no inverse");
  }

  // Orbit invariance on an exact generic point: applying any group op to the
  // expanded orbit must permute it.
  RVec generic = {Rat{1, 1009}, Rat{1, 1013}, Rat{1, 1019}};
  for (size_t w = 0; w < rpairs.size(); ++w) {
    const auto& pairs = rpairs[w];
    std::vector<RVec> orbit;
    for (const auto& pr : pairs) orbit.push_back(apply_mod1(pr.R, pr.t, generic));
    for (size_t i = 0; i < orbit.size(); ++i)
      for (size_t j = i + 1; j < orbit.size(); ++j)
        if (same_point(orbit[i], orbit[j]))
          throw DomainError(tag + ": degenerate orbit in position " +
                            std::string(1, entry.wyckoffs[w].letter));
    for (const auto& op : rops) {
      for (const auto& pt : orbit) {
        RVec moved = apply_mod1(op.R, op.t, pt);
        bool found = false;
        for (const auto& q : orbit)
          if (same_point(moved, q)) { found = true; break; }
        if (!found)
          throw DomainError(tag + ": orbit of position " +
                            std::string(1, entry.wyckoffs[w].letter) +
                            " not invariant under the group");
      }
    }
  }
}

void finalize_position(WyckoffPosition& w, int group) {
  const std::string tag = "space group " + std::to_string(group) +
                          " position " + std::string(1, w.letter);
  if (static_cast<int>(w.R.size()) != w.multiplicity)
    throw DomainError(tag + ": pair count differs from multiplicity");

  w.pinv0 = pseudo_inverse(w.R[0]);
  w.free_proj = w.pinv0 * w.R[0];
  w.dof = 0;
  for (int c = 0; c < 3; ++c) {
    double diag = w.free_proj(c, c);
    bool is_one = std::abs(diag - 1.0) < 1e-10;
    bool is_zero = std::abs(diag) < 1e-10;
    if (!is_one && !is_zero)
      throw DomainError(tag + ": support projector has a non-binary diagonal");
    w.free_slot[c] = is_one;
    if (is_one) ++w.dof;
    for (int r = 0; r < 3; ++r)
      if (r != c && std::abs(w.free_proj(r, c)) > 1e-10)
        throw DomainError(tag + ": support projector is not diagonal");
  }

  // Snap the validated binary structure exact: the diffusion relies on
  // constrained slots staying at literal zero, not 1e-17 residue.
  w.free_proj = Mat3::Zero();
  for (int c = 0; c < 3; ++c) {
    if (w.free_slot[c]) w.free_proj(c, c) = 1.0;
    else w.pinv0.row(c).setZero();
  }

  Mat3 cov = w.pinv0 * w.pinv0.transpose();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c)
      if (r != c && std::abs(cov(r, c)) > 1e-10)
        throw DomainError(tag + ": projected noise covariance is not diagonal");
    w.slot_scale[r] = w.free_slot[r] ? std::sqrt(cov(r, r)) : 0.0;
  }

  w.pinv.resize(w.R.size());
  for (size_t i = 0; i < w.R.size(); ++i) {
    w.pinv[i] = pseudo_inverse(w.R[i]);
    if ((w.pinv[i] * w.R[i] - w.free_proj).cwiseAbs().maxCoeff() > 1e-10)
      throw DomainError(tag + ": pair " + std::to_string(i) +
                        " spans a different subspace than pair 0");
    for (int c = 0; c < 3; ++c)
      if (!w.free_slot[c]) w.pinv[i].row(c).setZero();
  }
}

}  // namespace

std::vector<Vec3> WyckoffPosition::expand(const Vec3& f_basic) const {
  std::vector<Vec3> out;
  out.reserve(R.size());
  for (size_t i = 0; i < R.size(); ++i)
    out.push_back(wrap01(Vec3(R[i] * f_basic + t[i])));
  return out;
}

Vec3 WyckoffPosition::project_basic(const Vec3& v) const { return pinv0 * v; }

Vec3 WyckoffPosition::basic_from_point(const Vec3& f, int i) const {
  return pinv[static_cast<size_t>(i)] * Vec3(f - t[static_cast<size_t>(i)]);
}

const WyckoffPosition& SpaceGroupEntry::position(char letter) const {
  int idx = position_index(letter);
  if (idx < 0)
    throw DomainError("space group " + std::to_string(number) +
                      " has no Wyckoff position '" + std::string(1, letter) + "'");
  return wyckoffs[static_cast<size_t>(idx)];
}

int SpaceGroupEntry::position_index(char letter) const {
  for (size_t i = 0; i < wyckoffs.size(); ++i)
    if (wyckoffs[i].letter == letter) return static_cast<int>(i);
  return -1;
}

SpaceGroupEntry SpaceGroupTable::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open space group file: " + path);

  SpaceGroupEntry entry;
  std::vector<ROp> rops;
  std::vector<std::vector<ParsedPair>> rpairs;
  WyckoffPosition* cur = nullptr;

  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream probe(line);
    std::string first;
    if (!(probe >> first)) continue;

    if (first == "group") {
      if (header_seen)
        throw ParseError("line " + std::to_string(lineno) + ": duplicate header");
      std::string family_word;
      if (!(probe >> entry.number >> entry.symbol >> family_word))
        throw ParseError("line " + std::to_string(lineno) + ": bad group header");
      header_seen = true;
      LatticeFamily expect = family_of_group(entry.number);
      if (family_word != family_name(expect))
        throw ParseError("line " + std::to_string(lineno) +
                         ": family word disagrees with the group number");
      entry.family = expect;
      continue;
    }
    if (!header_seen)
      throw ParseError("line " + std::to_string(lineno) + ": data before header");

    if (first == "wyckoff") {
      std::string letter;
      int mult = 0;
      if (!(probe >> letter >> mult) || letter.size() != 1 || mult <= 0)
        throw ParseError("line " + std::to_string(lineno) + ": bad wyckoff header");
      WyckoffPosition w;
      w.letter = letter[0];
      w.multiplicity = mult;
      entry.wyckoffs.push_back(w);
      rpairs.emplace_back();
      cur = &entry.wyckoffs.back();
      continue;
    }

    ParsedPair p = parse_pair_line(line, lineno);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c)
        if (p.R[r][c].d != 1)
          throw ParseError("line " + std::to_string(lineno) +
                           ": matrix entries must be integers");
      if (24 % p.t[r].d != 0)
        throw ParseError("line " + std::to_string(lineno) +
                         ": translation denominator must divide 24");
    }
    if (cur == nullptr) {
      if (12 % p.t[0].d != 0 || 12 % p.t[1].d != 0 || 12 % p.t[2].d != 0)
        throw ParseError("line " + std::to_string(lineno) +
                         ": op translation denominator must divide 12");
      ROp op;
      op.R = p.R;
      for (int r = 0; r < 3; ++r) op.t[r] = p.t[r].mod1();
      rops.push_back(op);
      entry.ops.push_back({to_mat(op.R), to_vec(op.t)});
    } else {
      rpairs.back().push_back(p);
      cur->R.push_back(to_mat(p.R));
      cur->t.push_back(to_vec(p.t));
    }
  }
  if (!header_seen) throw ParseError("missing group header: " + path);
  if (entry.wyckoffs.empty())
    throw ParseError("no Wyckoff positions: " + path);

  int total = 0;
  for (auto& w : entry.wyckoffs) {
    finalize_position(w, entry.number);
    total = std::max(total, w.multiplicity);
  }
  if (total != entry.order())
    throw DomainError("space group " + std::to_string(entry.number) +
                      ": general multiplicity differs from group order");
  validate_group(entry, rops, rpairs);
  return entry;
}

SpaceGroupTable SpaceGroupTable::load(const std::string& dir) {
  namespace fs = std::filesystem;
  SpaceGroupTable table;
  if (!fs::is_directory(dir))
    throw DomainError("space group directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string name = e.path().filename().string();
    if (name.rfind("sg_", 0) == 0 && name.size() > 4 &&
        name.substr(name.size() - 4) == ".txt")
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw DomainError("no sg_*.txt files under: " + dir);
  for (const auto& f : files) {
    SpaceGroupEntry entry = load_file(f.string());
    int num = entry.number;
    if (!table.entries_.emplace(num, std::move(entry)).second)
      throw DomainError("duplicate space group file for number " +
                        std::to_string(num));
  }
  return table;
}

const SpaceGroupEntry& SpaceGroupTable::at(int number) const {
  auto it = entries_.find(number);
  if (it == entries_.end())
    throw DomainError("space group " + std::to_string(number) +
                      " is not in the shipped table");
  return it->second;
}

std::vector<int> SpaceGroupTable::numbers() const {
  std::vector<int> out;
  out.reserve(entries_.size());
  for (const auto& [num, _] : entries_) out.push_back(num);
  return out;
}

bool verify_symmetry(const Crystal& c, const SpaceGroupEntry& entry, double tol) {
  const int n = c.natoms();
  if (n == 0) return true;
  const double FORBIDDEN = 1e9;
  for (const auto& op : entry.ops) {
    MatX cost(n, n);
    for (int j = 0; j < n; ++j) {
      Vec3 moved = op.apply(c.frac[static_cast<size_t>(j)]);
      for (int i = 0; i < n; ++i) {
        if (c.species[static_cast<size_t>(i)] != c.species[static_cast<size_t>(j)]) {
          cost(j, i) = FORBIDDEN;
          continue;
        }
        Vec3 d = wrap_half(Vec3(moved - c.frac[static_cast<size_t>(i)]));
        cost(j, i) = d.norm();
      }
    }
    std::vector<int> match = hungarian(cost);
    for (int j = 0; j < n; ++j)
      if (cost(j, match[static_cast<size_t>(j)]) > tol) return false;
  }
  return true;
}

Crystal expand_structure(const std::vector<BasicSite>& sites, const Mat3& lattice,
                         const SpaceGroupEntry& entry) {
  Crystal c;
  c.lattice = lattice;
  c.group = entry.number;
  for (const auto& s : sites) {
    if (s.wyckoff_index < 0 ||
        s.wyckoff_index >= static_cast<int>(entry.wyckoffs.size()))
      throw DomainError("Wyckoff index out of range");
    const WyckoffPosition& w = entry.wyckoffs[static_cast<size_t>(s.wyckoff_index)];
    Vec3 inside = w.free_proj * s.basic;
    if ((inside - s.basic).cwiseAbs().maxCoeff() > 1e-8)
      throw DomainError("basic coordinate lies outside its Wyckoff subspace");
    SiteInfo info;
    info.wyckoff_index = s.wyckoff_index;
    info.species = s.species;
    info.basic = inside;
    int site_idx = c.nsites();
    c.sites.push_back(info);
    for (const Vec3& f : w.expand(inside)) {
      c.frac.push_back(f);
      c.species.push_back(s.species);
      c.site_of_atom.push_back(site_idx);
    }
  }
  return c;
}

void validate_annotation(const Crystal& c, const SpaceGroupEntry& entry,
                         double tol) {
  if (!c.annotated()) throw DomainError("crystal carries no annotation");
  if (c.group != entry.number)
    throw DomainError("annotation group differs from the entry");
  if (c.site_of_atom.size() != c.frac.size())
    throw DomainError("annotation: site map length differs from atom count");

  std::vector<std::vector<int>> atoms_of_site(c.sites.size());
  for (size_t a = 0; a < c.site_of_atom.size(); ++a) {
    int s = c.site_of_atom[a];
    if (s < 0 || s >= c.nsites())
      throw DomainError("annotation: site index out of range");
    atoms_of_site[static_cast<size_t>(s)].push_back(static_cast<int>(a));
  }

  for (int s = 0; s < c.nsites(); ++s) {
    const SiteInfo& info = c.sites[static_cast<size_t>(s)];
    if (info.wyckoff_index < 0 ||
        info.wyckoff_index >= static_cast<int>(entry.wyckoffs.size()))
      throw DomainError("annotation: Wyckoff index out of range");
    const WyckoffPosition& w =
        entry.wyckoffs[static_cast<size_t>(info.wyckoff_index)];
    const auto& atom_idx = atoms_of_site[static_cast<size_t>(s)];
    if (static_cast<int>(atom_idx.size()) != w.multiplicity)
      throw DomainError("annotation: orbit size differs from multiplicity");

    std::vector<Vec3> expanded = w.expand(info.basic);
    std::vector<bool> used(expanded.size(), false);
    for (int a : atom_idx) {
      if (c.species[static_cast<size_t>(a)] != info.species)
        throw DomainError("annotation: atom species differs from its site");
      bool found = false;
      for (size_t i = 0; i < expanded.size(); ++i) {
        if (used[i]) continue;
        if (wrap_half(Vec3(expanded[i] - c.frac[static_cast<size_t>(a)]))
                .cwiseAbs()
                .maxCoeff() <= tol) {
          used[i] = true;
          found = true;
          break;
        }
      }
      if (!found)
        throw DomainError("annotation: atom does not match its orbit expansion");
    }
  }
}

}  // namespace xtal
