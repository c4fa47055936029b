#include "evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "elements.hpp"
#include "hungarian.hpp"
#include "lattice.hpp"

namespace xtal {

const double kMinInteratomicDistance = 0.5;

namespace {

std::map<int, std::vector<int>> atoms_by_species(const Crystal& c) {
  std::map<int, std::vector<int>> by;
  for (int i = 0; i < c.natoms(); ++i) by[c.species[static_cast<size_t>(i)]].push_back(i);
  return by;
}

struct TranslationFit {
  bool feasible = false;
  double max_disp = 0.0;
  double rms = 0.0;
};

// Assign pred atoms to ref atoms per element class under a common fractional
// shift tau applied to pred, minimizing summed Cartesian wrapped distance in
// the comparison cell. Two centroid-refinement rounds adjust tau.
TranslationFit fit_translation(const Crystal& pred, const Crystal& ref,
                               const std::map<int, std::vector<int>>& pred_by,
                               const std::map<int, std::vector<int>>& ref_by,
                               const Mat3& cell, Vec3 tau) {
  const int n = pred.natoms();
  std::vector<int> pred_atom(static_cast<size_t>(n));
  std::vector<int> ref_atom(static_cast<size_t>(n));

  TranslationFit fit;
  for (int round = 0; round < 3; ++round) {
    int base = 0;
    for (const auto& [sp, plist] : pred_by) {
      const std::vector<int>& rlist = ref_by.at(sp);
      const int m = static_cast<int>(plist.size());
      MatX cost(m, m);
      for (int a = 0; a < m; ++a) {
        Vec3 fp = pred.frac[static_cast<size_t>(plist[static_cast<size_t>(a)])] + tau;
        for (int b = 0; b < m; ++b) {
          Vec3 d = wrap_half(Vec3(fp - ref.frac[static_cast<size_t>(rlist[static_cast<size_t>(b)])]));
          cost(a, b) = (cell * d).norm();
        }
      }
      std::vector<int> assign = hungarian(cost);
      for (int a = 0; a < m; ++a) {
        pred_atom[static_cast<size_t>(base + a)] = plist[static_cast<size_t>(a)];
        ref_atom[static_cast<size_t>(base + a)] = rlist[static_cast<size_t>(assign[static_cast<size_t>(a)])];
      }
      base += m;
    }

    Vec3 delta = Vec3::Zero();
    for (int i = 0; i < n; ++i) {
      Vec3 fp = pred.frac[static_cast<size_t>(pred_atom[static_cast<size_t>(i)])] + tau;
      delta += wrap_half(Vec3(fp - ref.frac[static_cast<size_t>(ref_atom[static_cast<size_t>(i)])]));
    }
    delta /= double(n);
    if (round < 2) tau -= delta;
  }

  double max_disp = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec3 fp = pred.frac[static_cast<size_t>(pred_atom[static_cast<size_t>(i)])] + tau;
    Vec3 d = wrap_half(Vec3(fp - ref.frac[static_cast<size_t>(ref_atom[static_cast<size_t>(i)])]));
    double dist = (cell * d).norm();
    max_disp = std::max(max_disp, dist);
    ss += dist * dist;
  }
  fit.feasible = true;
  fit.max_disp = max_disp;
  fit.rms = std::sqrt(ss / double(n));
  return fit;
}

}  // namespace

MatchReport match_structures(const Crystal& pred, const Crystal& ref,
                             const MatchSettings& s) {
  MatchReport report;
  if (pred.natoms() == 0 || ref.natoms() == 0)
    throw DomainError("cannot match empty structures");
  if (composition(pred) != composition(ref)) return report;

  CellParams pa = params_from_lattice(pred.lattice);
  CellParams pb = params_from_lattice(ref.lattice);
  auto len_ok = [&](double x, double y) {
    return std::abs(x - y) <= s.ltol * 0.5 * (x + y);
  };
  if (!len_ok(pa.a, pb.a) || !len_ok(pa.b, pb.b) || !len_ok(pa.c, pb.c))
    return report;
  if (std::abs(pa.alpha - pb.alpha) > s.angle_tol ||
      std::abs(pa.beta - pb.beta) > s.angle_tol ||
      std::abs(pa.gamma - pb.gamma) > s.angle_tol)
    return report;

  CellParams avg{0.5 * (pa.a + pb.a),         0.5 * (pa.b + pb.b),
                 0.5 * (pa.c + pb.c),         0.5 * (pa.alpha + pb.alpha),
                 0.5 * (pa.beta + pb.beta),   0.5 * (pa.gamma + pb.gamma)};
  Mat3 cell = lattice_from_params(avg);

  const int n = pred.natoms();
  double scale = std::cbrt(std::abs(cell.determinant()) / double(n));

  std::map<int, std::vector<int>> pred_by = atoms_by_species(pred);
  std::map<int, std::vector<int>> ref_by = atoms_by_species(ref);

  // Rarest element class; ties go to the smaller species index.
  int anchor_sp = -1;
  size_t anchor_count = 0;
  for (const auto& [sp, list] : pred_by) {
    if (anchor_sp < 0 || list.size() < anchor_count) {
      anchor_sp = sp;
      anchor_count = list.size();
    }
  }

  // Translation seeds from both directions keep the search symmetric under
  // swapping the arguments.
  std::vector<Vec3> seeds;
  int a0 = pred_by.at(anchor_sp).front();
  for (int b : ref_by.at(anchor_sp))
    seeds.push_back(ref.frac[static_cast<size_t>(b)] - pred.frac[static_cast<size_t>(a0)]);
  int b0 = ref_by.at(anchor_sp).front();
  for (int a : pred_by.at(anchor_sp))
    seeds.push_back(ref.frac[static_cast<size_t>(b0)] - pred.frac[static_cast<size_t>(a)]);

  bool any = false;
  TranslationFit best;
  for (const Vec3& tau : seeds) {
    TranslationFit fit = fit_translation(pred, ref, pred_by, ref_by, cell, tau);
    if (!any || fit.max_disp < best.max_disp ||
        (fit.max_disp == best.max_disp && fit.rms < best.rms)) {
      best = fit;
      any = true;
    }
  }

  if (any && best.max_disp <= s.stol * scale) {
    report.matched = true;
    report.rmsd = best.rms / scale;
  }
  return report;
}

double match_rate(const std::vector<MatchReport>& reports) {
  if (reports.empty()) throw DomainError("match rate of an empty set");
  int matched = 0;
  for (const MatchReport& r : reports) matched += r.matched ? 1 : 0;
  return double(matched) / double(reports.size());
}

double mean_rmsd(const std::vector<MatchReport>& reports) {
  double acc = 0.0;
  int count = 0;
  for (const MatchReport& r : reports) {
    if (r.matched) {
      acc += *r.rmsd;
      ++count;
    }
  }
  if (count == 0) throw DomainError("no matched pairs to average");
  return acc / double(count);
}

bool structural_validity(const Crystal& c) {
  const int n = c.natoms();
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      Vec3 df = wrap01(c.frac[static_cast<size_t>(i)]) - wrap01(c.frac[static_cast<size_t>(j)]);
      for (int nx = -1; nx <= 1; ++nx)
        for (int ny = -1; ny <= 1; ++ny)
          for (int nz = -1; nz <= 1; ++nz) {
            if (i == j && nx == 0 && ny == 0 && nz == 0) continue;
            Vec3 v = df + Vec3(nx, ny, nz);
            if ((c.lattice * v).norm() <= kMinInteratomicDistance) return false;
          }
    }
  }
  return true;
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("W1 of an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const long long n = static_cast<long long>(a.size());
  const long long m = static_cast<long long>(b.size());
  long long i = 0, j = 0;
  double q = 0.0, acc = 0.0;
  while (i < n && j < m) {
    long long ca = (i + 1) * m;
    long long cb = (j + 1) * n;
    double qn = double(std::min(ca, cb)) / double(n * m);
    acc += (qn - q) * std::abs(a[static_cast<size_t>(i)] - b[static_cast<size_t>(j)]);
    q = qn;
    if (ca <= cb) ++i;
    if (cb <= ca) ++j;
  }
  return acc;
}

double crystal_density(const Crystal& c, const ElementTable& elements) {
  if (c.natoms() == 0) throw DomainError("density of an empty crystal");
  double mass = 0.0;
  for (int s : c.species) mass += elements.at(s).atomic_mass;
  // amu per cubic angstrom to g per cubic centimeter
  return mass / std::abs(c.volume()) * 1.66053906660;
}

PropertyStats property_stats(const std::vector<Crystal>& gen,
                             const std::vector<Crystal>& ref,
                             const ElementTable& elements) {
  if (gen.empty() || ref.empty()) throw DomainError("property stats of empty sets");
  auto densities = [&](const std::vector<Crystal>& set) {
    std::vector<double> out;
    out.reserve(set.size());
    for (const Crystal& c : set) out.push_back(crystal_density(c, elements));
    return out;
  };
  auto nelems = [&](const std::vector<Crystal>& set) {
    std::vector<double> out;
    out.reserve(set.size());
    for (const Crystal& c : set) out.push_back(double(composition(c).size()));
    return out;
  };
  PropertyStats stats;
  stats.d_density = wasserstein1(densities(gen), densities(ref));
  stats.d_nelem = wasserstein1(nelems(gen), nelems(ref));
  return stats;
}

void write_match_table(const std::string& path,
                       const std::vector<MatchReport>& reports) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot open report file: " + path);
  out << "index\tmatched\trmsd\n";
  for (size_t i = 0; i < reports.size(); ++i) {
    out << i << '\t' << (reports[i].matched ? 1 : 0) << '\t';
    if (reports[i].matched)
      out << *reports[i].rmsd;
    else
      out << '-';
    out << '\n';
  }
  if (!out) throw DomainError("report write failed: " + path);
}

}  // namespace xtal
