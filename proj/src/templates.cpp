#include "templates.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "crystal_io.hpp"
#include "hungarian.hpp"

namespace xtal {

namespace {

constexpr double kLoadSymmetryTol = 1e-6;

// Species grouped by reduced count, key ascending; within a class the
// species indices stay ascending.
std::map<int, std::vector<int>> ratio_classes(const std::map<int, int>& comp) {
  int g = 0;
  for (const auto& [sp, n] : comp) g = std::gcd(g, n);
  std::map<int, std::vector<int>> classes;
  for (const auto& [sp, n] : comp) classes[n / g].push_back(sp);
  return classes;
}

struct Assignment {
  std::map<int, int> mapping;  // template species -> query species
  double mean_distance = 0.0;
};

// Minimum-cost descriptor assignment between two compositions with equal
// ratio signatures, solved independently per equal-ratio class.
Assignment assign_elements(const std::map<int, int>& tmpl,
                           const std::map<int, int>& query,
                           const ElementTable& elements) {
  if (ratio_signature(tmpl) != ratio_signature(query))
    throw DomainError("composition ratio signatures differ");
  std::map<int, std::vector<int>> tc = ratio_classes(tmpl);
  std::map<int, std::vector<int>> qc = ratio_classes(query);

  Assignment result;
  double total = 0.0;
  int nelem = 0;
  for (const auto& [ratio, tlist] : tc) {
    const std::vector<int>& qlist = qc.at(ratio);
    const int m = static_cast<int>(tlist.size());
    MatX cost(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        cost(i, j) = (elements.descriptor(tlist[static_cast<size_t>(i)]) -
                      elements.descriptor(qlist[static_cast<size_t>(j)]))
                         .norm();
    std::vector<int> assign = hungarian(cost);
    for (int i = 0; i < m; ++i) {
      result.mapping[tlist[static_cast<size_t>(i)]] =
          qlist[static_cast<size_t>(assign[static_cast<size_t>(i)])];
      total += cost(i, assign[static_cast<size_t>(i)]);
      ++nelem;
    }
  }
  result.mean_distance = total / double(nelem);
  return result;
}

}  // namespace

const TemplateEntry& TemplateIndex::entry(int i) const {
  if (i < 0 || i >= size()) throw DomainError("template index out of range");
  return entries_[static_cast<size_t>(i)];
}

TemplateIndex TemplateIndex::from_crystals(
    std::vector<std::pair<std::string, Crystal>> named,
    const ElementTable& elements, const SpaceGroupTable& groups) {
  TemplateIndex index;
  index.elements_ = &elements;
  for (auto& [name, crystal] : named) {
    if (!crystal.annotated())
      throw DomainError("template " + name + " has no symmetry annotation");
    const SpaceGroupEntry& entry = groups.at(crystal.group);
    if (!verify_symmetry(crystal, entry, kLoadSymmetryTol))
      throw DomainError("template " + name + " fails its group symmetry");
    TemplateEntry te;
    te.signature = ratio_signature(composition(crystal));
    te.crystal = std::move(crystal);
    te.source = name;
    index.entries_.push_back(std::move(te));
  }
  return index;
}

TemplateIndex TemplateIndex::build(const std::string& dir,
                                   const ElementTable& elements,
                                   const SpaceGroupTable& groups) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw DomainError("template directory not found: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DomainError("no crystal files under " + dir);

  std::vector<std::pair<std::string, Crystal>> named;
  for (const std::string& path : files) {
    Crystal c = read_crystal(path, elements, &groups);
    if (!c.annotated())
      throw DomainError("template file lacks a group number: " + path);
    named.emplace_back(fs::path(path).filename().string(), std::move(c));
  }
  return from_crystals(std::move(named), elements, groups);
}

std::vector<RetrievalHit> TemplateIndex::retrieve(
    const std::map<int, int>& query) const {
  if (entries_.empty()) throw DomainError("template index is empty");
  std::vector<int> sig = ratio_signature(query);
  std::vector<RetrievalHit> hits;
  for (int i = 0; i < size(); ++i) {
    const TemplateEntry& te = entries_[static_cast<size_t>(i)];
    if (te.signature != sig) continue;
    Assignment a = assign_elements(composition(te.crystal), query, *elements_);
    hits.push_back({i, 1.0 / (1.0 + a.mean_distance)});
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const RetrievalHit& x, const RetrievalHit& y) {
                     return x.similarity > y.similarity;
                   });
  return hits;
}

Crystal TemplateIndex::substitute(const std::map<int, int>& query,
                                  int index) const {
  return substitute_composition(entry(index).crystal, query, *elements_);
}

Crystal substitute_composition(const Crystal& tmpl,
                               const std::map<int, int>& query,
                               const ElementTable& elements) {
  Assignment a = assign_elements(composition(tmpl), query, elements);
  Crystal out = tmpl;
  for (int& sp : out.species) sp = a.mapping.at(sp);
  for (SiteInfo& site : out.sites) site.species = a.mapping.at(site.species);
  return out;
}

Crystal refine(const Crystal& tmpl, DenoiserBase& denoiser,
               const NoiseSchedule& sched, const SpaceGroupTable& groups,
               int h, int t_start, Rng& rng, SampleTrace* trace) {
  if (t_start < 0 || t_start > sched.T)
    throw DomainError("refine start level outside the schedule");
  if (t_start == 0) return tmpl;
  if (!tmpl.annotated()) throw DomainError("refine needs an annotated crystal");

  const SpaceGroupEntry& entry = groups.at(tmpl.group);
  StructureLayout layout = layout_of(tmpl, entry, h);
  GroundTruth gt = ground_truth_of(tmpl, layout);

  DiffusionState state;
  state.t = t_start;
  Vec6 eps_k;
  for (int i = 0; i < 6; ++i) eps_k[i] = rng.normal();
  state.k = forward_k(gt.k0, layout.mask.free_mask(),
                      sched.alpha_bar[static_cast<size_t>(t_start)], eps_k);
  MatX eps_F(3, layout.nsites());
  for (int s = 0; s < layout.nsites(); ++s)
    for (int r = 0; r < 3; ++r) eps_F(r, s) = rng.normal();
  state.Fp = forward_F(gt.F0, layout, sched.sigma[static_cast<size_t>(t_start)],
                       eps_F);
  state.Ap = gt.A0;

  SampleOptions opt;
  opt.csp_mode = true;
  opt.species.reserve(tmpl.sites.size());
  for (const SiteInfo& site : tmpl.sites) opt.species.push_back(site.species);

  return sample_from(std::move(state), layout, denoiser, sched, rng, opt,
                     trace);
}

}  // namespace xtal
