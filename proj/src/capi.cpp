#include "xtalgen/xtalgen.h"

#include <cstring>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "crystal_io.hpp"
#include "denoiser.hpp"
#include "diffusion.hpp"
#include "elements.hpp"
#include "evaluation.hpp"
#include "lattice.hpp"
#include "spacegroup.hpp"
#include "templates.hpp"

using namespace xtal;

struct xg_table {
  SpaceGroupTable table;
};
struct xg_elements {
  ElementTable table;
};
struct xg_crystal {
  Crystal crystal;
};
struct xg_config {
  RunConfig cfg;
};
struct xg_model {
  std::unique_ptr<Denoiser> net;
  std::unique_ptr<OracleDenoiser> oracle;
  int h = 0;
  DenoiserBase& base() {
    if (net) return *net;
    return *oracle;
  }
};
struct xg_index {
  TemplateIndex index;
};

namespace {

thread_local std::string g_error;

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return XG_OK;
  } catch (const ParseError& e) {
    g_error = e.what();
    return XG_ERR_PARSE;
  } catch (const DomainError& e) {
    g_error = e.what();
    return XG_ERR_DOMAIN;
  } catch (const std::exception& e) {
    g_error = e.what();
    return XG_ERR_INTERNAL;
  }
}

void require(bool cond, const char* msg) {
  if (!cond) throw DomainError(msg);
}

void copy_string(const std::string& s, char* buf, size_t buflen) {
  require(buf != nullptr && buflen > 0, "null output buffer");
  if (s.size() + 1 > buflen) throw DomainError("output buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
}

Mat3 lattice_in(const double L9[9]) {
  require(L9 != nullptr, "null lattice");
  Mat3 L;
  for (int r = 0; r < 3; ++r)
    for (int j = 0; j < 3; ++j) L(j, r) = L9[3 * r + j];
  return L;
}

void lattice_out(const Mat3& L, double L9[9]) {
  require(L9 != nullptr, "null lattice output");
  for (int r = 0; r < 3; ++r)
    for (int j = 0; j < 3; ++j) L9[3 * r + j] = L(j, r);
}

std::map<int, int> parse_composition(const char* text, const ElementTable& e) {
  require(text != nullptr, "null composition");
  std::istringstream in(text);
  std::string tok;
  std::map<int, int> comp;
  while (in >> tok) {
    size_t colon = tok.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= tok.size())
      throw ParseError("composition token must be Symbol:count, got '" + tok +
                       "'");
    int idx = e.index_of(tok.substr(0, colon));
    int count = 0;
    try {
      size_t pos = 0;
      count = std::stoi(tok.substr(colon + 1), &pos);
      if (pos != tok.size() - colon - 1) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError("bad count in composition token '" + tok + "'");
    }
    if (count <= 0) throw ParseError("composition counts must be positive");
    comp[idx] += count;
  }
  if (comp.empty()) throw ParseError("empty composition");
  return comp;
}

struct SiteSpec {
  char letter = 0;
  int species = -1;  // -1 when the token has no element
};

std::vector<SiteSpec> parse_assignment(const char* text,
                                       const ElementTable& e) {
  require(text != nullptr, "null site assignment");
  std::istringstream in(text);
  std::string tok;
  std::vector<SiteSpec> specs;
  while (in >> tok) {
    SiteSpec spec;
    size_t colon = tok.find(':');
    std::string letter = colon == std::string::npos ? tok : tok.substr(0, colon);
    if (letter.size() != 1)
      throw ParseError("Wyckoff letter must be one character, got '" + tok +
                       "'");
    spec.letter = letter[0];
    if (colon != std::string::npos) {
      if (colon + 1 >= tok.size())
        throw ParseError("missing element in site token '" + tok + "'");
      spec.species = e.index_of(tok.substr(colon + 1));
    }
    specs.push_back(spec);
  }
  if (specs.empty()) throw ParseError("empty site assignment");
  return specs;
}

std::string composition_string(const Crystal& c, const ElementTable& e) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [sp, n] : composition(c)) {
    if (!first) out << ' ';
    first = false;
    out << e.at(sp).symbol << ':' << n;
  }
  return out.str();
}

std::vector<int> eval_grid(int T) {
  std::vector<int> grid{1, T / 4, T / 2, 3 * T / 4, T};
  for (int& t : grid) t = std::max(1, t);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

constexpr std::uint64_t kEvalSeedOffset = 1000000007ULL;

}  // namespace

extern "C" {

const char* xg_last_error(void) { return g_error.c_str(); }

/* ---- space groups ---- */

int xg_table_load(const char* dir, xg_table** out) {
  return guarded([&] {
    require(dir != nullptr && out != nullptr, "null argument");
    auto handle = std::make_unique<xg_table>();
    handle->table = SpaceGroupTable::load(dir);
    *out = handle.release();
  });
}

void xg_table_free(xg_table* t) { delete t; }

int xg_table_has(const xg_table* t, int group) {
  int result = -1;
  int rc = guarded([&] {
    require(t != nullptr, "null table");
    result = t->table.has(group) ? 1 : 0;
  });
  return rc == XG_OK ? result : -1;
}

int xg_table_order(const xg_table* t, int group, int* out) {
  return guarded([&] {
    require(t != nullptr && out != nullptr, "null argument");
    *out = t->table.at(group).order();
  });
}

/* ---- elements ---- */

int xg_elements_load(const char* path, xg_elements** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    auto handle = std::make_unique<xg_elements>();
    handle->table = ElementTable::load(path);
    *out = handle.release();
  });
}

void xg_elements_free(xg_elements* e) { delete e; }

int xg_elements_count(const xg_elements* e) {
  int result = -1;
  int rc = guarded([&] {
    require(e != nullptr, "null element table");
    result = e->table.size();
  });
  return rc == XG_OK ? result : -1;
}

int xg_elements_index(const xg_elements* e, const char* symbol, int* out) {
  return guarded([&] {
    require(e != nullptr && symbol != nullptr && out != nullptr,
            "null argument");
    *out = e->table.index_of(symbol);
  });
}

/* ---- crystals ---- */

int xg_crystal_read(const char* path, const xg_elements* e, const xg_table* t,
                    xg_crystal** out) {
  return guarded([&] {
    require(path != nullptr && e != nullptr && out != nullptr, "null argument");
    auto handle = std::make_unique<xg_crystal>();
    handle->crystal =
        read_crystal(path, e->table, t != nullptr ? &t->table : nullptr);
    *out = handle.release();
  });
}

int xg_crystal_write(const xg_crystal* c, const char* path,
                     const xg_elements* e, const xg_table* t) {
  return guarded([&] {
    require(c != nullptr && path != nullptr && e != nullptr, "null argument");
    write_crystal(path, c->crystal, e->table,
                  t != nullptr ? &t->table : nullptr);
  });
}

int xg_crystal_export_cif(const xg_crystal* c, const char* path,
                          const xg_elements* e) {
  return guarded([&] {
    require(c != nullptr && path != nullptr && e != nullptr, "null argument");
    export_cif(path, c->crystal, e->table);
  });
}

void xg_crystal_free(xg_crystal* c) { delete c; }

int xg_crystal_natoms(const xg_crystal* c) {
  int result = -1;
  int rc = guarded([&] {
    require(c != nullptr, "null crystal");
    result = c->crystal.natoms();
  });
  return rc == XG_OK ? result : -1;
}

int xg_crystal_group(const xg_crystal* c) {
  int result = 0;
  int rc = guarded([&] {
    require(c != nullptr, "null crystal");
    result = c->crystal.group;
  });
  return rc == XG_OK ? result : 0;
}

int xg_crystal_lattice(const xg_crystal* c, double out9[9]) {
  return guarded([&] {
    require(c != nullptr, "null crystal");
    lattice_out(c->crystal.lattice, out9);
  });
}

int xg_crystal_params(const xg_crystal* c, double out6[6]) {
  return guarded([&] {
    require(c != nullptr && out6 != nullptr, "null argument");
    CellParams p = params_from_lattice(c->crystal.lattice);
    out6[0] = p.a;
    out6[1] = p.b;
    out6[2] = p.c;
    out6[3] = p.alpha;
    out6[4] = p.beta;
    out6[5] = p.gamma;
  });
}

int xg_crystal_k(const xg_crystal* c, double out6[6]) {
  return guarded([&] {
    require(c != nullptr && out6 != nullptr, "null argument");
    Vec6 k = k_from_lattice(c->crystal.lattice);
    for (int i = 0; i < 6; ++i) out6[i] = k[i];
  });
}

int xg_crystal_atom(const xg_crystal* c, const xg_elements* e, int i,
                    char symbol[8], double frac3[3]) {
  return guarded([&] {
    require(c != nullptr && e != nullptr && symbol != nullptr &&
                frac3 != nullptr,
            "null argument");
    require(i >= 0 && i < c->crystal.natoms(), "atom index out of range");
    copy_string(e->table.at(c->crystal.species[static_cast<size_t>(i)]).symbol,
                symbol, 8);
    for (int r = 0; r < 3; ++r)
      frac3[r] = c->crystal.frac[static_cast<size_t>(i)][r];
  });
}

int xg_crystal_formula(const xg_crystal* c, const xg_elements* e, char* buf,
                       size_t buflen) {
  return guarded([&] {
    require(c != nullptr && e != nullptr, "null argument");
    copy_string(composition_string(c->crystal, e->table), buf, buflen);
  });
}

int xg_crystal_density(const xg_crystal* c, const xg_elements* e,
                       double* out) {
  return guarded([&] {
    require(c != nullptr && e != nullptr && out != nullptr, "null argument");
    *out = crystal_density(c->crystal, e->table);
  });
}

int xg_crystal_validate(const xg_crystal* c, int* ok) {
  return guarded([&] {
    require(c != nullptr && ok != nullptr, "null argument");
    *ok = structural_validity(c->crystal) ? 1 : 0;
  });
}

int xg_crystal_verify_symmetry(const xg_crystal* c, const xg_table* t,
                               double tol, int* ok) {
  return guarded([&] {
    require(c != nullptr && t != nullptr && ok != nullptr, "null argument");
    require(c->crystal.group != 0, "crystal has no group annotation");
    *ok = verify_symmetry(c->crystal, t->table.at(c->crystal.group), tol) ? 1
                                                                          : 0;
  });
}

int xg_crystal_match(const xg_crystal* pred, const xg_crystal* ref,
                     double stol, double angle_tol, double ltol, int* matched,
                     double* rmsd) {
  return guarded([&] {
    require(pred != nullptr && ref != nullptr && matched != nullptr,
            "null argument");
    MatchSettings settings;
    settings.stol = stol;
    settings.angle_tol = angle_tol;
    settings.ltol = ltol;
    MatchReport report =
        match_structures(pred->crystal, ref->crystal, settings);
    *matched = report.matched ? 1 : 0;
    if (report.matched && rmsd != nullptr) *rmsd = *report.rmsd;
  });
}

/* ---- lattice algebra ---- */

int xg_k_from_lattice(const double L9[9], double k6[6]) {
  return guarded([&] {
    require(k6 != nullptr, "null k output");
    Vec6 k = k_from_lattice(lattice_in(L9));
    for (int i = 0; i < 6; ++i) k6[i] = k[i];
  });
}

int xg_lattice_from_k(const double k6[6], double L9[9]) {
  return guarded([&] {
    require(k6 != nullptr, "null k input");
    Vec6 k;
    for (int i = 0; i < 6; ++i) k[i] = k6[i];
    lattice_out(lattice_from_k(k), L9);
  });
}

int xg_params_from_lattice(const double L9[9], double p6[6]) {
  return guarded([&] {
    require(p6 != nullptr, "null parameter output");
    CellParams p = params_from_lattice(lattice_in(L9));
    p6[0] = p.a;
    p6[1] = p.b;
    p6[2] = p.c;
    p6[3] = p.alpha;
    p6[4] = p.beta;
    p6[5] = p.gamma;
  });
}

int xg_lattice_from_params(const double p6[6], double L9[9]) {
  return guarded([&] {
    require(p6 != nullptr, "null parameter input");
    CellParams p{p6[0], p6[1], p6[2], p6[3], p6[4], p6[5]};
    lattice_out(lattice_from_params(p), L9);
  });
}

int xg_family_of_group(int group, int* family) {
  return guarded([&] {
    require(family != nullptr, "null family output");
    *family = static_cast<int>(family_of_group(group));
  });
}

int xg_family_name(int family, char* buf, size_t buflen) {
  return guarded([&] {
    require(family >= 0 && family <= 5, "family index must be in 0..5");
    copy_string(family_name(static_cast<LatticeFamily>(family)), buf, buflen);
  });
}

int xg_project_k(const double k6_in[6], int group, double k6_out[6]) {
  return guarded([&] {
    require(k6_in != nullptr && k6_out != nullptr, "null argument");
    Vec6 k;
    for (int i = 0; i < 6; ++i) k[i] = k6_in[i];
    Vec6 proj = project_k(k, family_mask(group));
    for (int i = 0; i < 6; ++i) k6_out[i] = proj[i];
  });
}

int xg_encode_report(const double L9[9], double k6[6], double* roundtrip_err,
                     uint8_t family_ok[6]) {
  return guarded([&] {
    require(k6 != nullptr && roundtrip_err != nullptr && family_ok != nullptr,
            "null argument");
    Mat3 L = lattice_in(L9);
    PolarResult polar = polar_decompose(L);
    *roundtrip_err = (L - polar.Q * exp_symmetric(polar.S)).norm();
    Vec6 k = k_from_lattice(L);
    for (int i = 0; i < 6; ++i) k6[i] = k[i];
    // One representative group per family.
    const int reps[6] = {1, 3, 16, 75, 143, 195};
    for (int f = 0; f < 6; ++f) {
      Vec6 proj = project_k(k, family_mask(reps[f]));
      family_ok[f] = (proj - k).cwiseAbs().maxCoeff() <= 1e-8 ? 1 : 0;
    }
  });
}

/* ---- configuration ---- */

int xg_config_default(xg_config** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = new xg_config{};
  });
}

int xg_config_load(const char* path, xg_config** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    auto handle = std::make_unique<xg_config>();
    handle->cfg = RunConfig::load(path);
    *out = handle.release();
  });
}

void xg_config_free(xg_config* c) { delete c; }

int xg_config_set(xg_config* c, const char* key, const char* value) {
  return guarded([&] {
    require(c != nullptr && key != nullptr && value != nullptr,
            "null argument");
    c->cfg.set(key, value);
  });
}

int xg_config_get(const xg_config* c, const char* key, char* buf,
                  size_t buflen) {
  return guarded([&] {
    require(c != nullptr && key != nullptr, "null argument");
    copy_string(c->cfg.get(key), buf, buflen);
  });
}

/* ---- models ---- */

int xg_model_create(const xg_config* cfg, int h, uint64_t seed,
                    xg_model** out) {
  return guarded([&] {
    require(cfg != nullptr && out != nullptr, "null argument");
    Denoiser::Sizes sizes;
    sizes.layers = cfg->cfg.layers;
    sizes.hidden = cfg->cfg.hidden;
    sizes.fourier = cfg->cfg.fourier;
    sizes.h = h;
    auto handle = std::make_unique<xg_model>();
    handle->net = std::make_unique<Denoiser>(sizes, seed);
    handle->h = h;
    *out = handle.release();
  });
}

int xg_model_load(const char* path, xg_model** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    auto handle = std::make_unique<xg_model>();
    handle->net = std::make_unique<Denoiser>(Denoiser::load(path));
    handle->h = handle->net->sizes().h;
    *out = handle.release();
  });
}

int xg_model_save(const xg_model* m, const char* path) {
  return guarded([&] {
    require(m != nullptr && path != nullptr, "null argument");
    require(m->net != nullptr, "oracle models have no checkpoint");
    m->net->save(path);
  });
}

int xg_model_oracle(const xg_crystal* target, const xg_table* t,
                    const xg_config* cfg, const xg_elements* e,
                    xg_model** out) {
  return guarded([&] {
    require(target != nullptr && t != nullptr && cfg != nullptr &&
                e != nullptr && out != nullptr,
            "null argument");
    require(target->crystal.group != 0, "oracle target must be annotated");
    const SpaceGroupEntry& entry = t->table.at(target->crystal.group);
    int h = e->table.size();
    StructureLayout layout = layout_of(target->crystal, entry, h);
    GroundTruth gt = ground_truth_of(target->crystal, layout);
    auto handle = std::make_unique<xg_model>();
    handle->oracle =
        std::make_unique<OracleDenoiser>(std::move(gt), cfg->cfg.n_img);
    handle->h = h;
    *out = handle.release();
  });
}

void xg_model_free(xg_model* m) { delete m; }

int xg_model_train(xg_model* m, const xg_config* cfg, const xg_table* t,
                   const xg_elements* e, const char* const* paths, int npaths,
                   double* loss_before, double* loss_after) {
  return guarded([&] {
    require(m != nullptr && cfg != nullptr && t != nullptr && e != nullptr &&
                paths != nullptr,
            "null argument");
    require(m->net != nullptr, "cannot train an oracle model");
    require(npaths > 0, "training set is empty");
    require(m->h == e->table.size(),
            "model element count does not match the element table");

    std::vector<TrainingExample> data;
    for (int i = 0; i < npaths; ++i) {
      require(paths[i] != nullptr, "null training path");
      Crystal c = read_crystal(paths[i], e->table, &t->table);
      require(c.annotated(), "training structures need a group annotation");
      const SpaceGroupEntry& entry = t->table.at(c.group);
      TrainingExample ex;
      ex.layout = layout_of(c, entry, m->h);
      ex.gt = ground_truth_of(c, ex.layout);
      data.push_back(std::move(ex));
    }

    NoiseSchedule sched = cfg->cfg.make_schedule();
    fill_lambda(sched, cfg->cfg.n_img);
    LossOptions lopt = cfg->cfg.loss_options(cfg->cfg.mode == "csp");
    std::vector<int> grid = eval_grid(sched.T);
    std::uint64_t eval_seed = cfg->cfg.seed + kEvalSeedOffset;

    double before = eval_loss(*m->net, data, sched, lopt, grid, eval_seed);
    TrainOptions topt;
    topt.epochs = cfg->cfg.epochs;
    topt.lr = cfg->cfg.lr;
    topt.momentum = cfg->cfg.momentum;
    topt.optimizer = cfg->cfg.optimizer;
    topt.seed = cfg->cfg.seed;
    topt.loss = lopt;
    train(*m->net, data, sched, topt);
    double after = eval_loss(*m->net, data, sched, lopt, grid, eval_seed);

    if (loss_before != nullptr) *loss_before = before;
    if (loss_after != nullptr) *loss_after = after;
  });
}

/* ---- sampling ---- */

int xg_sample_one(xg_model* m, const xg_config* cfg, const xg_table* t,
                  const xg_elements* e, int group, const char* assignment,
                  uint64_t seed, xg_crystal** out) {
  return guarded([&] {
    require(m != nullptr && cfg != nullptr && t != nullptr && e != nullptr &&
                out != nullptr,
            "null argument");
    require(m->h == e->table.size(),
            "model element count does not match the element table");
    require(cfg->cfg.mode != "refine",
            "refine mode starts from a template; use xg_refine");
    const SpaceGroupEntry& entry = t->table.at(group);

    std::vector<SiteSpec> specs = parse_assignment(assignment, e->table);
    std::vector<int> wyckoff_index;
    std::vector<int> species;
    bool csp = cfg->cfg.mode == "csp";
    for (const SiteSpec& spec : specs) {
      int wi = entry.position_index(spec.letter);
      if (wi < 0)
        throw DomainError(std::string("group ") + std::to_string(group) +
                          " has no Wyckoff letter '" + spec.letter + "'");
      if (csp && spec.species < 0)
        throw DomainError("csp mode needs an element for every site");
      wyckoff_index.push_back(wi);
      species.push_back(spec.species);
    }

    StructureLayout layout = StructureLayout::make(entry, wyckoff_index, m->h);
    NoiseSchedule sched = cfg->cfg.make_schedule();
    Rng rng(seed);
    SampleOptions opt;
    opt.csp_mode = csp;
    if (csp) opt.species = species;
    opt.n_img = cfg->cfg.n_img;

    auto handle = std::make_unique<xg_crystal>();
    handle->crystal = sample(layout, m->base(), sched, rng, opt);
    *out = handle.release();
  });
}

/* ---- templates ---- */

int xg_index_build(const char* dir, const xg_elements* e, const xg_table* t,
                   xg_index** out) {
  return guarded([&] {
    require(dir != nullptr && e != nullptr && t != nullptr && out != nullptr,
            "null argument");
    auto handle = std::make_unique<xg_index>();
    handle->index = TemplateIndex::build(dir, e->table, t->table);
    *out = handle.release();
  });
}

void xg_index_free(xg_index* idx) { delete idx; }

int xg_index_size(const xg_index* idx) {
  int result = -1;
  int rc = guarded([&] {
    require(idx != nullptr, "null index");
    result = idx->index.size();
  });
  return rc == XG_OK ? result : -1;
}

int xg_index_retrieve(const xg_index* idx, const char* composition,
                      int* indices, double* similarities, int cap,
                      int* n_out) {
  return guarded([&] {
    require(idx != nullptr && n_out != nullptr, "null argument");
    require(cap >= 0, "negative capacity");
    // The index was built from an element table; reuse it for the query.
    std::map<int, int> query =
        parse_composition(composition, idx->index.elements());
    std::vector<RetrievalHit> hits = idx->index.retrieve(query);
    int n = std::min<int>(cap, static_cast<int>(hits.size()));
    for (int i = 0; i < n; ++i) {
      if (indices != nullptr) indices[i] = hits[static_cast<size_t>(i)].index;
      if (similarities != nullptr)
        similarities[i] = hits[static_cast<size_t>(i)].similarity;
    }
    *n_out = static_cast<int>(hits.size());
  });
}

int xg_index_source(const xg_index* idx, int i, char* buf, size_t buflen) {
  return guarded([&] {
    require(idx != nullptr, "null index");
    copy_string(idx->index.entry(i).source, buf, buflen);
  });
}

int xg_index_entry(const xg_index* idx, int i, xg_crystal** out) {
  return guarded([&] {
    require(idx != nullptr && out != nullptr, "null argument");
    *out = new xg_crystal{idx->index.entry(i).crystal};
  });
}

int xg_index_substitute(const xg_index* idx, const char* composition, int i,
                        xg_crystal** out) {
  return guarded([&] {
    require(idx != nullptr && out != nullptr, "null argument");
    std::map<int, int> query =
        parse_composition(composition, idx->index.elements());
    *out = new xg_crystal{idx->index.substitute(query, i)};
  });
}

int xg_refine(const xg_crystal* tmpl, xg_model* m, const xg_config* cfg,
              const xg_table* t, const xg_elements* e, uint64_t seed,
              xg_crystal** out) {
  return guarded([&] {
    require(tmpl != nullptr && m != nullptr && cfg != nullptr && t != nullptr &&
                e != nullptr && out != nullptr,
            "null argument");
    require(m->h == e->table.size(),
            "model element count does not match the element table");
    NoiseSchedule sched = cfg->cfg.make_schedule();
    Rng rng(seed);
    auto handle = std::make_unique<xg_crystal>();
    handle->crystal = refine(tmpl->crystal, m->base(), sched, t->table, m->h,
                             cfg->cfg.t_start, rng);
    *out = handle.release();
  });
}

/* ---- set statistics ---- */

int xg_property_stats(const xg_crystal* const* gen, int ngen,
                      const xg_crystal* const* ref, int nref,
                      const xg_elements* e, double* d_density,
                      double* d_nelem) {
  return guarded([&] {
    require(gen != nullptr && ref != nullptr && e != nullptr &&
                d_density != nullptr && d_nelem != nullptr,
            "null argument");
    require(ngen > 0 && nref > 0, "property stats need nonempty sets");
    std::vector<Crystal> gen_set, ref_set;
    for (int i = 0; i < ngen; ++i) {
      require(gen[i] != nullptr, "null crystal in generated set");
      gen_set.push_back(gen[i]->crystal);
    }
    for (int i = 0; i < nref; ++i) {
      require(ref[i] != nullptr, "null crystal in reference set");
      ref_set.push_back(ref[i]->crystal);
    }
    PropertyStats stats = property_stats(gen_set, ref_set, e->table);
    *d_density = stats.d_density;
    *d_nelem = stats.d_nelem;
  });
}

}  // extern "C"
