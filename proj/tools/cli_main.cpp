#include <xtalgen/xtalgen.h>

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

namespace fs = std::filesystem;

namespace {

struct TableDel {
  void operator()(xg_table* p) const { xg_table_free(p); }
};
struct ElementsDel {
  void operator()(xg_elements* p) const { xg_elements_free(p); }
};
struct CrystalDel {
  void operator()(xg_crystal* p) const { xg_crystal_free(p); }
};
struct ConfigDel {
  void operator()(xg_config* p) const { xg_config_free(p); }
};
struct ModelDel {
  void operator()(xg_model* p) const { xg_model_free(p); }
};
struct IndexDel {
  void operator()(xg_index* p) const { xg_index_free(p); }
};
using TablePtr = std::unique_ptr<xg_table, TableDel>;
using ElementsPtr = std::unique_ptr<xg_elements, ElementsDel>;
using CrystalPtr = std::unique_ptr<xg_crystal, CrystalDel>;
using ConfigPtr = std::unique_ptr<xg_config, ConfigDel>;
using ModelPtr = std::unique_ptr<xg_model, ModelDel>;
using IndexPtr = std::unique_ptr<xg_index, IndexDel>;

// Domain/parse failures from the library exit 1 with the library message.
#define CHECK(call)                                   \
  do {                                                \
    if ((call) != XG_OK) {                            \
      std::fprintf(stderr, "error: %s\n", xg_last_error()); \
      return 1;                                       \
    }                                                 \
  } while (0)

int usage_error(const std::string& msg) {
  std::fprintf(stderr, "usage error: %s\n", msg.c_str());
  return 2;
}

struct Common {
  std::string config_path;
  std::string spacegroups = "data/spacegroups";
  std::string elements = "data/elements.tsv";
  std::uint64_t seed = 0;
  CLI::Option* spacegroups_opt = nullptr;
  CLI::Option* elements_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "run configuration JSON file");
  c.spacegroups_opt = sub->add_option("--spacegroups", c.spacegroups,
                                      "space-group data directory")
                          ->capture_default_str();
  c.elements_opt =
      sub->add_option("--elements", c.elements, "element table file")
          ->capture_default_str();
  c.seed_opt = sub->add_option("--seed", c.seed, "random seed override");
}

struct Ctx {
  ConfigPtr cfg;
  TablePtr table;
  ElementsPtr elements;
};

std::string cfg_get(const xg_config* cfg, const char* key) {
  char buf[1024];
  if (xg_config_get(cfg, key, buf, sizeof(buf)) != XG_OK) return {};
  return buf;
}

int load_ctx(const Common& c, Ctx& ctx) {
  xg_config* cfg = nullptr;
  if (!c.config_path.empty()) {
    CHECK(xg_config_load(c.config_path.c_str(), &cfg));
  } else {
    CHECK(xg_config_default(&cfg));
  }
  ctx.cfg.reset(cfg);
  if (c.seed_opt != nullptr && c.seed_opt->count() > 0)
    CHECK(xg_config_set(cfg, "seed", std::to_string(c.seed).c_str()));

  std::string sg = c.spacegroups;
  std::string el = c.elements;
  if (c.spacegroups_opt != nullptr && c.spacegroups_opt->count() == 0) {
    std::string from_cfg = cfg_get(cfg, "spacegroups");
    if (!from_cfg.empty()) sg = from_cfg;
  }
  if (c.elements_opt != nullptr && c.elements_opt->count() == 0) {
    std::string from_cfg = cfg_get(cfg, "elements");
    if (!from_cfg.empty()) el = from_cfg;
  }

  xg_table* table = nullptr;
  CHECK(xg_table_load(sg.c_str(), &table));
  ctx.table.reset(table);
  xg_elements* elements = nullptr;
  CHECK(xg_elements_load(el.c_str(), &elements));
  ctx.elements.reset(elements);
  return 0;
}

std::uint64_t cfg_seed(const xg_config* cfg) {
  return std::strtoull(cfg_get(cfg, "seed").c_str(), nullptr, 10);
}

std::vector<std::string> json_files(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

/* ---- encode ---- */

int cmd_encode(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::fprintf(stderr, "error: cannot open lattice file: %s\n", path.c_str());
    return 1;
  }
  double L[9];
  for (double& v : L) {
    if (!(in >> v)) {
      std::fprintf(stderr,
                   "error: %s: expected 9 numbers (three cell-vector rows)\n",
                   path.c_str());
      return 1;
    }
  }
  double k[6], err = 0;
  uint8_t ok[6];
  CHECK(xg_encode_report(L, k, &err, ok));

  std::printf("k = [");
  for (int i = 0; i < 6; ++i) std::printf("%s% .12g", i ? ", " : "", k[i]);
  std::printf("]\n");
  std::printf("roundtrip |L - Q exp(S)|_F = %.3e\n", err);

  static const char* kConstraint[6] = {
      "no constraints",
      "k1=k3=0",
      "k1=k2=k3=0",
      "k1=k2=k3=k4=0",
      "k2=k3=k4=0, k1=-log(3)/4",
      "k1=k2=k3=k4=k5=0",
  };
  for (int f = 0; f < 6; ++f) {
    char name[32];
    CHECK(xg_family_name(f, name, sizeof(name)));
    std::printf("family %-12s %-9s (%s)\n", name,
                ok[f] ? "satisfied" : "violated", kConstraint[f]);
  }
  return 0;
}

/* ---- validate ---- */

int cmd_validate(const Common& common, const std::string& path) {
  Ctx ctx;
  if (int rc = load_ctx(common, ctx)) return rc;
  xg_crystal* c = nullptr;
  CHECK(xg_crystal_read(path.c_str(), ctx.elements.get(), nullptr, &c));
  CrystalPtr crystal(c);
  int ok = 0;
  CHECK(xg_crystal_validate(c, &ok));
  std::printf("%s: %s\n", path.c_str(), ok ? "valid" : "invalid");
  return 0;
}

/* ---- match ---- */

struct PairRow {
  std::string name;
  int matched = 0;
  double rmsd = 0;
};

int write_rows(const std::string& path, const std::vector<PairRow>& rows) {
  std::ofstream out(path);
  if (!out) {
    std::fprintf(stderr, "error: cannot open table file: %s\n", path.c_str());
    return 1;
  }
  out << "name\tmatched\trmsd\n";
  for (const PairRow& r : rows) {
    out << r.name << '\t' << r.matched << '\t';
    if (r.matched)
      out << r.rmsd;
    else
      out << '-';
    out << '\n';
  }
  return 0;
}

int print_summary(const std::vector<PairRow>& rows) {
  int matched = 0;
  double rmsd_sum = 0;
  for (const PairRow& r : rows) {
    if (r.matched) {
      ++matched;
      rmsd_sum += r.rmsd;
    }
  }
  std::printf("match rate %.4f (%d/%zu)\n",
              rows.empty() ? 0.0 : double(matched) / double(rows.size()),
              matched, rows.size());
  if (matched > 0)
    std::printf("mean rmsd %.6f over matched pairs\n", rmsd_sum / matched);
  return 0;
}

int cmd_match(const Common& common, const std::string& pred_path,
              const std::string& ref_path, double stol, double angle_tol,
              double ltol, const std::string& table_out) {
  Ctx ctx;
  if (int rc = load_ctx(common, ctx)) return rc;

  std::vector<std::pair<std::string, std::string>> pairs;
  if (fs::is_directory(pred_path) && fs::is_directory(ref_path)) {
    std::vector<std::string> preds = json_files(pred_path);
    std::vector<std::string> refs = json_files(ref_path);
    if (preds.size() != refs.size())
      return usage_error("directories hold different file counts");
    if (preds.empty()) return usage_error("no .json files to match");
    for (size_t i = 0; i < preds.size(); ++i)
      pairs.emplace_back(preds[i], refs[i]);
  } else {
    pairs.emplace_back(pred_path, ref_path);
  }

  std::vector<PairRow> rows;
  for (const auto& [pp, rp] : pairs) {
    xg_crystal* pred = nullptr;
    CHECK(xg_crystal_read(pp.c_str(), ctx.elements.get(), nullptr, &pred));
    CrystalPtr pred_ptr(pred);
    xg_crystal* ref = nullptr;
    CHECK(xg_crystal_read(rp.c_str(), ctx.elements.get(), nullptr, &ref));
    CrystalPtr ref_ptr(ref);

    PairRow row;
    row.name = fs::path(pp).filename().string();
    CHECK(xg_crystal_match(pred, ref, stol, angle_tol, ltol, &row.matched,
                           &row.rmsd));
    if (row.matched)
      std::printf("%-40s matched  rmsd %.6f\n", row.name.c_str(), row.rmsd);
    else
      std::printf("%-40s not matched\n", row.name.c_str());
    rows.push_back(row);
  }
  if (!table_out.empty())
    if (int rc = write_rows(table_out, rows)) return rc;
  return print_summary(rows);
}

/* ---- sample ---- */

int cmd_sample(const Common& common, int group, const std::string& sites,
               int n, const std::string& out_flag,
               const std::string& oracle_path, const std::string& ckpt_flag,
               int jobs_flag, bool cif) {
  Ctx ctx;
  if (int rc = load_ctx(common, ctx)) return rc;
  xg_config* cfg = ctx.cfg.get();

  std::string out_dir = !out_flag.empty() ? out_flag : cfg_get(cfg, "out_dir");
  fs::create_directories(out_dir);

  ModelPtr model;
  CrystalPtr target;
  if (!oracle_path.empty()) {
    xg_crystal* tgt = nullptr;
    CHECK(xg_crystal_read(oracle_path.c_str(), ctx.elements.get(),
                          ctx.table.get(), &tgt));
    target.reset(tgt);
    xg_model* m = nullptr;
    CHECK(xg_model_oracle(tgt, ctx.table.get(), cfg, ctx.elements.get(), &m));
    model.reset(m);
  } else {
    std::string ckpt =
        !ckpt_flag.empty() ? ckpt_flag : cfg_get(cfg, "checkpoint");
    if (ckpt.empty())
      return usage_error("sample needs --checkpoint or --oracle TARGET");
    xg_model* m = nullptr;
    CHECK(xg_model_load(ckpt.c_str(), &m));
    model.reset(m);
  }

  int jobs = jobs_flag > 0 ? jobs_flag
                           : std::max(1, std::atoi(cfg_get(cfg, "jobs").c_str()));
  bool oracle_mode = target != nullptr;
  if (!oracle_mode && jobs > 1) {
    std::printf("note: network sampling runs one chain at a time\n");
    jobs = 1;
  }

  std::uint64_t base_seed = cfg_seed(cfg);
  std::vector<CrystalPtr> samples(static_cast<size_t>(n));
  std::atomic<int> failures{0};

  auto worker = [&](int begin, int stride) {
    for (int i = begin; i < n; i += stride) {
      xg_crystal* out = nullptr;
      if (xg_sample_one(model.get(), cfg, ctx.table.get(), ctx.elements.get(),
                        group, sites.c_str(), base_seed + std::uint64_t(i),
                        &out) != XG_OK) {
        failures.fetch_add(1);
        return;
      }
      samples[static_cast<size_t>(i)].reset(out);
    }
  };
  if (jobs <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker, w, jobs);
    for (std::thread& th : pool) th.join();
  }
  if (failures.load() > 0) {
    std::fprintf(stderr, "error: %s\n", xg_last_error());
    return 1;
  }

  int valid = 0;
  std::vector<PairRow> rows;
  for (int i = 0; i < n; ++i) {
    xg_crystal* c = samples[static_cast<size_t>(i)].get();
    char name[64];
    std::snprintf(name, sizeof(name), "sample_%04d.json", i);
    std::string path = (fs::path(out_dir) / name).string();
    CHECK(xg_crystal_write(c, path.c_str(), ctx.elements.get(),
                           ctx.table.get()));
    if (cif) {
      std::snprintf(name, sizeof(name), "sample_%04d.cif", i);
      CHECK(xg_crystal_export_cif(
          c, (fs::path(out_dir) / name).string().c_str(),
          ctx.elements.get()));
    }
    int ok = 0;
    CHECK(xg_crystal_validate(c, &ok));
    valid += ok;
    if (oracle_mode) {
      PairRow row;
      row.name = name;
      CHECK(xg_crystal_match(c, target.get(), 0.5, 10.0, 0.3, &row.matched,
                             &row.rmsd));
      rows.push_back(row);
    }
  }

  std::printf("wrote %d structures to %s\n", n, out_dir.c_str());
  std::printf("validity %d/%d (%.4f)\n", valid, n, double(valid) / n);
  if (oracle_mode) print_summary(rows);
  return 0;
}

/* ---- train ---- */

int cmd_train(const Common& common, const std::string& data_flag,
              const std::string& ckpt_flag) {
  Ctx ctx;
  if (int rc = load_ctx(common, ctx)) return rc;
  xg_config* cfg = ctx.cfg.get();

  std::string data_dir = !data_flag.empty() ? data_flag : cfg_get(cfg, "data_dir");
  if (data_dir.empty()) return usage_error("train needs --data-dir");
  std::string ckpt = !ckpt_flag.empty() ? ckpt_flag : cfg_get(cfg, "checkpoint");
  if (ckpt.empty()) return usage_error("train needs --checkpoint-out");
  if (!fs::is_directory(data_dir)) {
    std::fprintf(stderr, "error: not a directory: %s\n", data_dir.c_str());
    return 1;
  }

  std::vector<std::string> files = json_files(data_dir);
  if (files.empty()) {
    std::fprintf(stderr, "error: no .json structures under %s\n",
                 data_dir.c_str());
    return 1;
  }
  std::vector<const char*> paths;
  paths.reserve(files.size());
  for (const std::string& f : files) paths.push_back(f.c_str());

  int h = xg_elements_count(ctx.elements.get());
  xg_model* m = nullptr;
  CHECK(xg_model_create(cfg, h, cfg_seed(cfg), &m));
  ModelPtr model(m);

  std::printf("training on %zu structures (epochs %s, optimizer %s, lr %s)\n",
              files.size(), cfg_get(cfg, "epochs").c_str(),
              cfg_get(cfg, "optimizer").c_str(), cfg_get(cfg, "lr").c_str());
  double before = 0, after = 0;
  CHECK(xg_model_train(model.get(), cfg, ctx.table.get(), ctx.elements.get(),
                       paths.data(), static_cast<int>(paths.size()), &before,
                       &after));
  std::printf("eval loss before %.6f\n", before);
  std::printf("eval loss after  %.6f", after);
  if (after > 0) std::printf("  (%.1fx reduction)", before / after);
  std::printf("\n");

  CHECK(xg_model_save(model.get(), ckpt.c_str()));
  std::printf("checkpoint written to %s\n", ckpt.c_str());
  return 0;
}

/* ---- csp ---- */

int cmd_csp(const Common& common, const std::string& refs_dir,
            const std::string& index_dir, bool oracle,
            const std::string& ckpt_flag, const std::string& out_flag,
            const std::string& table_out) {
  Ctx ctx;
  if (int rc = load_ctx(common, ctx)) return rc;
  xg_config* cfg = ctx.cfg.get();

  if (!fs::is_directory(refs_dir)) {
    std::fprintf(stderr, "error: not a directory: %s\n", refs_dir.c_str());
    return 1;
  }
  std::vector<std::string> refs = json_files(refs_dir);
  if (refs.empty()) {
    std::fprintf(stderr, "error: no .json structures under %s\n",
                 refs_dir.c_str());
    return 1;
  }

  xg_index* idx = nullptr;
  CHECK(xg_index_build(index_dir.c_str(), ctx.elements.get(), ctx.table.get(),
                       &idx));
  IndexPtr index(idx);

  ModelPtr network;
  if (!oracle) {
    std::string ckpt =
        !ckpt_flag.empty() ? ckpt_flag : cfg_get(cfg, "checkpoint");
    if (ckpt.empty()) return usage_error("csp needs --oracle or --checkpoint");
    xg_model* m = nullptr;
    CHECK(xg_model_load(ckpt.c_str(), &m));
    network.reset(m);
  }

  std::string out_dir = !out_flag.empty() ? out_flag : cfg_get(cfg, "out_dir");
  fs::create_directories(out_dir);

  std::uint64_t base_seed = cfg_seed(cfg);
  std::vector<PairRow> rows;
  for (size_t qi = 0; qi < refs.size(); ++qi) {
    xg_crystal* ref = nullptr;
    CHECK(xg_crystal_read(refs[qi].c_str(), ctx.elements.get(), nullptr, &ref));
    CrystalPtr ref_ptr(ref);

    PairRow row;
    row.name = fs::path(refs[qi]).filename().string();

    char comp[1024];
    CHECK(xg_crystal_formula(ref, ctx.elements.get(), comp, sizeof(comp)));

    int best = -1, total = 0;
    double sim = 0;
    CHECK(xg_index_retrieve(index.get(), comp, &best, &sim, 1, &total));
    if (total == 0) {
      std::printf("%-40s no template for %s\n", row.name.c_str(), comp);
      rows.push_back(row);
      continue;
    }

    xg_crystal* subst = nullptr;
    CHECK(xg_index_substitute(index.get(), comp, best, &subst));
    CrystalPtr subst_ptr(subst);
    char source[1024];
    CHECK(xg_index_source(index.get(), best, source, sizeof(source)));

    ModelPtr oracle_model;
    xg_model* model = network.get();
    if (oracle) {
      xg_model* m = nullptr;
      CHECK(xg_model_oracle(subst, ctx.table.get(), cfg, ctx.elements.get(),
                            &m));
      oracle_model.reset(m);
      model = m;
    }

    xg_crystal* refined = nullptr;
    CHECK(xg_refine(subst, model, cfg, ctx.table.get(), ctx.elements.get(),
                    base_seed + std::uint64_t(qi), &refined));
    CrystalPtr refined_ptr(refined);

    char name[64];
    std::snprintf(name, sizeof(name), "csp_%04zu.json", qi);
    CHECK(xg_crystal_write(refined, (fs::path(out_dir) / name).string().c_str(),
                           ctx.elements.get(), ctx.table.get()));

    CHECK(xg_crystal_match(refined, ref, 0.5, 10.0, 0.3, &row.matched,
                           &row.rmsd));
    if (row.matched)
      std::printf("%-40s template %-24s similarity %.4f  matched  rmsd %.6f\n",
                  row.name.c_str(), source, sim, row.rmsd);
    else
      std::printf("%-40s template %-24s similarity %.4f  not matched\n",
                  row.name.c_str(), source, sim);
    rows.push_back(row);
  }

  if (!table_out.empty())
    if (int rc = write_rows(table_out, rows)) return rc;
  return print_summary(rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"space-group constrained crystal generation"};
  app.require_subcommand(1);

  // encode
  auto* enc = app.add_subcommand(
      "encode", "encode a lattice file (9 numbers, rows = cell vectors)");
  std::string enc_path;
  enc->add_option("lattice", enc_path, "lattice text file")->required();

  // validate
  auto* val = app.add_subcommand("validate",
                                 "check minimal interatomic distance > 0.5 A");
  Common val_common;
  std::string val_path;
  val->add_option("crystal", val_path, "crystal JSON file")->required();
  add_common(val, val_common);

  // match
  auto* mat = app.add_subcommand("match", "match structures against references");
  Common mat_common;
  std::string mat_pred, mat_ref, mat_table;
  double mat_stol = 0.5, mat_atol = 10.0, mat_ltol = 0.3;
  mat->add_option("pred", mat_pred, "prediction file or directory")->required();
  mat->add_option("ref", mat_ref, "reference file or directory")->required();
  mat->add_option("--stol", mat_stol, "site tolerance")->capture_default_str();
  mat->add_option("--angle-tol", mat_atol, "angle tolerance, degrees")
      ->capture_default_str();
  mat->add_option("--ltol", mat_ltol, "relative length tolerance")
      ->capture_default_str();
  mat->add_option("--table", mat_table, "write a TSV report here");
  add_common(mat, mat_common);

  // sample
  auto* smp = app.add_subcommand("sample", "reverse-diffusion sampling");
  Common smp_common;
  int smp_group = 0, smp_n = 1, smp_jobs = 0;
  std::string smp_sites, smp_out, smp_oracle, smp_ckpt;
  bool smp_cif = false;
  smp->add_option("--group", smp_group, "space group number")->required();
  smp->add_option("--sites", smp_sites,
                  "site assignment, e.g. \"a:Na b:Cl\" (csp) or \"a b\"")
      ->required();
  smp->add_option("-n,--count", smp_n, "number of samples")
      ->capture_default_str();
  smp->add_option("--out", smp_out, "output directory");
  smp->add_option("--oracle", smp_oracle,
                  "analytic denoiser aimed at this target crystal");
  smp->add_option("--checkpoint", smp_ckpt, "trained model checkpoint");
  smp->add_option("--jobs", smp_jobs, "parallel chains (oracle mode)");
  smp->add_flag("--cif", smp_cif, "also export CIF files");
  add_common(smp, smp_common);

  // train
  auto* trn = app.add_subcommand("train", "train the denoiser");
  Common trn_common;
  std::string trn_data, trn_ckpt;
  trn->add_option("--data-dir", trn_data, "directory of training structures");
  trn->add_option("--checkpoint-out", trn_ckpt, "where to save the model");
  add_common(trn, trn_common);

  // csp
  auto* csp = app.add_subcommand(
      "csp", "retrieve + substitute + refine against references");
  Common csp_common;
  std::string csp_refs, csp_index, csp_ckpt, csp_out, csp_table;
  bool csp_oracle = false;
  csp->add_option("--refs", csp_refs, "directory of reference structures")
      ->required();
  csp->add_option("--index", csp_index, "template store directory")->required();
  csp->add_flag("--oracle", csp_oracle,
                "refine with the analytic oracle aimed at each template");
  csp->add_option("--checkpoint", csp_ckpt, "trained model checkpoint");
  csp->add_option("--out", csp_out, "output directory");
  csp->add_option("--table", csp_table, "write a TSV report here");
  add_common(csp, csp_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (enc->parsed()) return cmd_encode(enc_path);
  if (val->parsed()) return cmd_validate(val_common, val_path);
  if (mat->parsed())
    return cmd_match(mat_common, mat_pred, mat_ref, mat_stol, mat_atol,
                     mat_ltol, mat_table);
  if (smp->parsed())
    return cmd_sample(smp_common, smp_group, smp_sites, smp_n, smp_out,
                      smp_oracle, smp_ckpt, smp_jobs, smp_cif);
  if (trn->parsed()) return cmd_train(trn_common, trn_data, trn_ckpt);
  if (csp->parsed())
    return cmd_csp(csp_common, csp_refs, csp_index, csp_oracle, csp_ckpt,
                   csp_out, csp_table);
  return 2;
}
