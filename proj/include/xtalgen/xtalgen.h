#ifndef XTALGEN_H
#define XTALGEN_H

/* C interface to the crystal-generation library.
 *
 * Conventions:
 *   - Functions return XG_OK (0) on success or a nonzero error code; the
 *     thread-local message from xg_last_error() describes the most recent
 *     failure on the calling thread.
 *   - Objects are opaque handles created by *_load/*_create/*_build and
 *     released by the matching *_free. Passing NULL where a handle is
 *     required is a domain error, never a crash.
 *   - Lattices cross this boundary as 9 doubles in row-major order where
 *     each ROW is one cell vector. Cell parameters are (a, b, c in angstrom,
 *     alpha, beta, gamma in degrees).
 *   - Composition strings are space-separated "Symbol:count" tokens, e.g.
 *     "Na:4 Cl:4". Site assignment strings are space-separated Wyckoff
 *     letters with optional elements, e.g. "a:Na b:Cl" or "a b".
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define XG_OK 0
#define XG_ERR_DOMAIN 1   /* invalid value or state */
#define XG_ERR_PARSE 2    /* malformed file or string */
#define XG_ERR_INTERNAL 3 /* unexpected failure */

const char* xg_last_error(void);

typedef struct xg_table xg_table;       /* space-group data */
typedef struct xg_elements xg_elements; /* element property table */
typedef struct xg_crystal xg_crystal;
typedef struct xg_config xg_config;
typedef struct xg_model xg_model; /* trained network or analytic oracle */
typedef struct xg_index xg_index; /* template store */

/* ---- space groups ---- */
int xg_table_load(const char* dir, xg_table** out);
void xg_table_free(xg_table* t);
int xg_table_has(const xg_table* t, int group); /* 1 or 0; -1 on error */
int xg_table_order(const xg_table* t, int group, int* out);

/* ---- elements ---- */
int xg_elements_load(const char* path, xg_elements** out);
void xg_elements_free(xg_elements* e);
int xg_elements_count(const xg_elements* e); /* -1 on error */
int xg_elements_index(const xg_elements* e, const char* symbol, int* out);

/* ---- crystals ---- */
/* table may be NULL: the file is read without symmetry annotation. */
int xg_crystal_read(const char* path, const xg_elements* e, const xg_table* t,
                    xg_crystal** out);
int xg_crystal_write(const xg_crystal* c, const char* path,
                     const xg_elements* e, const xg_table* t);
int xg_crystal_export_cif(const xg_crystal* c, const char* path,
                          const xg_elements* e);
void xg_crystal_free(xg_crystal* c);
int xg_crystal_natoms(const xg_crystal* c); /* -1 on error */
int xg_crystal_group(const xg_crystal* c);  /* 0 when unannotated */
int xg_crystal_lattice(const xg_crystal* c, double out9[9]);
int xg_crystal_params(const xg_crystal* c, double out6[6]);
int xg_crystal_k(const xg_crystal* c, double out6[6]);
int xg_crystal_atom(const xg_crystal* c, const xg_elements* e, int i,
                    char symbol[8], double frac3[3]);
int xg_crystal_formula(const xg_crystal* c, const xg_elements* e, char* buf,
                       size_t buflen);
int xg_crystal_density(const xg_crystal* c, const xg_elements* e, double* out);
/* ok = 1 iff all interatomic distances exceed 0.5 angstrom. */
int xg_crystal_validate(const xg_crystal* c, int* ok);
int xg_crystal_verify_symmetry(const xg_crystal* c, const xg_table* t,
                               double tol, int* ok);
/* matched = 0/1; rmsd written only when matched. */
int xg_crystal_match(const xg_crystal* pred, const xg_crystal* ref,
                     double stol, double angle_tol, double ltol, int* matched,
                     double* rmsd);

/* ---- lattice algebra ---- */
int xg_k_from_lattice(const double L9[9], double k6[6]);
int xg_lattice_from_k(const double k6[6], double L9[9]);
int xg_params_from_lattice(const double L9[9], double p6[6]);
int xg_lattice_from_params(const double p6[6], double L9[9]);
int xg_family_of_group(int group, int* family); /* 0 triclinic .. 5 cubic */
int xg_family_name(int family, char* buf, size_t buflen);
int xg_project_k(const double k6_in[6], int group, double k6_out[6]);
/* Everything cmd-encode needs in one call: the coefficients, the
 * reconstruction error |L - Q exp(S)|_F, and per-family satisfiability of
 * the already-encoded k (index 0 triclinic .. 5 cubic). */
int xg_encode_report(const double L9[9], double k6[6], double* roundtrip_err,
                     uint8_t family_ok[6]);

/* ---- configuration ---- */
int xg_config_default(xg_config** out);
int xg_config_load(const char* path, xg_config** out);
void xg_config_free(xg_config* c);
int xg_config_set(xg_config* c, const char* key, const char* value);
int xg_config_get(const xg_config* c, const char* key, char* buf,
                  size_t buflen);

/* ---- models ---- */
/* Fresh network with sizes from the config; h = element-class count. */
int xg_model_create(const xg_config* cfg, int h, uint64_t seed,
                    xg_model** out);
int xg_model_load(const char* path, xg_model** out);
int xg_model_save(const xg_model* m, const char* path);
/* Analytic oracle aimed at an annotated target structure. */
int xg_model_oracle(const xg_crystal* target, const xg_table* t,
                    const xg_config* cfg, const xg_elements* e,
                    xg_model** out);
void xg_model_free(xg_model* m);
/* Trains on the listed crystal files; writes the mean evaluation-grid loss
 * before and after training to the two out parameters (may be NULL). */
int xg_model_train(xg_model* m, const xg_config* cfg, const xg_table* t,
                   const xg_elements* e, const char* const* paths, int npaths,
                   double* loss_before, double* loss_after);

/* ---- sampling ---- */
/* One reverse-diffusion sample for `group` with the given site assignment.
 * Mode comes from the config: "csp" pins the assigned elements, "ab-initio"
 * lets types diffuse (assignment letters may then omit elements). */
int xg_sample_one(xg_model* m, const xg_config* cfg, const xg_table* t,
                  const xg_elements* e, int group, const char* assignment,
                  uint64_t seed, xg_crystal** out);

/* ---- templates ---- */
int xg_index_build(const char* dir, const xg_elements* e, const xg_table* t,
                   xg_index** out);
void xg_index_free(xg_index* idx);
int xg_index_size(const xg_index* idx); /* -1 on error */
/* Candidates for a composition, best first. Writes up to cap hits. */
int xg_index_retrieve(const xg_index* idx, const char* composition,
                      int* indices, double* similarities, int cap, int* n_out);
int xg_index_source(const xg_index* idx, int i, char* buf, size_t buflen);
int xg_index_entry(const xg_index* idx, int i, xg_crystal** out);
int xg_index_substitute(const xg_index* idx, const char* composition, int i,
                        xg_crystal** out);

/* Forward-noise the template to config t_start, then reverse-sample with
 * its group, Wyckoff letters, and elements pinned. */
int xg_refine(const xg_crystal* tmpl, xg_model* m, const xg_config* cfg,
              const xg_table* t, const xg_elements* e, uint64_t seed,
              xg_crystal** out);

/* ---- set statistics ---- */
int xg_property_stats(const xg_crystal* const* gen, int ngen,
                      const xg_crystal* const* ref, int nref,
                      const xg_elements* e, double* d_density,
                      double* d_nelem);

#ifdef __cplusplus
}
#endif

#endif /* XTALGEN_H */
