#pragma once

#include <memory>
#include <vector>

#include "common.hpp"
#include "crystal.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "spacegroup.hpp"

namespace xtal {

// Static description of one structure's symmetry frame: the group, its
// family mask, and the Wyckoff position of each basic site. All diffusion
// states for the structure share this layout.
struct StructureLayout {
  const SpaceGroupEntry* entry = nullptr;
  FamilyMask mask;
  std::vector<int> wyckoff_index;            // per site
  std::vector<std::pair<int, int>> atoms;    // (site, pair) in expansion order
  int h = 0;                                 // element-class count

  static StructureLayout make(const SpaceGroupEntry& entry,
                              const std::vector<int>& wyckoff_index, int h);

  int nsites() const { return static_cast<int>(wyckoff_index.size()); }
  int natoms() const { return static_cast<int>(atoms.size()); }
  const WyckoffPosition& pos(int site) const {
    return entry->wyckoffs[static_cast<size_t>(
        wyckoff_index[static_cast<size_t>(site)])];
  }
};

// Diffusing quantities at one step: lattice coefficients, basic fractional
// coordinates (3 x N'), continuous type vectors (h x N').
struct DiffusionState {
  int t = 0;
  Vec6 k = Vec6::Zero();
  MatX Fp;  // constrained slots held at exactly 0
  MatX Ap;
};

// What the score network (or oracle) returns for one state.
struct DenoiserOutput {
  Vec6 eps_k = Vec6::Zero();  // masked: zero on non-diffused dims
  MatX eps_Fp;       // 3 x N', orbit-averaged pull-backs (basic frame)
  MatX eps_F_atoms;  // 3 x N, per-atom pull-backs before averaging
  MatX eps_Ap;       // h x N', orbit-averaged
};

class DenoiserBase {
public:
  virtual ~DenoiserBase() = default;
  virtual DenoiserOutput denoise(const DiffusionState& state,
                                 const StructureLayout& layout,
                                 const NoiseSchedule& sched) = 0;
};

// ---- forward processes ----

// k_t = m (.) (sqrt(ab_t) k0 + sqrt(1-ab_t) eps) + (1-m) (.) k0.
Vec6 forward_k(const Vec6& k0, const Vec6& free_mask, double alpha_bar_t,
               const Vec6& noise);

// F'_t = w(F'0 + projected noise); noise is a raw 3 x N' standard normal
// draw, projected per column through the site's pseudo-inverse and scaled
// by sigma_t.
MatX forward_F(const MatX& F0, const StructureLayout& layout, double sigma_t,
               const MatX& noise);

// Score of the forward marginal q(F'_t | F'0) in the basic frame: per free
// slot a 1-D wrapped-normal score at scale sigma_t * slot_scale.
MatX wn_score_F(const MatX& Ft, const MatX& F0, const StructureLayout& layout,
                double sigma_t, int n_img = 3);

// A'_t = sqrt(ab_t) A'0 + sqrt(1-ab_t) eps.
MatX forward_A(const MatX& A0, double alpha_bar_t, const MatX& noise);

// ---- training loss ----

enum class LossAverage { post, pre };

struct LossParts {
  double total = 0, k = 0, F = 0, A = 0;
};

struct LossWeights {
  double k = 1.0, F = 1.0, A = 20.0;
};

struct GroundTruth {
  Vec6 k0;
  MatX F0;  // 3 x N' basic coordinates
  MatX A0;  // h x N' one-hot columns
};

// Gradients of the scalar loss with respect to the denoiser outputs,
// consumed by the network's backward pass.
struct LossGrad {
  Vec6 d_eps_k = Vec6::Zero();
  MatX d_eps_F_atoms;  // 3 x N (basic frame, per atom)
  MatX d_eps_Ap;       // h x N'
};

struct LossOptions {
  LossWeights weights;
  LossAverage average = LossAverage::post;
  bool csp_mode = false;  // drop the type term
  int n_img = 3;
};

// Draws one noising of the ground truth at step t, runs the denoiser, and
// returns the combined loss, with output-gradients for training.
LossParts diffusion_loss(const GroundTruth& gt, const StructureLayout& layout,
                         DenoiserBase& denoiser, const NoiseSchedule& sched,
                         int t, Rng& rng, const LossOptions& opt,
                         LossGrad* grad = nullptr);

// ---- sampling ----

struct SampleOptions {
  bool csp_mode = false;        // keep provided species fixed
  std::vector<int> species;     // per site; required in csp mode
  int n_img = 3;
  double corrector_gamma = -1;  // override schedule value when >= 0
};

struct SampleTrace {
  // Per-step constraint diagnostics, filled when requested.
  double max_k_violation = 0;
  double max_F_violation = 0;
};

// Reverse predictor-corrector chain from the masked priors down to t=0;
// expands the final basic state into a full crystal.
Crystal sample(const StructureLayout& layout, DenoiserBase& denoiser,
               const NoiseSchedule& sched, Rng& rng, const SampleOptions& opt,
               SampleTrace* trace = nullptr);

// Same chain starting from a caller-supplied state at level init.t <= T;
// used to finish a partially noised structure.
Crystal sample_from(DiffusionState init, const StructureLayout& layout,
                    DenoiserBase& denoiser, const NoiseSchedule& sched,
                    Rng& rng, const SampleOptions& opt,
                    SampleTrace* trace = nullptr);

// ---- oracle ----

// Analytic denoiser aimed at a fixed target state: for k and A' it returns
// the exact posterior noise estimate, for F' the exact wrapped-normal score
// toward the target. Sampling with it regenerates the target.
class OracleDenoiser : public DenoiserBase {
public:
  OracleDenoiser(GroundTruth target, int n_img = 3)
      : target_(std::move(target)), n_img_(n_img) {}
  DenoiserOutput denoise(const DiffusionState& state,
                         const StructureLayout& layout,
                         const NoiseSchedule& sched) override;

private:
  GroundTruth target_;
  int n_img_;
};

// Ground truth pulled out of an annotated crystal (basic coords per site,
// one-hot species, encoded lattice).
GroundTruth ground_truth_of(const Crystal& c, const StructureLayout& layout);

// Layout for an annotated crystal.
StructureLayout layout_of(const Crystal& c, const SpaceGroupEntry& entry, int h);

}  // namespace xtal
