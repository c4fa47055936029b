#include "diffusion.hpp"

#include "wrapped_normal.hpp"

namespace xtal {

StructureLayout StructureLayout::make(const SpaceGroupEntry& entry,
                                      const std::vector<int>& wyckoff_index,
                                      int h) {
  StructureLayout layout;
  layout.entry = &entry;
  layout.mask = family_mask(entry.number);
  layout.wyckoff_index = wyckoff_index;
  layout.h = h;
  for (int s = 0; s < layout.nsites(); ++s) {
    int w = wyckoff_index[static_cast<size_t>(s)];
    if (w < 0 || w >= static_cast<int>(entry.wyckoffs.size()))
      throw DomainError("Wyckoff index out of range in layout");
    for (int i = 0; i < entry.wyckoffs[static_cast<size_t>(w)].multiplicity; ++i)
      layout.atoms.emplace_back(s, i);
  }
  return layout;
}

Vec6 forward_k(const Vec6& k0, const Vec6& free_mask, double alpha_bar_t,
               const Vec6& noise) {
  double sa = std::sqrt(alpha_bar_t);
  double sn = std::sqrt(1.0 - alpha_bar_t);
  Vec6 out;
  for (int i = 0; i < 6; ++i)
    out[i] = free_mask[i] != 0.0 ? sa * k0[i] + sn * noise[i] : k0[i];
  return out;
}

MatX forward_F(const MatX& F0, const StructureLayout& layout, double sigma_t,
               const MatX& noise) {
  if (F0.rows() != 3 || F0.cols() != layout.nsites())
    throw DomainError("basic coordinate matrix has wrong shape");
  MatX out = MatX::Zero(3, F0.cols());
  for (int s = 0; s < layout.nsites(); ++s) {
    const WyckoffPosition& w = layout.pos(s);
    Vec3 eps = w.pinv0 * Vec3(noise.col(s));
    for (int c = 0; c < 3; ++c)
      if (w.free_slot[c]) out(c, s) = wrap01(F0(c, s) + sigma_t * eps[c]);
  }
  return out;
}

MatX wn_score_F(const MatX& Ft, const MatX& F0, const StructureLayout& layout,
                double sigma_t, int n_img) {
  MatX out = MatX::Zero(3, Ft.cols());
  for (int s = 0; s < layout.nsites(); ++s) {
    const WyckoffPosition& w = layout.pos(s);
    for (int c = 0; c < 3; ++c) {
      if (!w.free_slot[c]) continue;
      double slot_sigma = sigma_t * w.slot_scale[c];
      out(c, s) = wn_score_1d(Ft(c, s) - F0(c, s), slot_sigma, n_img);
    }
  }
  return out;
}

MatX forward_A(const MatX& A0, double alpha_bar_t, const MatX& noise) {
  double sa = std::sqrt(alpha_bar_t);
  double sn = std::sqrt(1.0 - alpha_bar_t);
  return sa * A0 + sn * noise;
}

namespace {

Vec6 draw_vec6(Rng& rng) {
  Vec6 z;
  for (int i = 0; i < 6; ++i) z[i] = rng.normal();
  return z;
}

MatX draw_mat(Rng& rng, int rows, int cols) {
  MatX z(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) z(r, c) = rng.normal();
  return z;
}

}  // namespace

LossParts diffusion_loss(const GroundTruth& gt, const StructureLayout& layout,
                         DenoiserBase& denoiser, const NoiseSchedule& sched,
                         int t, Rng& rng, const LossOptions& opt,
                         LossGrad* grad) {
  if (t < 1 || t > sched.T) throw DomainError("loss step out of range");
  const int nsites = layout.nsites();
  const int natoms = layout.natoms();
  const double ab = sched.alpha_bar[static_cast<size_t>(t)];
  const double sigma = sched.sigma[static_cast<size_t>(t)];
  const Vec6 free_mask = layout.mask.free_mask();

  Vec6 eps_k = draw_vec6(rng);
  MatX eps_F = draw_mat(rng, 3, nsites);
  MatX eps_A;
  if (!opt.csp_mode) eps_A = draw_mat(rng, layout.h, nsites);

  DiffusionState state;
  state.t = t;
  state.k = forward_k(gt.k0, free_mask, ab, eps_k);
  state.Fp = forward_F(gt.F0, layout, sigma, eps_F);
  state.Ap = opt.csp_mode ? gt.A0 : forward_A(gt.A0, ab, eps_A);

  DenoiserOutput out = denoiser.denoise(state, layout, sched);
  if (out.eps_Fp.cols() != nsites || out.eps_F_atoms.cols() != natoms ||
      out.eps_Ap.cols() != nsites)
    throw DomainError("denoiser output has wrong shape");

  LossParts parts;

  // Lattice head against the raw masked noise.
  Vec6 k_target = free_mask.cwiseProduct(eps_k);
  parts.k = (k_target - out.eps_k).squaredNorm();

  // Coordinate head against the exact forward score, per-site.
  const double lam = sched.lambda_at(t);
  MatX score = wn_score_F(state.Fp, gt.F0, layout, sigma, opt.n_img);
  int atom_base = 0;
  double f_acc = 0.0;
  if (grad != nullptr) {
    grad->d_eps_F_atoms = MatX::Zero(3, natoms);
    grad->d_eps_Ap = MatX::Zero(layout.h, nsites);
  }
  for (int s = 0; s < nsites; ++s) {
    const int n_s = layout.pos(s).multiplicity;
    Vec3 target = score.col(s);
    if (opt.average == LossAverage::post) {
      double acc = 0.0;
      for (int i = 0; i < n_s; ++i) {
        Vec3 diff = Vec3(out.eps_F_atoms.col(atom_base + i)) - target;
        acc += diff.squaredNorm();
        if (grad != nullptr)
          grad->d_eps_F_atoms.col(atom_base + i) =
              opt.weights.F * lam * (2.0 / n_s) * diff;
      }
      f_acc += acc / n_s;
    } else {
      Vec3 diff = Vec3(out.eps_Fp.col(s)) - target;
      f_acc += diff.squaredNorm();
      if (grad != nullptr) {
        Vec3 datom = opt.weights.F * lam * 2.0 * diff / n_s;
        for (int i = 0; i < n_s; ++i)
          grad->d_eps_F_atoms.col(atom_base + i) = datom;
      }
    }
    atom_base += n_s;
  }
  parts.F = lam * f_acc;

  if (!opt.csp_mode) {
    parts.A = (eps_A - out.eps_Ap).squaredNorm();
    if (grad != nullptr)
      grad->d_eps_Ap = opt.weights.A * 2.0 * (out.eps_Ap - eps_A);
  }

  parts.total = opt.weights.k * parts.k + opt.weights.F * parts.F +
                opt.weights.A * parts.A;
  if (grad != nullptr) {
    grad->d_eps_k = opt.weights.k * 2.0 * (out.eps_k - k_target);
    for (int i = 0; i < 6; ++i)
      if (free_mask[i] == 0.0) grad->d_eps_k[i] = 0.0;
  }
  return parts;
}

namespace {

// One ancestral DDPM step for a scalar entry.
double ddpm_step(double x, double eps_hat, const NoiseSchedule& sched, int t,
                 double z) {
  const double beta = sched.beta[static_cast<size_t>(t)];
  const double alpha = sched.alpha[static_cast<size_t>(t)];
  const double ab_t = sched.alpha_bar[static_cast<size_t>(t)];
  const double ab_prev = sched.alpha_bar[static_cast<size_t>(t - 1)];
  double mean = (x - beta / std::sqrt(1.0 - ab_t) * eps_hat) / std::sqrt(alpha);
  if (t == 1) return mean;
  double var = beta * (1.0 - ab_prev) / (1.0 - ab_t);
  return mean + std::sqrt(var) * z;
}

void pin_k(Vec6& k, const FamilyMask& mask) {
  for (int i = 0; i < 6; ++i) {
    if (mask.has_fixed[i])
      k[i] = mask.fixed[i];
    else if (mask.m[i] == 0.0)
      k[i] = 0.0;
  }
}

}  // namespace

Crystal sample(const StructureLayout& layout, DenoiserBase& denoiser,
               const NoiseSchedule& sched, Rng& rng, const SampleOptions& opt,
               SampleTrace* trace) {
  const int nsites = layout.nsites();
  if (opt.csp_mode && static_cast<int>(opt.species.size()) != nsites)
    throw DomainError("fixed species list must cover every site");

  DiffusionState state;
  state.t = sched.T;

  // Masked normal prior for k; constrained dims sit at their fixed values.
  state.k = project_k(draw_vec6(rng), layout.mask);

  // Uniform prior on each coordinate subspace: free slots uniform in [0,1).
  state.Fp = MatX::Zero(3, nsites);
  for (int s = 0; s < nsites; ++s) {
    const WyckoffPosition& w = layout.pos(s);
    for (int c = 0; c < 3; ++c)
      if (w.free_slot[c]) state.Fp(c, s) = rng.uniform();
  }

  // Types: normal prior, or pinned one-hots in CSP mode.
  state.Ap = MatX::Zero(layout.h, nsites);
  if (opt.csp_mode) {
    for (int s = 0; s < nsites; ++s) {
      int sp = opt.species[static_cast<size_t>(s)];
      if (sp < 0 || sp >= layout.h) throw DomainError("species index out of range");
      state.Ap(sp, s) = 1.0;
    }
  } else {
    state.Ap = draw_mat(rng, layout.h, nsites);
  }

  return sample_from(std::move(state), layout, denoiser, sched, rng, opt,
                     trace);
}

Crystal sample_from(DiffusionState state, const StructureLayout& layout,
                    DenoiserBase& denoiser, const NoiseSchedule& sched,
                    Rng& rng, const SampleOptions& opt, SampleTrace* trace) {
  const int nsites = layout.nsites();
  if (opt.csp_mode && static_cast<int>(opt.species.size()) != nsites)
    throw DomainError("fixed species list must cover every site");
  if (state.t < 0 || state.t > sched.T)
    throw DomainError("start level outside the schedule");
  if (state.Fp.rows() != 3 || state.Fp.cols() != nsites ||
      state.Ap.rows() != layout.h || state.Ap.cols() != nsites)
    throw DomainError("start state has wrong shape");
  const Vec6 free_mask = layout.mask.free_mask();
  const double gamma =
      opt.corrector_gamma >= 0 ? opt.corrector_gamma : sched.corrector_gamma;
  const int t_start = state.t;

  auto record = [&](const DiffusionState& st) {
    if (trace == nullptr) return;
    for (int i = 0; i < 6; ++i) {
      double pinned = layout.mask.has_fixed[i] ? layout.mask.fixed[i] : 0.0;
      if (free_mask[i] == 0.0)
        trace->max_k_violation =
            std::max(trace->max_k_violation, std::abs(st.k[i] - pinned));
    }
    for (int s = 0; s < nsites; ++s) {
      const WyckoffPosition& w = layout.pos(s);
      Vec3 col = st.Fp.col(s);
      Vec3 res = col - w.free_proj * col;
      trace->max_F_violation =
          std::max(trace->max_F_violation, res.cwiseAbs().maxCoeff());
    }
  };
  record(state);

  for (int t = t_start; t >= 1; --t) {
    state.t = t;
    DenoiserOutput out = denoiser.denoise(state, layout, sched);

    // Lattice coefficients: ancestral step on free dims, pins elsewhere.
    Vec6 z_k = draw_vec6(rng);
    Vec6 k_next = state.k;
    for (int i = 0; i < 6; ++i)
      if (free_mask[i] != 0.0)
        k_next[i] = ddpm_step(state.k[i], out.eps_k[i], sched, t, z_k[i]);
    pin_k(k_next, layout.mask);

    // Types: ancestral step entrywise unless pinned.
    MatX A_next = state.Ap;
    if (!opt.csp_mode) {
      MatX z_A = draw_mat(rng, layout.h, nsites);
      for (int s = 0; s < nsites; ++s)
        for (int r = 0; r < layout.h; ++r)
          A_next(r, s) = ddpm_step(state.Ap(r, s), out.eps_Ap(r, s), sched, t,
                                   z_A(r, s));
    }

    // Coordinates: variance-exploding predictor on each free slot, with the
    // per-slot scale from the projected noise covariance.
    const double s_t = sched.sigma[static_cast<size_t>(t)];
    const double s_prev = sched.sigma[static_cast<size_t>(t - 1)];
    const double dvar = s_t * s_t - s_prev * s_prev;
    const double pred_std =
        s_prev > 0 ? std::sqrt(s_prev * s_prev * dvar / (s_t * s_t)) : 0.0;
    MatX F_next = state.Fp;
    for (int s = 0; s < nsites; ++s) {
      const WyckoffPosition& w = layout.pos(s);
      for (int c = 0; c < 3; ++c) {
        if (!w.free_slot[c]) continue;
        double d = w.slot_scale[c];
        double drift = dvar * d * d * out.eps_Fp(c, s);
        double z = pred_std > 0 ? rng.normal() : 0.0;
        F_next(c, s) = wrap01(F_next(c, s) + drift + pred_std * d * z);
      }
    }

    state.k = k_next;
    state.Ap = A_next;
    state.Fp = F_next;
    state.t = t - 1;

    // One Langevin correction at the new level, skipped after the last step.
    if (t - 1 >= 1) {
      DenoiserOutput corr = denoiser.denoise(state, layout, sched);
      double eta = gamma * (s_prev / sched.sigma1) * (s_prev / sched.sigma1);
      for (int s = 0; s < nsites; ++s) {
        const WyckoffPosition& w = layout.pos(s);
        for (int c = 0; c < 3; ++c) {
          if (!w.free_slot[c]) continue;
          double d = w.slot_scale[c];
          double step = eta * d * d * corr.eps_Fp(c, s) +
                        std::sqrt(2.0 * eta) * d * rng.normal();
          state.Fp(c, s) = wrap01(state.Fp(c, s) + step);
        }
      }
    }
    record(state);
  }

  // Expansion of the terminal basic state.
  std::vector<BasicSite> sites(static_cast<size_t>(nsites));
  for (int s = 0; s < nsites; ++s) {
    BasicSite& b = sites[static_cast<size_t>(s)];
    b.wyckoff_index = layout.wyckoff_index[static_cast<size_t>(s)];
    b.basic = state.Fp.col(s);
    if (opt.csp_mode) {
      b.species = opt.species[static_cast<size_t>(s)];
    } else {
      int best = 0;
      state.Ap.col(s).maxCoeff(&best);
      b.species = best;
    }
  }
  return expand_structure(sites, lattice_from_k(state.k), *layout.entry);
}

DenoiserOutput OracleDenoiser::denoise(const DiffusionState& state,
                                       const StructureLayout& layout,
                                       const NoiseSchedule& sched) {
  const int t = state.t;
  const double ab = sched.alpha_bar[static_cast<size_t>(t)];
  const double sigma = sched.sigma[static_cast<size_t>(t)];
  const double sa = std::sqrt(ab);
  const double sn = std::sqrt(1.0 - ab);
  const Vec6 free_mask = layout.mask.free_mask();

  DenoiserOutput out;
  for (int i = 0; i < 6; ++i)
    out.eps_k[i] =
        free_mask[i] != 0.0 ? (state.k[i] - sa * target_.k0[i]) / sn : 0.0;

  out.eps_Fp = wn_score_F(state.Fp, target_.F0, layout, sigma, n_img_);
  out.eps_F_atoms = MatX::Zero(3, layout.natoms());
  for (int a = 0; a < layout.natoms(); ++a)
    out.eps_F_atoms.col(a) = out.eps_Fp.col(layout.atoms[static_cast<size_t>(a)].first);

  out.eps_Ap = (state.Ap - sa * target_.A0) / sn;
  return out;
}

GroundTruth ground_truth_of(const Crystal& c, const StructureLayout& layout) {
  if (!c.annotated()) throw DomainError("ground truth requires an annotated crystal");
  GroundTruth gt;
  Vec6 raw = k_from_lattice(c.lattice);
  gt.k0 = project_k(raw, layout.mask);
  if ((raw - gt.k0).cwiseAbs().maxCoeff() > 1e-8)
    throw DomainError("lattice violates its family constraints");
  gt.F0 = MatX::Zero(3, layout.nsites());
  gt.A0 = MatX::Zero(layout.h, layout.nsites());
  for (int s = 0; s < layout.nsites(); ++s) {
    const SiteInfo& info = c.sites[static_cast<size_t>(s)];
    const WyckoffPosition& w = layout.pos(s);
    gt.F0.col(s) = w.free_proj * info.basic;
    if (info.species < 0 || info.species >= layout.h)
      throw DomainError("species index outside the element table");
    gt.A0(info.species, s) = 1.0;
  }
  return gt;
}

StructureLayout layout_of(const Crystal& c, const SpaceGroupEntry& entry, int h) {
  if (!c.annotated()) throw DomainError("layout requires an annotated crystal");
  if (c.group != entry.number)
    throw DomainError("crystal group differs from the entry");
  std::vector<int> wyckoff_index;
  wyckoff_index.reserve(c.sites.size());
  for (const auto& s : c.sites) wyckoff_index.push_back(s.wyckoff_index);
  return StructureLayout::make(entry, wyckoff_index, h);
}

}  // namespace xtal
