#include "denoiser.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace xtal {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
  double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

VecX silu_vec(const VecX& u) {
  VecX out(u.size());
  for (int i = 0; i < u.size(); ++i) out[i] = silu(u[i]);
  return out;
}

}  // namespace

Denoiser::Tensor Denoiser::reg(int rows, int cols) {
  Tensor t;
  t.rows = rows;
  t.cols = cols;
  t.offset = static_cast<int>(flat_.size());
  flat_.conservativeResize(flat_.size() + rows * cols);
  tensors_.push_back(t);
  return t;
}

Eigen::Map<MatX> Denoiser::view(const Tensor& t) {
  return Eigen::Map<MatX>(flat_.data() + t.offset, t.rows, t.cols);
}

Eigen::Map<const MatX> Denoiser::view(const Tensor& t) const {
  return Eigen::Map<const MatX>(flat_.data() + t.offset, t.rows, t.cols);
}

Eigen::Map<MatX> Denoiser::gview(VecX& g, const Tensor& t) const {
  return Eigen::Map<MatX>(g.data() + t.offset, t.rows, t.cols);
}

Denoiser::Denoiser(const Sizes& sizes, std::uint64_t init_seed) : sizes_(sizes) {
  const int d = sizes_.hidden;
  const int K = sizes_.fourier;
  const int h = sizes_.h;
  if (d < 2 || d % 2 != 0) throw DomainError("hidden width must be even and >= 2");
  if (K < 2 || K % 2 != 0) throw DomainError("fourier count must be even and >= 2");
  if (h < 1) throw DomainError("element-class count must be positive");
  if (sizes_.layers < 1) throw DomainError("need at least one layer");

  flat_.resize(0);
  atom_W_ = reg(d, h);
  atom_b_ = reg(d, 1);
  in_W_ = reg(d, 2 * d);
  in_b_ = reg(d, 1);
  const int msg_in = 2 * d + 6 + 3 * K;
  layers_.clear();
  for (int l = 0; l < sizes_.layers; ++l) {
    LayerT lt;
    lt.msg_W1 = reg(d, msg_in);
    lt.msg_b1 = reg(d, 1);
    lt.msg_W2 = reg(d, d);
    lt.msg_b2 = reg(d, 1);
    lt.upd_W1 = reg(d, 2 * d);
    lt.upd_b1 = reg(d, 1);
    lt.upd_W2 = reg(d, d);
    lt.upd_b2 = reg(d, 1);
    layers_.push_back(lt);
  }
  kh_W1_ = reg(d, d + 6);
  kh_b1_ = reg(d, 1);
  kh_W2_ = reg(6, d);
  kh_b2_ = reg(6, 1);
  fh_W1_ = reg(d, d);
  fh_b1_ = reg(d, 1);
  fh_W2_ = reg(3, d);
  fh_b2_ = reg(3, 1);
  ah_W1_ = reg(d, d + h);
  ah_b1_ = reg(d, 1);
  ah_W2_ = reg(h, d);
  ah_b2_ = reg(h, 1);

  // Fan-in scaled uniform init for weights, zero biases, seed-pinned.
  Rng rng(init_seed);
  for (const Tensor& t : tensors_) {
    double* p = flat_.data() + t.offset;
    if (t.cols == 1) {
      std::fill(p, p + t.rows, 0.0);
    } else {
      double scale = 1.0 / std::sqrt(double(t.cols));
      for (int i = 0; i < t.rows * t.cols; ++i)
        p[i] = rng.uniform(-scale, scale);
    }
  }
}

void Denoiser::fourier_embed_component(double f, int K, double* out) {
  double d = wrap_half(f);
  for (int k = 0; k < K; ++k) {
    int m = k / 2;
    double arg = 2.0 * kPi * m * d;
    out[k] = (k % 2 == 0) ? std::sin(arg) : std::cos(arg);
  }
}

DenoiserOutput Denoiser::denoise(const DiffusionState& state,
                                 const StructureLayout& layout,
                                 const NoiseSchedule& sched) {
  (void)sched;
  const int d = sizes_.hidden;
  const int K = sizes_.fourier;
  const int h = sizes_.h;
  const int N = layout.natoms();
  const int nsites = layout.nsites();
  if (state.Fp.rows() != 3 || state.Fp.cols() != nsites)
    throw DomainError("state F' has wrong shape");
  if (state.Ap.rows() != h || state.Ap.cols() != nsites)
    throw DomainError("state A' has wrong shape");

  Cache& c = cache_;
  c = Cache{};
  c.valid = true;
  c.layout = &layout;
  c.N = N;
  c.k = state.k;
  c.free_mask = layout.mask.free_mask();

  // Expand the basic state to the full atom list.
  c.A_in.resize(h, N);
  c.F_in.resize(3, N);
  for (int a = 0; a < N; ++a) {
    auto [s, i] = layout.atoms[static_cast<size_t>(a)];
    const WyckoffPosition& w = layout.pos(s);
    c.F_in.col(a) = wrap01(
        Vec3(w.R[static_cast<size_t>(i)] * Vec3(state.Fp.col(s)) +
             w.t[static_cast<size_t>(i)]));
    c.A_in.col(a) = state.Ap.col(s);
  }

  // Canonical content order: summations run over atoms sorted by value, so
  // relabeling sites cannot change any floating-point result.
  c.order.resize(static_cast<size_t>(N));
  for (int a = 0; a < N; ++a) c.order[static_cast<size_t>(a)] = a;
  std::sort(c.order.begin(), c.order.end(), [&](int x, int y) {
    for (int r = 0; r < 3; ++r) {
      if (c.F_in(r, x) != c.F_in(r, y)) return c.F_in(r, x) < c.F_in(r, y);
    }
    for (int r = 0; r < h; ++r) {
      if (c.A_in(r, x) != c.A_in(r, y)) return c.A_in(r, x) < c.A_in(r, y);
    }
    return x < y;
  });

  // Sinusoidal time embedding.
  c.tau.resize(d);
  for (int i = 0; i < d / 2; ++i) {
    double omega = std::pow(10000.0, -2.0 * i / d);
    c.tau[2 * i] = std::sin(state.t * omega);
    c.tau[2 * i + 1] = std::cos(state.t * omega);
  }

  // Node embedding: type linear fused with time.
  c.fuse_in.resize(2 * d, N);
  MatX h0(d, N);
  {
    auto aW = view(atom_W_);
    auto ab = view(atom_b_);
    auto iW = view(in_W_);
    auto ib = view(in_b_);
    for (int a = 0; a < N; ++a) {
      c.fuse_in.col(a).head(d) = aW * c.A_in.col(a) + ab.col(0);
      c.fuse_in.col(a).tail(d) = c.tau;
      h0.col(a) = iW * c.fuse_in.col(a) + ib.col(0);
    }
  }

  // Wrap-aware relative Fourier features for every ordered pair.
  c.psi.resize(3 * K, N * N);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      double* col = c.psi.col(i * N + j).data();
      for (int r = 0; r < 3; ++r)
        fourier_embed_component(c.F_in(r, j) - c.F_in(r, i), K, col + r * K);
    }
  }

  const int msg_in = 2 * d + 6 + 3 * K;
  c.H.assign(static_cast<size_t>(sizes_.layers) + 1, MatX());
  c.H[0] = h0;
  c.msg_u1.assign(static_cast<size_t>(sizes_.layers), MatX());
  c.msg_m.assign(static_cast<size_t>(sizes_.layers), MatX());
  c.Msum.assign(static_cast<size_t>(sizes_.layers), MatX());
  c.upd_u1.assign(static_cast<size_t>(sizes_.layers), MatX());

  VecX x(msg_in);
  for (int l = 0; l < sizes_.layers; ++l) {
    const MatX& Hl = c.H[static_cast<size_t>(l)];
    auto mW1 = view(layers_[static_cast<size_t>(l)].msg_W1);
    auto mb1 = view(layers_[static_cast<size_t>(l)].msg_b1);
    auto mW2 = view(layers_[static_cast<size_t>(l)].msg_W2);
    auto mb2 = view(layers_[static_cast<size_t>(l)].msg_b2);
    auto uW1 = view(layers_[static_cast<size_t>(l)].upd_W1);
    auto ub1 = view(layers_[static_cast<size_t>(l)].upd_b1);
    auto uW2 = view(layers_[static_cast<size_t>(l)].upd_W2);
    auto ub2 = view(layers_[static_cast<size_t>(l)].upd_b2);

    MatX& u1 = c.msg_u1[static_cast<size_t>(l)];
    MatX& m = c.msg_m[static_cast<size_t>(l)];
    MatX& Msum = c.Msum[static_cast<size_t>(l)];
    u1.resize(d, N * N);
    m.resize(d, N * N);
    Msum = MatX::Zero(d, N);

    for (int i = 0; i < N; ++i) {
      for (int jo = 0; jo < N; ++jo) {
        int j = c.order[static_cast<size_t>(jo)];
        int p = i * N + j;
        x.head(d) = Hl.col(i);
        x.segment(d, d) = Hl.col(j);
        x.segment(2 * d, 6) = c.k;
        x.tail(3 * K) = c.psi.col(p);
        u1.col(p) = mW1 * x + mb1.col(0);
        m.col(p) = mW2 * silu_vec(u1.col(p)) + mb2.col(0);
        Msum.col(i) += m.col(p);
      }
    }

    MatX& uu1 = c.upd_u1[static_cast<size_t>(l)];
    uu1.resize(d, N);
    MatX Hn(d, N);
    VecX ux(2 * d);
    for (int i = 0; i < N; ++i) {
      ux.head(d) = Hl.col(i);
      ux.tail(d) = Msum.col(i);
      uu1.col(i) = uW1 * ux + ub1.col(0);
      Hn.col(i) = Hl.col(i) + uW2 * silu_vec(uu1.col(i)) + ub2.col(0);
    }
    c.H[static_cast<size_t>(l) + 1] = std::move(Hn);
  }

  const MatX& HL = c.H[static_cast<size_t>(sizes_.layers)];

  // Graph head for the lattice coefficients: pooled embedding next to the raw
  // coefficients, masked to the diffused dims.
  c.g = VecX::Zero(d);
  for (int ao = 0; ao < N; ++ao)
    c.g += HL.col(c.order[static_cast<size_t>(ao)]);
  c.g /= double(N);

  DenoiserOutput out;
  {
    auto W1 = view(kh_W1_);
    auto b1 = view(kh_b1_);
    auto W2 = view(kh_W2_);
    auto b2 = view(kh_b2_);
    VecX kz(d + 6);
    kz.head(d) = c.g;
    kz.tail(6) = c.k;
    c.k_u1 = W1 * kz + b1.col(0);
    VecX raw = W2 * silu_vec(c.k_u1) + b2.col(0);
    for (int i = 0; i < 6; ++i)
      out.eps_k[i] = c.free_mask[i] != 0.0 ? raw[i] : 0.0;
  }

  // Node heads, pulled back per atom and orbit-averaged.
  out.eps_F_atoms = MatX::Zero(3, N);
  out.eps_Fp = MatX::Zero(3, nsites);
  out.eps_Ap = MatX::Zero(h, nsites);
  c.f_u1.resize(d, N);
  c.a_u1.resize(d, N);
  c.f_out.resize(3, N);
  {
    auto fW1 = view(fh_W1_);
    auto fb1 = view(fh_b1_);
    auto fW2 = view(fh_W2_);
    auto fb2 = view(fh_b2_);
    auto aW1 = view(ah_W1_);
    auto ab1 = view(ah_b1_);
    auto aW2 = view(ah_W2_);
    auto ab2 = view(ah_b2_);
    for (int a = 0; a < N; ++a) {
      auto [s, i] = layout.atoms[static_cast<size_t>(a)];
      const WyckoffPosition& w = layout.pos(s);
      c.f_u1.col(a) = fW1 * HL.col(a) + fb1.col(0);
      c.f_out.col(a) = fW2 * silu_vec(c.f_u1.col(a)) + fb2.col(0);
      Vec3 pb = w.pinv[static_cast<size_t>(i)] * Vec3(c.f_out.col(a));
      out.eps_F_atoms.col(a) = pb;
      out.eps_Fp.col(s) += pb / double(w.multiplicity);

      VecX az(d + h);
      az.head(d) = HL.col(a);
      az.tail(h) = c.A_in.col(a);
      c.a_u1.col(a) = aW1 * az + ab1.col(0);
      VecX q = aW2 * silu_vec(c.a_u1.col(a)) + ab2.col(0);
      out.eps_Ap.col(s) += q / double(w.multiplicity);
    }
  }
  return out;
}

VecX Denoiser::backward(const LossGrad& grad) {
  if (!cache_.valid) throw DomainError("backward without a cached forward");
  const Cache& c = cache_;
  const StructureLayout& layout = *c.layout;
  const int d = sizes_.hidden;
  const int K = sizes_.fourier;
  const int N = c.N;

  VecX g = VecX::Zero(flat_.size());
  MatX dH = MatX::Zero(d, N);

  // k head.
  {
    VecX dout(6);
    for (int i = 0; i < 6; ++i)
      dout[i] = c.free_mask[i] != 0.0 ? grad.d_eps_k[i] : 0.0;
    auto W1 = view(kh_W1_);
    auto W2 = view(kh_W2_);
    VecX act = silu_vec(c.k_u1);
    gview(g, kh_W2_) += dout * act.transpose();
    gview(g, kh_b2_).col(0) += dout;
    VecX dact = W2.transpose() * dout;
    VecX du1(d);
    for (int i = 0; i < d; ++i) du1[i] = dact[i] * silu_grad(c.k_u1[i]);
    VecX kz(d + 6);
    kz.head(d) = c.g;
    kz.tail(6) = c.k;
    gview(g, kh_W1_) += du1 * kz.transpose();
    gview(g, kh_b1_).col(0) += du1;
    VecX dz = W1.transpose() * du1;
    for (int a = 0; a < N; ++a) dH.col(a) += dz.head(d) / double(N);
  }

  // F and A node heads.
  {
    auto fW1 = view(fh_W1_);
    auto fW2 = view(fh_W2_);
    auto aW1 = view(ah_W1_);
    auto aW2 = view(ah_W2_);
    const MatX& HL = c.H[static_cast<size_t>(sizes_.layers)];
    for (int a = 0; a < N; ++a) {
      auto [s, i] = layout.atoms[static_cast<size_t>(a)];
      const WyckoffPosition& w = layout.pos(s);

      Vec3 dpb = grad.d_eps_F_atoms.cols() == N
                     ? Vec3(grad.d_eps_F_atoms.col(a))
                     : Vec3::Zero();
      Vec3 dof = w.pinv[static_cast<size_t>(i)].transpose() * dpb;
      VecX act = silu_vec(c.f_u1.col(a));
      gview(g, fh_W2_) += dof * act.transpose();
      gview(g, fh_b2_).col(0) += dof;
      VecX dact = fW2.transpose() * dof;
      VecX du1(d);
      for (int r = 0; r < d; ++r) du1[r] = dact[r] * silu_grad(c.f_u1(r, a));
      gview(g, fh_W1_) += du1 * HL.col(a).transpose();
      gview(g, fh_b1_).col(0) += du1;
      dH.col(a) += fW1.transpose() * du1;

      VecX dq = grad.d_eps_Ap.cols() == layout.nsites()
                    ? VecX(grad.d_eps_Ap.col(s) / double(w.multiplicity))
                    : VecX(VecX::Zero(sizes_.h));
      VecX aact = silu_vec(c.a_u1.col(a));
      gview(g, ah_W2_) += dq * aact.transpose();
      gview(g, ah_b2_).col(0) += dq;
      VecX dact2 = aW2.transpose() * dq;
      VecX du2(d);
      for (int r = 0; r < d; ++r) du2[r] = dact2[r] * silu_grad(c.a_u1(r, a));
      VecX az(d + sizes_.h);
      az.head(d) = HL.col(a);
      az.tail(sizes_.h) = c.A_in.col(a);
      gview(g, ah_W1_) += du2 * az.transpose();
      gview(g, ah_b1_).col(0) += du2;
      dH.col(a) += (aW1.transpose() * du2).head(d);
    }
  }

  // Layers in reverse.
  const int msg_in = 2 * d + 6 + 3 * K;
  VecX x(msg_in);
  for (int l = sizes_.layers - 1; l >= 0; --l) {
    const LayerT& lt = layers_[static_cast<size_t>(l)];
    const MatX& Hl = c.H[static_cast<size_t>(l)];
    auto mW1 = view(lt.msg_W1);
    auto mW2 = view(lt.msg_W2);
    auto uW1 = view(lt.upd_W1);
    auto uW2 = view(lt.upd_W2);

    MatX dHin = dH;  // residual path
    MatX dM = MatX::Zero(d, N);
    VecX ux(2 * d);
    for (int i = 0; i < N; ++i) {
      VecX dout = dH.col(i);
      const auto& uu1 = c.upd_u1[static_cast<size_t>(l)].col(i);
      VecX act = silu_vec(uu1);
      gview(g, lt.upd_W2) += dout * act.transpose();
      gview(g, lt.upd_b2).col(0) += dout;
      VecX dact = uW2.transpose() * dout;
      VecX du1(d);
      for (int r = 0; r < d; ++r) du1[r] = dact[r] * silu_grad(uu1[r]);
      ux.head(d) = Hl.col(i);
      ux.tail(d) = c.Msum[static_cast<size_t>(l)].col(i);
      gview(g, lt.upd_W1) += du1 * ux.transpose();
      gview(g, lt.upd_b1).col(0) += du1;
      VecX dx = uW1.transpose() * du1;
      dHin.col(i) += dx.head(d);
      dM.col(i) = dx.tail(d);
    }

    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        int p = i * N + j;
        VecX dm = dM.col(i);
        const auto& u1 = c.msg_u1[static_cast<size_t>(l)].col(p);
        VecX act = silu_vec(u1);
        gview(g, lt.msg_W2) += dm * act.transpose();
        gview(g, lt.msg_b2).col(0) += dm;
        VecX dact = mW2.transpose() * dm;
        VecX du1(d);
        for (int r = 0; r < d; ++r) du1[r] = dact[r] * silu_grad(u1[r]);
        x.head(d) = Hl.col(i);
        x.segment(d, d) = Hl.col(j);
        x.segment(2 * d, 6) = c.k;
        x.tail(3 * K) = c.psi.col(p);
        gview(g, lt.msg_W1) += du1 * x.transpose();
        gview(g, lt.msg_b1).col(0) += du1;
        VecX dx = mW1.transpose() * du1;
        dHin.col(i) += dx.head(d);
        dHin.col(j) += dx.segment(d, d);
      }
    }
    dH = std::move(dHin);
  }

  // Input fusion and atom embedding.
  {
    auto iW = view(in_W_);
    for (int a = 0; a < N; ++a) {
      VecX dh0 = dH.col(a);
      gview(g, in_b_).col(0) += dh0;
      gview(g, in_W_) += dh0 * c.fuse_in.col(a).transpose();
      VecX dfuse = iW.transpose() * dh0;
      VecX dfa = dfuse.head(d);
      gview(g, atom_W_) += dfa * c.A_in.col(a).transpose();
      gview(g, atom_b_).col(0) += dfa;
    }
  }

  return g;
}

void Denoiser::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot open checkpoint for writing: " + path);
  const char magic[8] = {'X', 'G', 'C', 'K', 'P', 'T', '0', '1'};
  out.write(magic, 8);
  std::int32_t dims[4] = {sizes_.layers, sizes_.hidden, sizes_.fourier, sizes_.h};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  std::int64_t n = nparams();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(flat_.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  if (!out) throw DomainError("checkpoint write failed: " + path);
}

Denoiser Denoiser::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "XGCKPT01", 8) != 0)
    throw ParseError("not a checkpoint file: " + path);
  std::int32_t dims[4];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  std::int64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in) throw ParseError("truncated checkpoint header: " + path);
  Sizes sizes;
  sizes.layers = dims[0];
  sizes.hidden = dims[1];
  sizes.fourier = dims[2];
  sizes.h = dims[3];
  Denoiser net(sizes, 0);
  if (n != net.nparams())
    throw ParseError("checkpoint parameter count mismatch: " + path);
  in.read(reinterpret_cast<char*>(net.flat_.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ParseError("truncated checkpoint payload: " + path);
  return net;
}

TrainResult train(Denoiser& net, const std::vector<TrainingExample>& data,
                  const NoiseSchedule& sched, const TrainOptions& opt) {
  if (data.empty()) throw DomainError("training set is empty");
  if (opt.optimizer != "sgd" && opt.optimizer != "adam")
    throw DomainError("unknown optimizer: " + opt.optimizer);

  Rng rng(opt.seed);
  TrainResult result;
  VecX vel = VecX::Zero(net.nparams());
  VecX m1 = VecX::Zero(net.nparams());
  VecX m2 = VecX::Zero(net.nparams());
  long step = 0;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (const TrainingExample& ex : data) {
      int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.T)));
      LossGrad lg;
      LossParts parts =
          diffusion_loss(ex.gt, ex.layout, net, sched, t, rng, opt.loss, &lg);
      VecX g = net.backward(lg);
      ++step;
      if (opt.optimizer == "sgd") {
        vel = opt.momentum * vel - opt.lr * g;
        net.params() += vel;
      } else {
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        m1 = b1 * m1 + (1.0 - b1) * g;
        m2 = b2 * m2 + (1.0 - b2) * g.cwiseProduct(g).eval();
        double c1 = 1.0 - std::pow(b1, double(step));
        double c2 = 1.0 - std::pow(b2, double(step));
        net.params() -=
            (opt.lr * (m1 / c1).array() / ((m2 / c2).array().sqrt() + eps))
                .matrix();
      }
      result.trace.push_back(parts.total);
    }
  }
  return result;
}

double eval_loss(Denoiser& net, const std::vector<TrainingExample>& data,
                 const NoiseSchedule& sched, const LossOptions& opt,
                 const std::vector<int>& t_values, std::uint64_t seed_base) {
  if (data.empty() || t_values.empty())
    throw DomainError("evaluation grid is empty");
  double acc = 0.0;
  long count = 0;
  for (size_t e = 0; e < data.size(); ++e) {
    for (int t : t_values) {
      Rng rng(seed_base + 1000003ULL * e + static_cast<std::uint64_t>(t));
      LossParts parts =
          diffusion_loss(data[e].gt, data[e].layout, net, sched, t, rng, opt);
      acc += parts.total;
      ++count;
    }
  }
  return acc / double(count);
}

}  // namespace xtal
