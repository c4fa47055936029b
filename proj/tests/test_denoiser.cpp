#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "denoiser.hpp"
#include "spacegroup.hpp"

using namespace xtal;

namespace {

const SpaceGroupTable& table() {
  static SpaceGroupTable t = SpaceGroupTable::load(XTALGEN_DATA_DIR
                                                   "/spacegroups");
  return t;
}

Denoiser::Sizes tiny_sizes(int h) {
  Denoiser::Sizes s;
  s.layers = 1;
  s.hidden = 8;
  s.fourier = 4;
  s.h = h;
  return s;
}

// P1 layout with n general sites.
StructureLayout p1_layout(int n, int h) {
  const SpaceGroupEntry& g = table().at(1);
  return StructureLayout::make(g, std::vector<int>(size_t(n), 0), h);
}

DiffusionState p1_state(int t, const std::vector<Vec3>& coords, int h) {
  DiffusionState st;
  st.t = t;
  st.k = Vec6::Ones() * 0.2;
  st.Fp = MatX::Zero(3, static_cast<int>(coords.size()));
  st.Ap = MatX::Zero(h, static_cast<int>(coords.size()));
  for (int s = 0; s < st.Fp.cols(); ++s) {
    st.Fp.col(s) = coords[size_t(s)];
    st.Ap(s % h, s) = 1.0;
  }
  return st;
}

}  // namespace

TEST_CASE("fourier features of a wrapped coordinate") {
  double out[8];
  Denoiser::fourier_embed_component(0.0, 8, out);
  for (int k = 0; k < 8; k += 2) {
    CHECK(out[k] == 0.0);      // sin channels
    CHECK(out[k + 1] == 1.0);  // cos channels
  }

  double q[4];
  Denoiser::fourier_embed_component(0.25, 4, q);
  CHECK(q[0] == 0.0);  // sin 0
  CHECK(q[1] == 1.0);  // cos 0
  CHECK(q[2] == doctest::Approx(1.0).epsilon(1e-15));   // sin pi/2
  CHECK(std::abs(q[3]) < 1e-15);                        // cos pi/2
}

TEST_CASE("initialization is seed-deterministic with zero biases") {
  Denoiser a(tiny_sizes(3), 7);
  Denoiser b(tiny_sizes(3), 7);
  Denoiser c(tiny_sizes(3), 8);
  REQUIRE(a.nparams() == b.nparams());
  CHECK(a.params() == b.params());
  CHECK(a.params() != c.params());
  CHECK(a.params().cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("constrained lattice dimensions never receive a prediction") {
  const SpaceGroupEntry& g = table().at(225);
  StructureLayout layout = StructureLayout::make(
      g, {g.position_index('a'), g.position_index('b')}, 3);
  Denoiser net(tiny_sizes(3), 3);
  NoiseSchedule sched = NoiseSchedule::make(20, 0.008, 0.005, 0.5, 5e-6);

  DiffusionState st;
  st.t = 10;
  st.k = project_k(Vec6::Ones(), layout.mask);
  st.Fp = MatX::Zero(3, 2);
  st.Ap = MatX::Zero(3, 2);
  st.Ap(0, 0) = st.Ap(1, 1) = 1.0;

  DenoiserOutput out = net.denoise(st, layout, sched);
  for (int i = 0; i < 5; ++i) CHECK(out.eps_k[i] == 0.0);
  CHECK(out.eps_k[5] != 0.0);
  // fixed-point sites leave no coordinate freedom
  CHECK(out.eps_Fp.norm() == 0.0);
}

TEST_CASE("outputs are invariant under a global coordinate shift") {
  const int h = 3;
  StructureLayout layout = p1_layout(3, h);
  Denoiser net(tiny_sizes(h), 11);
  NoiseSchedule sched = NoiseSchedule::make(20, 0.008, 0.005, 0.5, 5e-6);

  std::vector<Vec3> base = {Vec3(1 / 64.0, 10 / 64.0, 3 / 64.0),
                            Vec3(40 / 64.0, 22 / 64.0, 9 / 64.0),
                            Vec3(13 / 64.0, 50 / 64.0, 37 / 64.0)};
  DiffusionState st = p1_state(10, base, h);
  DenoiserOutput ref = net.denoise(st, layout, sched);

  SUBCASE("bitwise for a dyadic shift that wraps nothing") {
    // exact coordinate arithmetic and an unchanged internal atom order
    double tau = 8 / 64.0;
    std::vector<Vec3> moved = base;
    for (Vec3& v : moved)
      for (int r = 0; r < 3; ++r) v[r] = wrap01(v[r] + tau);
    DiffusionState st2 = p1_state(10, moved, h);
    DenoiserOutput got = net.denoise(st2, layout, sched);
    CHECK(got.eps_k == ref.eps_k);
    CHECK(got.eps_Fp == ref.eps_Fp);
    CHECK(got.eps_Ap == ref.eps_Ap);
  }

  SUBCASE("to rounding for arbitrary shifts") {
    // wrapping reshuffles the internal atom order, so sums regroup
    for (double tau : {0.137, 16 / 64.0, 40 / 64.0, 0.731}) {
      std::vector<Vec3> moved = base;
      for (Vec3& v : moved)
        for (int r = 0; r < 3; ++r) v[r] = wrap01(v[r] + tau);
      DiffusionState st2 = p1_state(10, moved, h);
      DenoiserOutput got = net.denoise(st2, layout, sched);
      CHECK((got.eps_k - ref.eps_k).norm() < 1e-12);
      CHECK((got.eps_Fp - ref.eps_Fp).norm() < 1e-12);
      CHECK((got.eps_Ap - ref.eps_Ap).norm() < 1e-12);
    }
  }
}

TEST_CASE("outputs commute with site permutations") {
  const int h = 3;
  StructureLayout layout = p1_layout(3, h);
  Denoiser net(tiny_sizes(h), 13);
  NoiseSchedule sched = NoiseSchedule::make(20, 0.008, 0.005, 0.5, 5e-6);

  std::vector<Vec3> coords = {Vec3(0.11, 0.52, 0.93), Vec3(0.41, 0.02, 0.63),
                              Vec3(0.71, 0.32, 0.23)};
  DiffusionState st = p1_state(7, coords, h);
  DenoiserOutput ref = net.denoise(st, layout, sched);

  const int perm[3] = {2, 0, 1};
  DiffusionState ps;
  ps.t = st.t;
  ps.k = st.k;
  ps.Fp = MatX::Zero(3, 3);
  ps.Ap = MatX::Zero(h, 3);
  for (int s = 0; s < 3; ++s) {
    ps.Fp.col(s) = st.Fp.col(perm[s]);
    ps.Ap.col(s) = st.Ap.col(perm[s]);
  }
  DenoiserOutput got = net.denoise(ps, layout, sched);
  CHECK(got.eps_k == ref.eps_k);
  for (int s = 0; s < 3; ++s) {
    CHECK(got.eps_Fp.col(s) == ref.eps_Fp.col(perm[s]));
    CHECK(got.eps_Ap.col(s) == ref.eps_Ap.col(perm[s]));
  }
}

TEST_CASE("reverse-mode gradients match central differences") {
  const int h = 3;
  const SpaceGroupEntry& g14 = table().at(14);
  // one general orbit (multiplicity 4) exercises the orbit averaging
  StructureLayout layout =
      StructureLayout::make(g14, {g14.position_index('e')}, h);

  GroundTruth gt;
  gt.k0 = project_k((Vec6() << .1, .2, .3, .1, .2, .3).finished(), layout.mask);
  gt.F0 = MatX::Zero(3, 1);
  gt.F0.col(0) = Vec3(0.13, 0.27, 0.38);
  gt.A0 = MatX::Zero(h, 1);
  gt.A0(1, 0) = 1.0;

  NoiseSchedule sched = NoiseSchedule::make(15, 0.008, 0.005, 0.5, 5e-6);
  fill_lambda(sched, 3, 2000);

  Denoiser net(tiny_sizes(h), 5);
  LossOptions opt;

  auto loss_at = [&](int t) {
    Rng rng(101);
    LossGrad grad;
    diffusion_loss(gt, layout, net, sched, t, rng, opt, &grad);
    return net.backward(grad);
  };
  auto loss_value = [&](int t) {
    Rng rng(101);
    return diffusion_loss(gt, layout, net, sched, t, rng, opt).total;
  };

  const int t = 9;
  VecX analytic = loss_at(t);
  REQUIRE(analytic.size() == net.nparams());

  Rng pick(77);
  const double step = 1e-5;
  int checked = 0;
  double worst = 0.0;
  while (checked < 60) {
    int i = static_cast<int>(pick.below(static_cast<uint64_t>(net.nparams())));
    double save = net.params()[i];
    net.params()[i] = save + step;
    double up = loss_value(t);
    net.params()[i] = save - step;
    double dn = loss_value(t);
    net.params()[i] = save;
    double fd = (up - dn) / (2 * step);
    if (std::abs(fd) < 1e-8 && std::abs(analytic[i]) < 1e-8) {
      ++checked;
      continue;  // both zero: dead path for this input
    }
    double rel = std::abs(fd - analytic[i]) /
                 std::max(1e-8, std::max(std::abs(fd), std::abs(analytic[i])));
    worst = std::max(worst, rel);
    CHECK(rel < 1e-4);
    ++checked;
  }
  (void)worst;
}

TEST_CASE("zero output-gradient backpropagates to a zero parameter gradient") {
  const int h = 3;
  StructureLayout layout = p1_layout(2, h);
  Denoiser net(tiny_sizes(h), 3);
  NoiseSchedule sched = NoiseSchedule::make(10, 0.008, 0.005, 0.5, 5e-6);
  DiffusionState st = p1_state(5, {Vec3(0.1, 0.2, 0.3), Vec3(0.6, 0.5, 0.4)}, h);
  net.denoise(st, layout, sched);

  LossGrad grad;
  grad.d_eps_F_atoms = MatX::Zero(3, layout.natoms());
  grad.d_eps_Ap = MatX::Zero(h, layout.nsites());
  VecX g = net.backward(grad);
  CHECK(g.norm() == 0.0);
}

TEST_CASE("backward before any forward is an error") {
  Denoiser net(tiny_sizes(3), 3);
  LossGrad grad;
  CHECK_THROWS_AS(net.backward(grad), DomainError);
}

TEST_CASE("checkpoint round trip preserves behavior") {
  const int h = 3;
  Denoiser net(tiny_sizes(h), 21);
  const char* path = "denoiser_roundtrip.ckpt";
  net.save(path);
  Denoiser back = Denoiser::load(path);
  CHECK(back.sizes().layers == net.sizes().layers);
  CHECK(back.sizes().hidden == net.sizes().hidden);
  CHECK(back.sizes().fourier == net.sizes().fourier);
  CHECK(back.sizes().h == net.sizes().h);
  REQUIRE(back.nparams() == net.nparams());
  CHECK(back.params() == net.params());

  StructureLayout layout = p1_layout(2, h);
  NoiseSchedule sched = NoiseSchedule::make(10, 0.008, 0.005, 0.5, 5e-6);
  DiffusionState st = p1_state(4, {Vec3(0.2, 0.3, 0.4), Vec3(0.8, 0.1, 0.5)}, h);
  DenoiserOutput a = net.denoise(st, layout, sched);
  DenoiserOutput b = back.denoise(st, layout, sched);
  CHECK(a.eps_k == b.eps_k);
  CHECK(a.eps_Fp == b.eps_Fp);
  CHECK(a.eps_Ap == b.eps_Ap);
  std::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected") {
  CHECK_THROWS_AS(Denoiser::load("no_such_checkpoint.ckpt"), DomainError);

  const char* path = "denoiser_corrupt.ckpt";
  Denoiser net(tiny_sizes(3), 2);
  net.save(path);

  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    bytes[0] = 'Y';  // break the magic
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(Denoiser::load(path), ParseError);

  net.save(path);
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() - 16);  // truncate the parameter block
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(Denoiser::load(path), ParseError);
  std::remove(path);
}

TEST_CASE("training on one structure cuts the loss by an order of magnitude") {
  const int h = 3;
  const SpaceGroupEntry& g1 = table().at(1);
  StructureLayout layout = StructureLayout::make(g1, {0, 0}, h);

  GroundTruth gt;
  gt.k0 = (Vec6() << 0.05, -0.1, 0.07, 0.02, 0.12, 0.4).finished();
  gt.F0 = MatX::Zero(3, 2);
  gt.F0.col(0) = Vec3(0.15, 0.35, 0.55);
  gt.F0.col(1) = Vec3(0.65, 0.85, 0.05);
  gt.A0 = MatX::Zero(h, 2);
  gt.A0(0, 0) = 1.0;
  gt.A0(2, 1) = 1.0;

  NoiseSchedule sched = NoiseSchedule::make(25, 0.008, 0.005, 0.5, 5e-6);
  fill_lambda(sched, 3, 4000);

  Denoiser::Sizes sizes;
  sizes.layers = 1;
  sizes.hidden = 16;
  sizes.fourier = 8;
  sizes.h = h;
  Denoiser net(sizes, 1);

  std::vector<TrainingExample> data = {{layout, gt}};
  std::vector<int> grid = {1, 7, 13, 19, 25};

  LossOptions lopt;
  double before = eval_loss(net, data, sched, lopt, grid, 555);

  std::uint64_t seed = 9;
  for (double lr : {5e-3, 1e-3, 2e-4}) {
    TrainOptions topt;
    topt.epochs = 2000;
    topt.lr = lr;
    topt.optimizer = "adam";
    topt.seed = seed++;
    topt.loss = lopt;
    TrainResult res = train(net, data, sched, topt);
    REQUIRE(res.trace.size() == 2000);
  }

  double after = eval_loss(net, data, sched, lopt, grid, 555);
  CHECK(after * 10.0 <= before);
}
