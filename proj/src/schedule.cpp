#include "schedule.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "rng.hpp"
#include "wrapped_normal.hpp"

namespace xtal {

NoiseSchedule NoiseSchedule::make(int T, double s, double sigma1, double sigmaT,
                                  double corrector_gamma) {
  if (T < 1) throw DomainError("schedule needs T >= 1");
  if (!(s > 0)) throw DomainError("cosine offset s must be positive");
  if (!(sigma1 > 0 && sigma1 < sigmaT))
    throw DomainError("sigma schedule needs 0 < sigma1 < sigmaT");
  NoiseSchedule sched;
  sched.T = T;
  sched.s = s;
  sched.sigma1 = sigma1;
  sched.sigmaT = sigmaT;
  sched.corrector_gamma = corrector_gamma;
  fill_cosine(sched);
  fill_exp_sigma(sched);
  return sched;
}

void fill_cosine(NoiseSchedule& sched) {
  const int T = sched.T;
  auto f = [&](double t) {
    double x = ((t / T + sched.s) / (1.0 + sched.s)) * kPi / 2.0;
    double c = std::cos(x);
    return c * c;
  };
  const double f0 = f(0.0);
  sched.alpha_bar.assign(T + 1, 1.0);
  sched.beta.assign(T + 1, 0.0);
  sched.alpha.assign(T + 1, 1.0);
  for (int t = 1; t <= T; ++t) {
    double target = f(double(t)) / f0;
    double beta = 1.0 - target / sched.alpha_bar[t - 1];
    if (beta > 0.999) beta = 0.999;
    if (beta < 1e-12) beta = 1e-12;
    sched.beta[t] = beta;
    sched.alpha[t] = 1.0 - beta;
    sched.alpha_bar[t] = sched.alpha_bar[t - 1] * sched.alpha[t];
  }
}

void fill_exp_sigma(NoiseSchedule& sched) {
  const int T = sched.T;
  sched.sigma.assign(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    double frac = T == 1 ? 0.0 : double(t - 1) / double(T - 1);
    sched.sigma[t] = sched.sigma1 * std::pow(sched.sigmaT / sched.sigma1, frac);
  }
}

double NoiseSchedule::lambda_at(int t) const {
  if (t < 1 || t > T) throw DomainError("schedule step out of range");
  if (lambda.empty())
    throw DomainError("lambda table not initialized");
  return lambda[static_cast<size_t>(t)];
}

namespace {

std::string lambda_header(const NoiseSchedule& sched, int n_img, int samples) {
  std::ostringstream ss;
  ss << "lambda-table 1 T=" << sched.T << " sigma1=" << sched.sigma1
     << " sigmaT=" << sched.sigmaT << " n_img=" << n_img
     << " samples=" << samples;
  return ss.str();
}

bool try_load_lambda(NoiseSchedule& sched, const std::string& path,
                     const std::string& header) {
  std::ifstream in(path);
  if (!in) return false;
  std::string first;
  if (!std::getline(in, first) || first != header) return false;
  std::vector<double> table(static_cast<size_t>(sched.T) + 1, 0.0);
  for (int t = 1; t <= sched.T; ++t) {
    int tt = 0;
    double v = 0;
    if (!(in >> tt >> v) || tt != t || !(v > 0)) return false;
    table[static_cast<size_t>(t)] = v;
  }
  sched.lambda = std::move(table);
  return true;
}

}  // namespace

void fill_lambda(NoiseSchedule& sched, int n_img, int samples,
                 const std::string& cache_path) {
  const std::string header = lambda_header(sched, n_img, samples);
  if (!cache_path.empty() && try_load_lambda(sched, cache_path, header)) return;

  sched.lambda.assign(static_cast<size_t>(sched.T) + 1, 0.0);
  Rng rng(0x1a2b3c4dULL);
  for (int t = 1; t <= sched.T; ++t) {
    double sigma = sched.sigma[static_cast<size_t>(t)];
    double acc = 0.0;
    for (int i = 0; i < samples; ++i) {
      double u = wrap_half(sigma * rng.normal());
      double sc = wn_score_1d(u, sigma, n_img);
      acc += sc * sc;
    }
    double mean_sq = acc / samples;
    sched.lambda[static_cast<size_t>(t)] = 1.0 / mean_sq;
  }

  if (!cache_path.empty()) {
    std::ofstream out(cache_path);
    if (out) {
      out << header << "\n";
      out.precision(17);
      for (int t = 1; t <= sched.T; ++t)
        out << t << " " << sched.lambda[static_cast<size_t>(t)] << "\n";
    }
  }
}

}  // namespace xtal
