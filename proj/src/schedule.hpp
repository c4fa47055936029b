#pragma once

#include <string>
#include <vector>

#include "common.hpp"

namespace xtal {

// Discrete-time noise schedules for the three coupled processes.
// Arrays are indexed by step t in 1..T; index 0 holds the conventional
// boundary values (alpha_bar[0] = 1, sigma[0] = 0).
struct NoiseSchedule {
  int T = 0;
  double s = 0.008;
  double sigma1 = 0.005;
  double sigmaT = 0.5;
  double corrector_gamma = 5e-6;

  std::vector<double> beta;       // beta[t], t in 1..T
  std::vector<double> alpha;      // 1 - beta[t]
  std::vector<double> alpha_bar;  // prod_{u<=t} alpha[u]
  std::vector<double> sigma;      // sigma[t], geometric from sigma1 to sigmaT
  std::vector<double> lambda;     // wrapped-score weight per t (may be empty)

  static NoiseSchedule make(int T, double s, double sigma1, double sigmaT,
                            double corrector_gamma);

  double lambda_at(int t) const;
};

// beta/alpha_bar from the squared-cosine profile
// f(t) = cos^2(((t/T + s)/(1 + s)) * pi/2), alpha_bar_t = f(t)/f(0),
// with beta clipped into (0, 0.999].
void fill_cosine(NoiseSchedule& sched);

// sigma_t = sigma1 * (sigmaT/sigma1)^((t-1)/(T-1)); T = 1 pins sigma1.
void fill_exp_sigma(NoiseSchedule& sched);

// Monte-Carlo table of lambda_t = 1 / E[ (d/du log N_w(u; 0, sigma_t^2))^2 ]
// with u drawn from the wrapped normal itself. Fixed internal seed,
// `samples` draws per t. When `cache_path` is nonempty the table is reused
// from (or written to) that file keyed by the schedule parameters.
void fill_lambda(NoiseSchedule& sched, int n_img, int samples = 10000,
                 const std::string& cache_path = "");

}  // namespace xtal
