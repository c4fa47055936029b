#include "wrapped_normal.hpp"

#include <limits>

namespace xtal {

namespace {

// Shared accumulation with the largest exponent factored out, so small sigma
// cannot underflow every term.
struct WnSums {
  double logmax = 0;
  double wsum = 0;      // sum of exp(e_n - e_max)
  double swsum = 0;     // sum of weights times per-image score
};

WnSums wn_sums(double x, double sigma, int n_img) {
  if (!(sigma > 0)) throw DomainError("wrapped normal needs sigma > 0");
  double xw = wrap_half(x);
  double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  WnSums s;
  double emax = -std::numeric_limits<double>::infinity();
  for (int n = -n_img; n <= n_img; ++n) {
    double u = xw + n;
    double e = -u * u * inv2s2;
    if (e > emax) emax = e;
  }
  s.logmax = emax;
  for (int n = -n_img; n <= n_img; ++n) {
    double u = xw + n;
    double e = -u * u * inv2s2;
    double w = std::exp(e - emax);
    s.wsum += w;
    s.swsum += w * (-u / (sigma * sigma));
  }
  return s;
}

}  // namespace

double wn_logdensity_1d(double x, double sigma, int n_img) {
  WnSums s = wn_sums(x, sigma, n_img);
  return s.logmax + std::log(s.wsum);
}

double wn_score_1d(double x, double sigma, int n_img) {
  WnSums s = wn_sums(x, sigma, n_img);
  return s.swsum / s.wsum;
}

}  // namespace xtal
