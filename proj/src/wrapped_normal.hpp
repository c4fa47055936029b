#pragma once

#include "common.hpp"

namespace xtal {

// One-dimensional wrapped normal on the unit circle, truncated to images
// n in [-n_img, n_img]. n_img = 3 keeps the neglected tail below 1e-12 for
// sigma <= 0.3 and below 1e-8 at the schedule ceiling sigma = 0.5.

// log sum_n exp(-(w(x)+n)^2 / (2 sigma^2)), unnormalized.
double wn_logdensity_1d(double x, double sigma, int n_img = 3);

// d/dx of the log-density: sum_n w_n * (-(w(x)+n)/sigma^2) / sum_n w_n.
double wn_score_1d(double x, double sigma, int n_img = 3);

}  // namespace xtal
