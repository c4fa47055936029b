#include <doctest.h>

#include <cmath>

#include "rng.hpp"
#include "wrapped_normal.hpp"

using namespace xtal;

TEST_CASE("score vanishes at zero displacement") {
  // narrow scale: images beyond n = 0 underflow entirely
  CHECK(wn_score_1d(0.0, 1e-6) == 0.0);
  // wide scales: the mirrored image terms cancel to rounding noise
  CHECK(std::abs(wn_score_1d(0.0, 0.1)) < 1e-12);
  CHECK(std::abs(wn_score_1d(0.0, 0.5)) < 1e-12);
}

TEST_CASE("score is an odd function") {
  for (double sigma : {0.01, 0.1, 0.5})
    for (double x : {0.03, 0.11, 0.27, 0.41})
      CHECK(wn_score_1d(-x, sigma) == doctest::Approx(-wn_score_1d(x, sigma))
                                          .epsilon(1e-13));
}

TEST_CASE("score and log-density are exactly periodic") {
  // dyadic offsets keep x+1 exactly representable
  for (int i = -16; i <= 16; ++i) {
    double x = i / 32.0;
    for (double sigma : {0.01, 0.1, 0.5}) {
      CHECK(wn_score_1d(x + 1.0, sigma) == wn_score_1d(x, sigma));
      CHECK(wn_score_1d(x - 2.0, sigma) == wn_score_1d(x, sigma));
      CHECK(wn_logdensity_1d(x + 1.0, sigma) == wn_logdensity_1d(x, sigma));
    }
  }
}

TEST_CASE("score equals the derivative of the log-density") {
  Rng rng(13);
  const double h = 1e-6;
  for (double sigma : {0.01, 0.1, 0.5}) {
    for (int it = 0; it < 100; ++it) {
      double x = rng.uniform(-0.5, 0.5);
      if (std::abs(x) < 0.02 || std::abs(std::abs(x) - 0.5) < 0.02) continue;
      double fd =
          (wn_logdensity_1d(x + h, sigma) - wn_logdensity_1d(x - h, sigma)) /
          (2 * h);
      double sc = wn_score_1d(x, sigma);
      CHECK(sc == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("small sigma reduces to the plain Gaussian score") {
  // images beyond n = 0 are negligible: score = -x / sigma^2
  for (double x : {0.001, -0.002, 0.0005}) {
    double sigma = 0.01;
    CHECK(wn_score_1d(x, sigma) ==
          doctest::Approx(-x / (sigma * sigma)).epsilon(1e-10));
  }
}

TEST_CASE("the image truncation is converged at three images") {
  for (double x : {0.05, 0.25, 0.45}) {
    // below sigma = 0.3 the n = 4 image underflows outright
    for (double sigma : {0.1, 0.3}) {
      double a = wn_score_1d(x, sigma, 3);
      double b = wn_score_1d(x, sigma, 6);
      CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
    // at the schedule ceiling the neglected tail is still below 1e-8
    CHECK(wn_score_1d(x, 0.5, 3) ==
          doctest::Approx(wn_score_1d(x, 0.5, 6)).epsilon(1e-8));
  }
}

TEST_CASE("the log-density is symmetric about the half-integers") {
  for (double sigma : {0.1, 0.5}) {
    for (double d : {0.05, 0.15, 0.3}) {
      CHECK(wn_logdensity_1d(0.5 - d, sigma) ==
            doctest::Approx(wn_logdensity_1d(0.5 + d, sigma)).epsilon(1e-13));
    }
  }
}
