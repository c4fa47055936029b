#pragma once

#include <cstdint>
#include <string>

#include "diffusion.hpp"
#include "schedule.hpp"

namespace xtal {

// One JSON document driving a run: schedule, model sizes, loss weights,
// optimizer settings, mode, and file locations. Every field is validated
// against the module preconditions at load time.
struct RunConfig {
  int T = 1000;
  double s = 0.008;
  double sigma1 = 0.005;
  double sigmaT = 0.5;
  double gamma = 5e-6;

  int layers = 3;
  int hidden = 64;
  int fourier = 32;

  double lambda_k = 1.0;
  double lambda_F = 1.0;
  double lambda_A = 20.0;
  int n_img = 3;

  std::uint64_t seed = 0;
  std::string mode = "csp";           // csp | ab-initio | refine
  std::string loss_average = "post";  // post | pre

  double lr = 1e-3;
  double momentum = 0.9;
  int epochs = 100;
  std::string optimizer = "sgd";  // sgd | adam
  int t_start = 100;              // refine noise level
  int jobs = 1;

  std::string data_dir;
  std::string checkpoint;
  std::string out_dir = ".";
  std::string elements_path;
  std::string spacegroups_path;

  static RunConfig load(const std::string& path);
  static RunConfig from_text(const std::string& text);
  void validate() const;

  // Typed access by key name for the string-based configuration API.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  NoiseSchedule make_schedule() const {
    return NoiseSchedule::make(T, s, sigma1, sigmaT, gamma);
  }
  LossOptions loss_options(bool csp) const;
};

}  // namespace xtal
