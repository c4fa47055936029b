#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace xtal {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// Thrown for invalid inputs in an otherwise healthy call (bad lattice,
// unknown element, malformed file). The C API maps it to a status code.
class DomainError : public std::runtime_error {
public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public DomainError {
public:
  explicit ParseError(const std::string& what) : DomainError(what) {}
};

// Wrap into [0, 1). Inputs at exactly 1.0 (or any integer) map to 0.0.
inline double wrap01(double x) {
  double r = x - std::floor(x);
  if (r >= 1.0) r = 0.0;
  return r;
}

inline Vec3 wrap01(const Vec3& v) {
  return Vec3(wrap01(v.x()), wrap01(v.y()), wrap01(v.z()));
}

// Wrap into [-1/2, 1/2): the signed distance to the nearest integer.
inline double wrap_half(double x) {
  double r = x - std::round(x);
  if (r >= 0.5) r -= 1.0;
  if (r < -0.5) r += 1.0;
  return r;
}

inline Vec3 wrap_half(const Vec3& v) {
  return Vec3(wrap_half(v.x()), wrap_half(v.y()), wrap_half(v.z()));
}

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace xtal
