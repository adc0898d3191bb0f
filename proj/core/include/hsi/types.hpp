#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace hsi {

/// Agent-indexed 2-D quantities: one row per agent, columns (x, y).
using Matrix2Xr = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using Point2 = Eigen::Vector2d;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments: non-finite values, out-of-range sizes or gains.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Degenerate, self-intersecting or too-thin polygons.
class InvalidShape : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class PlanningError : public Error {
 public:
  PlanningError(const std::string& what, int step) : Error(what), step_(step) {}
  /// Plan step (1-based) that failed, or 0 when not step specific.
  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// Counter-clockwise rotation by `theta` radians.
inline Eigen::Matrix2d rotation(double theta) {
  Eigen::Matrix2d r;
  const double c = std::cos(theta), s = std::sin(theta);
  r << c, -s, s, c;
  return r;
}

/// World placement of a centred formation: row i maps to c + s * R(theta) z_i,
/// i.e. Z = 1 c^T + s z R(theta)^T.
inline Matrix2Xr place_formation(const Matrix2Xr& z, double scale, double theta, const Point2& centroid) {
  Matrix2Xr out = scale * z * rotation(theta).transpose();
  out.rowwise() += centroid.transpose();
  return out;
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double theta) {
  const double two_pi = 2.0 * M_PI;
  double r = std::fmod(theta + M_PI, two_pi);
  if (r < 0) r += two_pi;
  r -= M_PI;
  if (r <= -M_PI) r += two_pi;
  return r;
}

}  // namespace hsi
