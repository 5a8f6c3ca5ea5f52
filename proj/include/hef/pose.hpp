#pragma once

#include <numbers>

namespace hef {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Maps any angle into [0, 2π).
double wrap_two_pi(double a);

// Maps any angle into (−π, π].
double wrap_pi(double a);

// Signed difference a − b wrapped into (−π, π].
inline double angdiff(double a, double b) { return wrap_pi(a - b); }

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // always in [0, 2π)

  Pose() = default;
  Pose(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_two_pi(theta_)) {}
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);

// Applies the pose to a point: R(theta)·p + t.
void transform_point(const Pose& a, double px, double py, double& ox, double& oy);

}  // namespace hef
