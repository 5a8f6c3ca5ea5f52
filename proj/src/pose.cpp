#include "hef/pose.hpp"

#include <cmath>

namespace hef {

double wrap_two_pi(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a tiny negative number can round up to exactly 2π
  if (r >= kTwoPi) r = 0.0;
  return r;
}

double wrap_pi(double a) {
  double r = wrap_two_pi(a);
  if (r > std::numbers::pi) r -= kTwoPi;
  return r;
}

Pose compose(const Pose& a, const Pose& b) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  return Pose(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.theta + b.theta);
}

Pose inverse(const Pose& a) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  // −R(−θ)·t
  return Pose(-(c * a.x + s * a.y), -(-s * a.x + c * a.y), -a.theta);
}

void transform_point(const Pose& a, double px, double py, double& ox, double& oy) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  ox = a.x + c * px - s * py;
  oy = a.y + s * px + c * py;
}

}  // namespace hef
