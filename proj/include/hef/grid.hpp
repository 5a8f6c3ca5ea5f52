#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "hef/pose.hpp"

namespace hef {

// Equally spaced, cell-left-aligned samples over [x_min,x_max) × [y_min,y_max) × [0,2π).
struct GridSpec {
  int nx = 50;
  int ny = 50;
  int ntheta = 32;
  double x_min = -0.5;
  double x_max = 0.5;
  double y_min = -0.5;
  double y_max = 0.5;

  GridSpec() = default;
  GridSpec(int nx_, int ny_, int nt_, double x0, double x1, double y0, double y1)
      : nx(nx_), ny(ny_), ntheta(nt_), x_min(x0), x_max(x1), y_min(y0), y_max(y1) {}

  // Throws std::invalid_argument on counts < 2 or inverted bounds.
  void validate() const;

  double dx() const { return (x_max - x_min) / nx; }
  double dy() const { return (y_max - y_min) / ny; }
  double dtheta() const { return kTwoPi / ntheta; }
  double weight() const { return dx() * dy() * dtheta(); }
  double total_measure() const { return (x_max - x_min) * (y_max - y_min) * kTwoPi; }
  std::size_t size() const { return static_cast<std::size_t>(nx) * ny * ntheta; }

  double x(int ix) const { return x_min + ix * dx(); }
  double y(int iy) const { return y_min + iy * dy(); }
  double theta(int it) const { return it * dtheta(); }

  std::size_t index(int ix, int iy, int it) const {
    return (static_cast<std::size_t>(ix) * ny + iy) * ntheta + it;
  }
  Pose pose(std::size_t idx) const;

  // Nearest sample; x and y clamp to the grid, theta wraps.
  std::size_t nearest_index(const Pose& p) const;

  bool operator==(const GridSpec& o) const = default;
};

void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);

struct PoseGrid {
  std::vector<Pose> poses;
  double weight = 0.0;
};

PoseGrid make_grid(const GridSpec& spec);

class DensityGrid {
 public:
  DensityGrid() = default;
  explicit DensityGrid(const GridSpec& spec, double fill = 0.0);
  DensityGrid(const GridSpec& spec, std::vector<double> values);

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(int ix, int iy, int it) { return values_[spec_.index(ix, iy, it)]; }
  double at(int ix, int iy, int it) const { return values_[spec_.index(ix, iy, it)]; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  // w·Σ values
  double integral() const;
  double max() const;

  // Scales to unit integral and sets the normalized flag. Throws if the integral is not positive.
  void normalize();
  bool normalized() const { return normalized_; }
  void set_normalized(bool v) { normalized_ = v; }

 private:
  GridSpec spec_;
  std::vector<double> values_;
  bool normalized_ = false;
};

// w·Σ |a − b|
double l1_distance(const DensityGrid& a, const DensityGrid& b);
// ½·w·Σ |a − b|
double total_variation(const DensityGrid& a, const DensityGrid& b);
double max_abs_diff(const DensityGrid& a, const DensityGrid& b);

}  // namespace hef
