#include "hef/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hef {

void GridSpec::validate() const {
  if (nx < 2 || ny < 2 || ntheta < 2) {
    throw std::invalid_argument("grid: nx, ny, ntheta must all be >= 2 (got " + std::to_string(nx) +
                                ", " + std::to_string(ny) + ", " + std::to_string(ntheta) + ")");
  }
  if (!(x_max > x_min) || !(y_max > y_min) || !std::isfinite(x_min) || !std::isfinite(x_max) ||
      !std::isfinite(y_min) || !std::isfinite(y_max)) {
    throw std::invalid_argument("grid: bounds must be finite with x_max > x_min and y_max > y_min");
  }
}

Pose GridSpec::pose(std::size_t idx) const {
  const int it = static_cast<int>(idx % ntheta);
  const std::size_t rest = idx / ntheta;
  const int iy = static_cast<int>(rest % ny);
  const int ix = static_cast<int>(rest / ny);
  return Pose(x(ix), y(iy), theta(it));
}

std::size_t GridSpec::nearest_index(const Pose& p) const {
  const int ix = std::clamp(static_cast<int>(std::lround((p.x - x_min) / dx())), 0, nx - 1);
  const int iy = std::clamp(static_cast<int>(std::lround((p.y - y_min) / dy())), 0, ny - 1);
  int it = static_cast<int>(std::lround(p.theta / dtheta())) % ntheta;
  if (it < 0) it += ntheta;
  return index(ix, iy, it);
}

void to_json(nlohmann::json& j, const GridSpec& g) {
  j = nlohmann::json{{"nx", g.nx},
                     {"ny", g.ny},
                     {"ntheta", g.ntheta},
                     {"bounds", {g.x_min, g.x_max, g.y_min, g.y_max}}};
}

void from_json(const nlohmann::json& j, GridSpec& g) {
  if (!j.is_object()) throw std::invalid_argument("grid: expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k != "nx" && k != "ny" && k != "ntheta" && k != "bounds") {
      throw std::invalid_argument("grid: unknown field '" + k + "'");
    }
  }
  GridSpec out;
  if (j.contains("nx")) out.nx = j.at("nx").get<int>();
  if (j.contains("ny")) out.ny = j.at("ny").get<int>();
  if (j.contains("ntheta")) out.ntheta = j.at("ntheta").get<int>();
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    if (!b.is_array() || b.size() != 4) {
      throw std::invalid_argument("grid.bounds: expected [x_min, x_max, y_min, y_max]");
    }
    out.x_min = b[0].get<double>();
    out.x_max = b[1].get<double>();
    out.y_min = b[2].get<double>();
    out.y_max = b[3].get<double>();
  }
  out.validate();
  g = out;
}

PoseGrid make_grid(const GridSpec& spec) {
  spec.validate();
  PoseGrid out;
  out.weight = spec.weight();
  out.poses.reserve(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) out.poses.push_back(spec.pose(i));
  return out;
}

DensityGrid::DensityGrid(const GridSpec& spec, double fill) : spec_(spec), values_(spec.size(), fill) {
  spec.validate();
}

DensityGrid::DensityGrid(const GridSpec& spec, std::vector<double> values)
    : spec_(spec), values_(std::move(values)) {
  spec.validate();
  if (values_.size() != spec.size()) {
    throw std::invalid_argument("DensityGrid: value count " + std::to_string(values_.size()) +
                                " does not match grid size " + std::to_string(spec.size()));
  }
}

double DensityGrid::integral() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s * spec_.weight();
}

double DensityGrid::max() const { return *std::max_element(values_.begin(), values_.end()); }

void DensityGrid::normalize() {
  const double z = integral();
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw std::runtime_error("DensityGrid: cannot normalize a grid with integral " + std::to_string(z));
  }
  for (double& v : values_) v /= z;
  normalized_ = true;
}

static void check_same(const DensityGrid& a, const DensityGrid& b) {
  if (!(a.spec() == b.spec())) throw std::invalid_argument("density grids live on different grids");
}

double l1_distance(const DensityGrid& a, const DensityGrid& b) {
  check_same(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s * a.spec().weight();
}

double total_variation(const DensityGrid& a, const DensityGrid& b) { return 0.5 * l1_distance(a, b); }

double max_abs_diff(const DensityGrid& a, const DensityGrid& b) {
  check_same(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace hef
