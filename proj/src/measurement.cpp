#include "hef/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "hef/binary_io.hpp"

namespace hef {

const Landmark& LandmarkMap::find(int id) const {
  for (const auto& l : landmarks) {
    if (l.id == id) return l;
  }
  throw std::invalid_argument("unknown landmark id " + std::to_string(id));
}

void LandmarkMap::validate() const {
  std::set<int> ids;
  for (const auto& l : landmarks) {
    if (!ids.insert(l.id).second) throw std::invalid_argument("map: duplicate landmark id " + std::to_string(l.id));
    if (!std::isfinite(l.x) || !std::isfinite(l.y)) {
      throw std::invalid_argument("map: landmark " + std::to_string(l.id) + " has non-finite coordinates");
    }
  }
  if (has_mask() && free_space.size() != static_cast<std::size_t>(mask_nx) * mask_ny) {
    throw std::invalid_argument("map: mask size does not match its shape");
  }
}

LandmarkMap map_from_json(const nlohmann::json& j, const std::string& base_dir) {
  LandmarkMap m;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "landmarks" && it.key() != "mask") {
      throw std::invalid_argument("map: unknown field '" + it.key() + "'");
    }
  }
  for (const auto& l : j.at("landmarks")) {
    m.landmarks.push_back({l.at("id").get<int>(), l.at("x").get<double>(), l.at("y").get<double>()});
  }
  if (j.contains("mask")) {
    std::filesystem::path p = j.at("mask").get<std::string>();
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    const Hef1Array a = read_hef1(p.string());
    if (a.is_complex || a.dims.size() != 2) throw std::invalid_argument("map: mask must be a real 2-D array");
    m.mask_nx = static_cast<int>(a.dims[0]);
    m.mask_ny = static_cast<int>(a.dims[1]);
    m.free_space.resize(a.data.size());
    for (std::size_t i = 0; i < a.data.size(); ++i) m.free_space[i] = a.data[i] != 0.0 ? 1 : 0;
  }
  m.validate();
  return m;
}

nlohmann::json map_to_json(const LandmarkMap& map) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : map.landmarks) arr.push_back({{"id", l.id}, {"x", l.x}, {"y", l.y}});
  return {{"landmarks", arr}};
}

LandmarkMap load_map(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open map file " + path);
  const auto j = nlohmann::json::parse(f);
  return map_from_json(j, std::filesystem::path(path).parent_path().string());
}

namespace {

const Landmark& resolved(const LandmarkMap& map, const Measurement& z) {
  if (!z.landmark_id) throw std::invalid_argument("measurement has no landmark correspondence");
  return map.find(*z.landmark_id);
}

void check_mask(const LandmarkMap& map, const GridSpec& grid) {
  if (map.has_mask() && (map.mask_nx != grid.nx || map.mask_ny != grid.ny)) {
    throw std::invalid_argument("map mask shape does not match the pose grid");
  }
}

double range_term(const Landmark& l, const Measurement& z, double x, double y) {
  const double e = std::hypot(x - l.x, y - l.y) - z.value;
  return std::max(-e * e / (2.0 * z.sigma * z.sigma), kLogFloor);
}

double bearing_term(const Landmark& l, const Measurement& z, double x, double y, double theta) {
  const double e = angdiff(std::atan2(l.y - y, l.x - x) - theta, z.value);
  return std::max(-e * e / (2.0 * z.sigma * z.sigma), kLogFloor);
}

}  // namespace

double loglik_at(const LandmarkMap& map, const Measurement& z, const Pose& pose, const GridSpec* grid) {
  const Landmark& l = resolved(map, z);
  if (z.kind == MeasurementKind::Range) return range_term(l, z, pose.x, pose.y);
  if (grid && map.has_mask()) {
    check_mask(map, *grid);
    const std::size_t idx = grid->nearest_index(pose) / grid->ntheta;
    if (!map.free_space[idx]) return kLogFloor;
  }
  return bearing_term(l, z, pose.x, pose.y, pose.theta);
}

DensityGrid range_loglik(const LandmarkMap& map, const Measurement& z, const GridSpec& grid) {
  if (z.kind != MeasurementKind::Range) throw std::invalid_argument("range_loglik: not a range measurement");
  const Landmark& l = resolved(map, z);
  DensityGrid out(grid);
  for (int ix = 0; ix < grid.nx; ++ix) {
    for (int iy = 0; iy < grid.ny; ++iy) {
      const double v = range_term(l, z, grid.x(ix), grid.y(iy));
      for (int it = 0; it < grid.ntheta; ++it) out.at(ix, iy, it) = v;
    }
  }
  return out;
}

DensityGrid bearing_loglik(const LandmarkMap& map, const Measurement& z, const GridSpec& grid, bool* degenerate) {
  if (z.kind != MeasurementKind::Bearing) throw std::invalid_argument("bearing_loglik: not a bearing measurement");
  const Landmark& l = resolved(map, z);
  check_mask(map, grid);
  DensityGrid out(grid);
  bool any_free = !map.has_mask();
  for (int ix = 0; ix < grid.nx; ++ix) {
    for (int iy = 0; iy < grid.ny; ++iy) {
      const bool free = !map.has_mask() || map.free_space[static_cast<std::size_t>(ix) * grid.ny + iy];
      any_free = any_free || free;
      for (int it = 0; it < grid.ntheta; ++it) {
        out.at(ix, iy, it) = free ? bearing_term(l, z, grid.x(ix), grid.y(iy), grid.theta(it)) : kLogFloor;
      }
    }
  }
  if (degenerate) *degenerate = !any_free;
  return out;
}

DensityGrid measurement_loglik(const LandmarkMap& map, const Measurement& z, const GridSpec& grid) {
  return z.kind == MeasurementKind::Range ? range_loglik(map, z, grid) : bearing_loglik(map, z, grid);
}

int associate_greedy(const LandmarkMap& map, const Measurement& z, const DensityGrid& belief) {
  if (map.landmarks.empty()) throw std::invalid_argument("associate_greedy: empty map");
  std::vector<Landmark> order = map.landmarks;
  std::sort(order.begin(), order.end(), [](const Landmark& a, const Landmark& b) { return a.id < b.id; });
  int best_id = order.front().id;
  double best = -1.0;
  for (const auto& l : order) {
    Measurement zl = z;
    zl.landmark_id = l.id;
    const DensityGrid ll = measurement_loglik(map, zl, belief.spec());
    double s = 0.0;
    for (std::size_t i = 0; i < ll.size(); ++i) s += belief[i] * std::exp(ll[i]);
    s *= belief.spec().weight();
    if (s > best * (1.0 + 1e-12)) {
      best = s;
      best_id = l.id;
    }
  }
  return best_id;
}

int associate_greedy(const LandmarkMap& map, const Measurement& z, const HarmonicExpDist& belief) {
  return associate_greedy(map, z, belief.evaluate());
}

}  // namespace hef
