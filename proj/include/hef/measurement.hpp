#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hef/grid.hpp"
#include "hef/harmonic_distribution.hpp"

namespace hef {

// log of the relative likelihood floor (1e-12); masked or hopeless poses get this value.
inline const double kLogFloor = std::log(kDensityFloor);

struct Landmark {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
};

struct LandmarkMap {
  std::vector<Landmark> landmarks;
  // Optional free-space mask over the (x, y) plane, row-major (ix, iy).
  std::vector<std::uint8_t> free_space;
  int mask_nx = 0;
  int mask_ny = 0;

  bool has_mask() const { return !free_space.empty(); }
  // Throws std::invalid_argument for an unknown id.
  const Landmark& find(int id) const;
  // Unique ids, consistent mask shape.
  void validate() const;
};

enum class MeasurementKind { Range, Bearing };

struct Measurement {
  MeasurementKind kind = MeasurementKind::Range;
  double value = 0.0;  // map units for range, radians in (−π, π] for bearing
  std::optional<int> landmark_id;
  double sigma = 0.05;
};

// Map JSON: {"landmarks": [{"id", "x", "y"}], "mask"?: "path/to/mask.bin"}.
// Relative mask paths resolve against `base_dir`.
LandmarkMap map_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
nlohmann::json map_to_json(const LandmarkMap& map);
LandmarkMap load_map(const std::string& path);

// Pointwise log-likelihood of z at pose, floored at kLogFloor. Bearing
// measurements evaluate to kLogFloor at masked poses when `grid` is given.
double loglik_at(const LandmarkMap& map, const Measurement& z, const Pose& pose, const GridSpec* grid = nullptr);

// −(‖t − L‖ − z)²/(2σ²), constant in θ.
DensityGrid range_loglik(const LandmarkMap& map, const Measurement& z, const GridSpec& grid);

// −angdiff(atan2(L − t) − θ, z)²/(2σ²). `degenerate` reports an all-false mask.
DensityGrid bearing_loglik(const LandmarkMap& map, const Measurement& z, const GridSpec& grid,
                           bool* degenerate = nullptr);

// Dispatches on z.kind; requires a resolved landmark id.
DensityGrid measurement_loglik(const LandmarkMap& map, const Measurement& z, const GridSpec& grid);

// Landmark maximizing the expected likelihood w·Σ bel·exp(loglik_L) under
// the belief; ties (within 1e-12 relative) go to the lowest id.
int associate_greedy(const LandmarkMap& map, const Measurement& z, const DensityGrid& belief);
int associate_greedy(const LandmarkMap& map, const Measurement& z, const HarmonicExpDist& belief);

}  // namespace hef
