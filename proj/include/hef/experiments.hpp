#pragma once

#include <array>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "hef/baselines.hpp"
#include "hef/grid.hpp"
#include "hef/hef_filter.hpp"
#include "hef/measurement.hpp"

namespace hef {

// Affine map from the dataset's map region into the grid box, keeping a
// margin (fraction of the box on each side) free of mass.
struct MapTransform {
  double scale = 1.0;
  double map_cx = 0.0, map_cy = 0.0;
  double grid_cx = 0.0, grid_cy = 0.0;

  static MapTransform fit(const std::array<double, 4>& region, const GridSpec& grid, double margin = 0.1);

  Pose to_grid(const Pose& p) const;
  Pose to_map(const Pose& p) const;
  LandmarkMap to_grid(const LandmarkMap& m) const;
  ControlInput to_grid(const ControlInput& u) const;
  Measurement to_grid(const Measurement& z) const;
};

// Initial belief. Gaussian: independent normals on x, y, θ (θ wrapped).
// Rect: uniform over [x0, x1] × [y0, y1] × [θ0, θ1].
struct PriorSpec {
  enum class Kind { Gaussian, Rect };
  Kind kind = Kind::Gaussian;
  Pose mean;
  double sigma_xy = 0.05;
  double sigma_theta = 0.3;
  std::array<double, 6> rect{};  // x0, x1, y0, y1, θ0, θ1

  void validate() const;
  PriorSpec to_grid(const MapTransform& mt) const;

  // Grid density. Rect priors integrate the indicator over each sample's
  // cell, so partially covered cells get fractional values.
  DensityGrid density(const GridSpec& grid) const;
  std::vector<Pose> sample(std::mt19937_64& rng, std::size_t n) const;
  // Moment-matched Gaussian.
  GaussianBelief gaussian() const;
};

nlohmann::json to_json(const PriorSpec& p);
PriorSpec prior_from_json(const nlohmann::json& j);

struct DatasetStep {
  int t = 0;
  ControlInput u;
  std::vector<Measurement> z;
  Pose gt;
};

// Map and poses are in map units; `region` is the map area rescaled into the grid.
struct Dataset {
  LandmarkMap map;
  GridSpec grid;
  std::array<double, 4> region{-0.5, 0.5, -0.5, 0.5};
  PriorSpec prior;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<DatasetStep> steps;

  MapTransform transform() const { return MapTransform::fit(region, grid); }
  void validate() const;
};

// JSON-lines: a header object {"format", "grid", "region", "map", "prior", "meta"}
// followed by one {"t", "u", "z", "gt"} object per step.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);
std::string dataset_to_string(const Dataset& d);
Dataset dataset_from_string(const std::string& text, const std::string& source = "<string>");

struct SimConfig {
  int n_landmarks = 10;
  int n_steps = 100;
  int steps_per_loop = 100;
  double radius = 0.35;
  double landmark_half_span = 0.25;  // landmarks on [−span, span] × {0}
  double odom_sigma_trans = 0.005;
  double odom_sigma_rot = 0.02;
  double range_sigma = 0.05;
  double prior_sigma_xy = 0.15;
  double prior_sigma_theta = 3.14159;  // heading effectively unknown
  GridSpec grid;
  std::array<double, 4> region{-0.5, 0.5, -0.5, 0.5};

  void validate() const;
};

nlohmann::json to_json(const SimConfig& c);
SimConfig sim_config_from_json(const nlohmann::json& j);

// Counterclockwise circle around the origin starting at (0, −R) facing +x.
// The robot moves along the exact circle; reported controls carry Gaussian
// odometry noise; landmark (t−1) mod n ranges the robot at step t. The prior
// is centred on a draw from N(start, prior sigmas).
Dataset simulate_range_world(const SimConfig& cfg, std::uint64_t seed);

struct BananaConfig {
  int n_steps = 5;
  double step = 0.1;
  double sigma_trans = 0.03;
  double sigma_rot = 0.2;
  std::array<double, 6> prior_rect{-0.4, -0.3, -0.05, 0.05, 0.0, 0.0};  // θ range set from the grid when equal
  GridSpec grid;
  std::array<double, 4> region{-0.5, 0.5, -0.5, 0.5};
};

Dataset banana_scenario(const BananaConfig& cfg);

enum class FilterKind { HEF, EKF, HistF, PF };
const char* filter_name(FilterKind k);
FilterKind parse_filter(const std::string& s);

struct FilterParams {
  double sigma_trans = 0.02;  // map units
  double sigma_rot = 0.15;
  std::size_t n_particles = 80000;
  TransformOptions transform;
};

nlohmann::json to_json(const FilterParams& p);
FilterParams filter_params_from_json(const nlohmann::json& j);

struct StepRecord {
  int t = 0;
  Pose mode;  // map units
  Pose mean;  // map units
  Pose gt;
  double density_at_gt = 0.0;  // grid units, nearest sample
  std::optional<double> log_z;
  std::optional<double> entropy;
  bool flagged = false;  // PF degenerate reset
};

nlohmann::json to_json(const StepRecord& r);

struct MetricsReport {
  double ate_mode = 0.0, ate_mode_std = 0.0;
  double ate_mean = 0.0, ate_mean_std = 0.0;
  double nll = 0.0;
};

// ATE in map units; NLL = −mean log max(bel(gt), 1e-12) with bel in grid units.
MetricsReport compute_metrics(const std::vector<StepRecord>& records, const Dataset& d);
double nll_term(double density_at_gt);

struct RunResult {
  std::vector<StepRecord> records;
  MetricsReport metrics;
};

// Called with t = 0 for the prior and t = 1..T after each step.
using BeliefSink = std::function<void(int t, const DensityGrid& belief)>;

// Runs one filter over a dataset. The transform may be shared across runs on
// the same grid; it is built when null.
RunResult run_filter(FilterKind kind, const Dataset& d, const FilterParams& p, std::uint64_t seed,
                     TransformPtr tr = nullptr, const BeliefSink& sink = nullptr);

// Monte Carlo reference: n prior samples pushed through every control with
// the grid-unit model, binned like the particle filter.
DensityGrid particle_oracle(const Dataset& d, const DiffDriveModel& grid_model, std::size_t n, std::uint64_t seed);

}  // namespace hef
