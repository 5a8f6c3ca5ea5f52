#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "hef/harmonic_distribution.hpp"
#include "hef/measurement.hpp"

namespace hef {

struct DiffDriveModel {
  double sigma_trans = 0.01;  // per-step std of the body-frame translation
  double sigma_rot = 0.05;    // per-step std of the heading change
  void validate() const;
};

// Commanded relative motion u_t in the body frame.
struct ControlInput {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
  void validate() const;
  Pose as_pose() const { return Pose(dx, dy, dtheta); }
};

// Gaussian in the (x, y, θ) coordinates of the relative pose:
// log p(g) = −‖t(g) − t(u)‖²/(2σ_t²) − angdiff(θ(g), θ(u))²/(2σ_r²), floored.
// Throws std::invalid_argument when t(u) ± 3σ_t leaves the grid.
DensityGrid motion_log_density(const DiffDriveModel& model, const ControlInput& u, const GridSpec& grid);
HarmonicExpDist motion_density(const DiffDriveModel& model, const ControlInput& u, TransformPtr tr);

// bel ∗ p_u, i.e. spectrum F[p_u]·F[bel].
HarmonicExpDist predict(const HarmonicExpDist& bel_prev, const HarmonicExpDist& motion);

// η_out = analyze(log_lik) + η_pred with the normalizer recomputed.
HarmonicExpDist update(const HarmonicExpDist& bel_pred, const DensityGrid& log_lik);

// Sum of the measurements' log-likelihood fields (one analysis per step).
// Measurements without a landmark id are associated greedily against `belief`.
DensityGrid combined_loglik(const LandmarkMap& map, const std::vector<Measurement>& zs, const HarmonicExpDist& belief);

HarmonicExpDist step(const HarmonicExpDist& bel_prev, const DiffDriveModel& model, const ControlInput& u,
                     const std::vector<Measurement>& zs, const LandmarkMap& map);

struct StepDiagnostics {
  int t = 0;
  Pose mode;
  PoseEstimate mean;
  double log_z = 0.0;
  double entropy = 0.0;
  std::optional<double> nll_gt;
};

nlohmann::json to_json(const StepDiagnostics& d);

// −w·Σ p·log p
double entropy(const DensityGrid& density);

class HarmonicFilter {
 public:
  HarmonicFilter(TransformPtr tr, DiffDriveModel model, HarmonicExpDist prior);

  const HarmonicExpDist& belief() const { return bel_; }
  const DiffDriveModel& model() const { return model_; }

  // Predict with u, then fold all measurements into one update. When a
  // ground-truth pose is given, the diagnostics carry −log bel(gt) at its
  // nearest grid sample.
  StepDiagnostics step(const ControlInput& u, const std::vector<Measurement>& zs, const LandmarkMap& map,
                       const std::optional<Pose>& gt = std::nullopt);

 private:
  TransformPtr tr_;
  DiffDriveModel model_;
  HarmonicExpDist bel_;
  int t_ = 0;
};

}  // namespace hef
