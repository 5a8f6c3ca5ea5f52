#include "hef/hef_filter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hef {

void DiffDriveModel::validate() const {
  if (!(sigma_trans > 0.0) || !(sigma_rot > 0.0) || !std::isfinite(sigma_trans) || !std::isfinite(sigma_rot)) {
    throw std::invalid_argument("motion model: sigma_trans and sigma_rot must be positive and finite");
  }
}

void ControlInput::validate() const {
  if (!std::isfinite(dx) || !std::isfinite(dy) || !std::isfinite(dtheta)) {
    throw std::invalid_argument("control input must be finite");
  }
}

DensityGrid motion_log_density(const DiffDriveModel& model, const ControlInput& u, const GridSpec& grid) {
  model.validate();
  u.validate();
  const double m = 3.0 * model.sigma_trans;
  if (u.dx - m < grid.x_min || u.dx + m > grid.x(grid.nx - 1) || u.dy - m < grid.y_min ||
      u.dy + m > grid.y(grid.ny - 1)) {
    throw std::invalid_argument("motion model: commanded motion plus 3 sigma leaves the grid");
  }
  DensityGrid out(grid);
  const double it2 = 1.0 / (2.0 * model.sigma_trans * model.sigma_trans);
  const double ir2 = 1.0 / (2.0 * model.sigma_rot * model.sigma_rot);
  std::vector<double> th(grid.ntheta);
  for (int it = 0; it < grid.ntheta; ++it) {
    const double e = angdiff(grid.theta(it), u.dtheta);
    th[it] = -e * e * ir2;
  }
  for (int ix = 0; ix < grid.nx; ++ix) {
    const double ex = grid.x(ix) - u.dx;
    for (int iy = 0; iy < grid.ny; ++iy) {
      const double ey = grid.y(iy) - u.dy;
      const double sp = -(ex * ex + ey * ey) * it2;
      for (int it = 0; it < grid.ntheta; ++it) out.at(ix, iy, it) = sp + th[it];
    }
  }
  const double mx = out.max();
  for (auto& v : out.values()) v = std::max(v, mx + kLogFloor);
  return out;
}

HarmonicExpDist motion_density(const DiffDriveModel& model, const ControlInput& u, TransformPtr tr) {
  return fit_from_log_density(tr, motion_log_density(model, u, tr->grid()));
}

HarmonicExpDist predict(const HarmonicExpDist& bel_prev, const HarmonicExpDist& motion) {
  return convolve(bel_prev, motion);
}

HarmonicExpDist update(const HarmonicExpDist& bel_pred, const DensityGrid& log_lik) {
  return product(bel_pred, fit_from_log_density(bel_pred.transform(), log_lik));
}

DensityGrid combined_loglik(const LandmarkMap& map, const std::vector<Measurement>& zs,
                            const HarmonicExpDist& belief) {
  DensityGrid sum(belief.grid(), 0.0);
  std::optional<DensityGrid> density;
  for (const auto& z : zs) {
    Measurement zr = z;
    if (!zr.landmark_id) {
      if (!density) density = belief.evaluate();
      zr.landmark_id = associate_greedy(map, zr, *density);
    }
    const DensityGrid ll = measurement_loglik(map, zr, belief.grid());
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += ll[i];
  }
  return sum;
}

HarmonicExpDist step(const HarmonicExpDist& bel_prev, const DiffDriveModel& model, const ControlInput& u,
                     const std::vector<Measurement>& zs, const LandmarkMap& map) {
  HarmonicExpDist pred = predict(bel_prev, motion_density(model, u, bel_prev.transform()));
  if (zs.empty()) return pred;
  return update(pred, combined_loglik(map, zs, pred));
}

double entropy(const DensityGrid& density) {
  double s = 0.0;
  for (double p : density.values()) {
    if (p > 0.0) s -= p * std::log(p);
  }
  return s * density.spec().weight();
}

nlohmann::json to_json(const StepDiagnostics& d) {
  auto pose = [](const Pose& p) { return nlohmann::json{{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; };
  nlohmann::json j{{"t", d.t},
                   {"mode", pose(d.mode)},
                   {"mean", pose(d.mean.pose)},
                   {"orientation_defined", d.mean.orientation_defined},
                   {"log_z", d.log_z},
                   {"entropy", d.entropy}};
  if (d.nll_gt) j["nll_gt"] = *d.nll_gt;
  return j;
}

HarmonicFilter::HarmonicFilter(TransformPtr tr, DiffDriveModel model, HarmonicExpDist prior)
    : tr_(std::move(tr)), model_(model), bel_(std::move(prior)) {
  model_.validate();
}

StepDiagnostics HarmonicFilter::step(const ControlInput& u, const std::vector<Measurement>& zs,
                                     const LandmarkMap& map, const std::optional<Pose>& gt) {
  bel_ = hef::step(bel_, model_, u, zs, map);
  ++t_;
  StepDiagnostics d;
  d.t = t_;
  const DensityGrid p = bel_.evaluate();
  d.mode = bel_.grid().pose(mode_index(bel_.log_phi()));
  d.mean = mean_pose(p);
  d.log_z = bel_.log_z();
  d.entropy = entropy(p);
  if (gt) d.nll_gt = -std::log(std::max(p[p.spec().nearest_index(*gt)], kDensityFloor));
  return d;
}

}  // namespace hef
