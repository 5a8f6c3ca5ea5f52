#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "hef/grid.hpp"
#include "hef/hef_filter.hpp"
#include "hef/measurement.hpp"

namespace hef {

// ---- EKF ----

struct GaussianBelief {
  Pose mean;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
  void validate() const;  // symmetric within 1e-10, Cholesky succeeds
};

GaussianBelief ekf_predict(const GaussianBelief& bel, const DiffDriveModel& model, const ControlInput& u);
// Throws std::runtime_error on a singular innovation covariance.
GaussianBelief ekf_update(const GaussianBelief& bel, const LandmarkMap& map, const Measurement& z);
GaussianBelief ekf_step(const GaussianBelief& bel, const DiffDriveModel& model, const ControlInput& u,
                        const std::vector<Measurement>& zs, const LandmarkMap& map);

// Gaussian evaluated at the grid samples (heading residual wrapped) and
// normalized on the grid.
DensityGrid gaussian_on_grid(const GaussianBelief& bel, const GridSpec& grid);

// ---- histogram filter ----

// Planar convolution kernel: a Gaussian shift by R(heading)·t(u) in the world
// frame and dθ in heading, sampled on integer cell offsets out to 3σ.
struct HistKernel {
  std::vector<int> dix, diy, dit;
  std::vector<double> w;
};

HistKernel histf_kernel(const DiffDriveModel& model, const ControlInput& u, double heading, const GridSpec& grid);

// Convolves with the kernel built at the belief's circular-mean heading. θ
// wraps; mass shifted past the x/y edges is dropped and the rest renormalized.
DensityGrid histf_predict(const DensityGrid& bel, const DiffDriveModel& model, const ControlInput& u);
DensityGrid histf_update(const DensityGrid& bel, const DensityGrid& log_lik);
DensityGrid histf_step(const DensityGrid& bel, const DiffDriveModel& model, const ControlInput& u,
                       const std::vector<Measurement>& zs, const LandmarkMap& map);

// ---- particle filter ----

struct ParticleSet {
  std::vector<Pose> particles;
  std::vector<double> weights;
  bool degenerate_reset = false;  // last update had no informative weights
  Pose mode;                      // heaviest particle before resampling
  bool resampled = false;

  std::size_t size() const { return particles.size(); }
  void validate() const;
};

using Rng = std::mt19937_64;

ParticleSet pf_from_samples(std::vector<Pose> samples);
void pf_predict(ParticleSet& ps, const DiffDriveModel& model, const ControlInput& u, Rng& rng);
// Multiplies weights by the measurement likelihoods and records the mode.
void pf_weight(ParticleSet& ps, const std::vector<Measurement>& zs, const LandmarkMap& map,
               const GridSpec* grid = nullptr);
double effective_sample_size(const ParticleSet& ps);
void systematic_resample(ParticleSet& ps, Rng& rng);
// predict, weight, resample when ESS < N/2
void pf_step(ParticleSet& ps, const DiffDriveModel& model, const ControlInput& u, const std::vector<Measurement>& zs,
             const LandmarkMap& map, Rng& rng, const GridSpec* grid = nullptr);

Pose pf_mean(const ParticleSet& ps);
// Nearest-bin histogram density; particles outside the box are dropped and
// each bin gets +1e-12 before normalization.
DensityGrid pf_histogram(const ParticleSet& ps, const GridSpec& grid);

}  // namespace hef
