#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Core>

#include "hef/grid.hpp"
#include "hef/se2_fourier.hpp"

namespace hef {

// Relative floor applied to densities before taking logs.
inline constexpr double kDensityFloor = 1e-12;

using TransformPtr = std::shared_ptr<const Se2Fourier>;

// p(g) = exp(η·T(g)) / Z on the transform's grid.
//
// The object keeps the synthesized log-density ln φ = F⁻¹[η] on the grid
// alongside η. Because synthesis inverts analysis exactly on grid functions,
// either one determines the other; η is computed from ln φ on first access.
class HarmonicExpDist {
 public:
  HarmonicExpDist() = default;

  const TransformPtr& transform() const { return tr_; }
  const GridSpec& grid() const { return log_phi_.spec(); }
  const DensityGrid& log_phi() const { return log_phi_; }
  double log_z() const { return log_z_; }

  // Natural parameters, LOG_SPACE.
  const Se2Spectrum& eta() const;

  // Normalized density samples.
  DensityGrid evaluate() const;

  friend HarmonicExpDist fit_from_log_density(TransformPtr tr, const DensityGrid& log_f);
  friend HarmonicExpDist from_natural_parameters(TransformPtr tr, Se2Spectrum eta);
  friend HarmonicExpDist product(const HarmonicExpDist& a, const HarmonicExpDist& b);

 private:
  struct Cache;
  HarmonicExpDist(TransformPtr tr, DensityGrid log_phi);

  TransformPtr tr_;
  DensityGrid log_phi_;
  double log_z_ = 0.0;
  std::shared_ptr<Cache> cache_;
};

// η = analyze(log_f), log Z = log(w·Σ exp(ln φ − c)) + c with c = max ln φ.
// Throws std::invalid_argument on non-finite samples.
HarmonicExpDist fit_from_log_density(TransformPtr tr, const DensityGrid& log_f);

// Builds a distribution from natural parameters by synthesizing ln φ.
HarmonicExpDist from_natural_parameters(TransformPtr tr, Se2Spectrum eta);

// η_a + η_b with the normalizer recomputed.
HarmonicExpDist product(const HarmonicExpDist& a, const HarmonicExpDist& b);

// Group convolution (a ∗ b)(g) = ∫ a(h)·b(h⁻¹∘g) dh via F[a ∗ b] = F[b]·F[a].
// The result is floored at kDensityFloor·max and re-fitted in log space.
HarmonicExpDist convolve(const HarmonicExpDist& a, const HarmonicExpDist& b);

// log of a density grid after flooring at kDensityFloor·max.
DensityGrid floored_log(const DensityGrid& density);

struct PoseEstimate {
  Pose pose;
  bool orientation_defined = true;
  double resultant_length = 0.0;  // |E[exp(iθ)]|
  Eigen::Matrix2d planar_cov = Eigen::Matrix2d::Zero();
};

// Grid-weighted position mean and circular mean of the heading. The heading
// is flagged undefined when the resultant length falls below 1e-6.
PoseEstimate mean_pose(const DensityGrid& density);
PoseEstimate mean_pose(const HarmonicExpDist& d);

// Expected IUR E[T(g)], i.e. the PROB_SPACE spectrum of the density.
Se2Spectrum expected_iur(const HarmonicExpDist& d);

// Grid sample with the largest density. Values within 1e-12 (in log units)
// of each other count as ties and resolve to the lowest row-major index.
std::size_t mode_index(const DensityGrid& values);
Pose mode_pose(const HarmonicExpDist& d);

// weight·Σ p·log(p / max(q, floor)) with floor = kDensityFloor·max q.
double kl_divergence(std::span<const double> p, std::span<const double> q, double weight);
double kl_divergence(const DensityGrid& p, const DensityGrid& q);

// Distribution files: `<prefix>.bin` holds η in HEF1 form, `<prefix>.json`
// the grid, transform options and log Z.
void save_distribution(const HarmonicExpDist& d, const std::string& prefix);
HarmonicExpDist load_distribution(const std::string& prefix);

}  // namespace hef
