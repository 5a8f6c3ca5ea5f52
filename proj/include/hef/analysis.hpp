#pragma once

#include <string>
#include <vector>

#include "hef/grid.hpp"
#include "hef/se2_fourier.hpp"

namespace hef {

// Modified Bessel function of the first kind, order 0.
double bessel_i0(double x);
// exp(−|x|)·I0(x), finite for large arguments.
double bessel_i0e(double x);

struct VonMises {
  double mu = 0.0;
  double kappa = 1.0;
  double weight = 1.0;
};

struct VonMisesMixture {
  std::vector<VonMises> components;
  void validate() const;  // κ ≥ 0 and finite, weights ≥ 0 summing to 1 within 1e-12
};

// Σ w_i·exp(κ_i cos(θ − μ_i)) / (2π I0(κ_i))
std::vector<double> vm_mixture_density(const VonMisesMixture& mix, const std::vector<double>& theta);

// Equal-weight pair at μ = −π/4 and π/2 sharing κ.
VonMisesMixture default_mixture(double kappa);

struct FidelityRow {
  std::string method;  // "hed" or "hist"
  int params = 0;
  double kappa = 0.0;
  double kl = 0.0;
};

// For each P: a P-bin histogram (bin averages, renormalized) and an HED fit
// with band ⌊(P−1)/2⌋ from the log-density's coefficients; D_KL(truth ‖ fit)
// by quadrature on `fine` equispaced points.
std::vector<FidelityRow> fidelity_sweep(const std::vector<int>& params, const std::vector<double>& kappas,
                                        int fine = 4096);

// Fitted densities on the fine grid, exposed for tests.
std::vector<double> histogram_fit(const std::vector<double>& truth, int bins);
std::vector<double> hed_fit(const std::vector<double>& truth, int params);

struct BenchRow {
  std::string method;  // "direct" or "spectral"
  int nx = 0, ny = 0, ntheta = 0;
  double seconds = 0.0;
  double max_abs_err = 0.0;
};

// Pad rule used by the benchmark: 2 while the box has ≤ 20 samples per axis.
int bench_pad(int n);

// Benchmark densities: a is a Gaussian bump (σ = 1.5 cells) with heading
// profile 1 + 0.3 cos θ; b is the analytic bump (σ = 1.1 cells) with profile
// 1 + 0.3 sin θ. Both are centred at the origin.
DensityGrid bench_density_a(const GridSpec& g);
double bench_density_b(const GridSpec& g, const Pose& p);

// Median wall time over `reps` after one untimed run per method. Throws
// std::runtime_error when the two results differ by more than `gate`.
std::vector<BenchRow> bench_convolution(const std::vector<int>& sizes, int ntheta = 8, int reps = 3,
                                        double gate = 1e-5);

}  // namespace hef
