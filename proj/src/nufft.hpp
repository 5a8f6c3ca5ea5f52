#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "fft.hpp"

namespace hef::detail {

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

// 2-D non-uniform FFT between an n1×n2 block of integer modes and arbitrary
// points q = (q1, q2). Modes run over j ∈ [−⌊n/2⌋, ⌈n/2⌉) per axis, stored
// row-major with axis 1 slowest. Spreading uses the exponential-of-semicircle
// kernel on a 2× oversampled periodic grid.
class Nufft2d {
 public:
  Nufft2d(int n1, int n2, std::vector<double> q1, std::vector<double> q2, double tol = 1e-12);

  int n1() const { return n1_; }
  int n2() const { return n2_; }
  std::size_t n_points() const { return q1_.size(); }

  // values[k] = Σ_j modes[j]·exp(+i(j1·q1_k + j2·q2_k))
  void forward(const cplx* modes, cplx* values) const;
  // modes[j] = Σ_k values[k]·exp(−i(j1·q1_k + j2·q2_k))
  void adjoint(const cplx* values, cplx* modes) const;

 private:
  void precompute_axis(int n, int m, const std::vector<double>& q, std::vector<int>& idx,
                       std::vector<double>& ker, std::vector<double>& corr) const;
  double kernel(double z) const;

  int n1_, n2_, m1_, m2_, w_;
  double beta_;
  std::vector<double> q1_, q2_;
  std::vector<int> idx1_, idx2_;      // wrapped fine-grid indices, w per point
  std::vector<int> start2_;           // first axis-2 index per point, in [0, m2)
  std::vector<double> ker1_, ker2_;   // kernel values, w per point
  std::vector<double> corr1_, corr2_; // deapodization per mode (includes grid spacing)
  std::unique_ptr<FftPlan> fwd_, bwd_;
};

}  // namespace hef::detail
