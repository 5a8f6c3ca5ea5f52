#pragma once

#include <complex>
#include <vector>

namespace hef {

struct S1Spectrum {
  int band_limit = 0;
  std::vector<std::complex<double>> coeffs;  // λ = −B..B

  std::complex<double>& operator[](int lambda) { return coeffs[lambda + band_limit]; }
  std::complex<double> operator[](int lambda) const { return coeffs[lambda + band_limit]; }
};

// coeff(λ) = (2π/N)·Σ_k f(θ_k)·exp(−iλθ_k) with θ_k = 2πk/N.
// Throws std::invalid_argument when N < 2B+1.
S1Spectrum s1_analyze(const std::vector<double>& samples, int band_limit);

// f(θ) = (1/2π)·Σ_λ coeff(λ)·exp(iλθ). Returns the real part; throws if the
// imaginary residue exceeds 1e-9·max|f| (non-Hermitian spectrum).
std::vector<double> s1_synthesize(const S1Spectrum& spec, const std::vector<double>& points);

// Equispaced points 2πk/N, k = 0..N−1.
std::vector<double> s1_grid(int n);

}  // namespace hef
