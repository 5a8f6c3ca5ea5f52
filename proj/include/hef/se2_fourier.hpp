#pragma once

#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include "hef/grid.hpp"

namespace hef {

namespace detail {
class Nufft2d;
class FftPlan;
class FftPlanMany;
class RealFftPlan2d;
}  // namespace detail

using cplx = std::complex<double>;

enum class SpectrumRole { LogSpace, ProbSpace };

const char* role_name(SpectrumRole r);

// Coefficients η(λ_r, m, n). m runs over ntheta values [−⌊nθ/2⌋, ⌈nθ/2⌉),
// n over n_psi values [−n_psi/2, n_psi/2). Rows with m outside that range
// follow from the shift rule η(m + nθ, n + nθ) = η(m, n).
class Se2Spectrum {
 public:
  Se2Spectrum() = default;
  Se2Spectrum(int n_lambda, int n_m, int n_n, SpectrumRole role);

  int n_lambda() const { return n_lambda_; }
  int n_m() const { return n_m_; }
  int n_n() const { return n_n_; }
  int m_min() const { return -(n_m_ / 2); }
  int n_min() const { return -(n_n_ / 2); }
  SpectrumRole role() const { return role_; }

  cplx& operator()(int r, int m, int n) { return data_[offset(r, m, n)]; }
  cplx operator()(int r, int m, int n) const { return data_[offset(r, m, n)]; }

  // Block for one radius: n_m rows (m ascending) × n_n columns (n ascending).
  cplx* block(int r) { return data_.data() + static_cast<std::size_t>(r) * n_m_ * n_n_; }
  const cplx* block(int r) const { return data_.data() + static_cast<std::size_t>(r) * n_m_ * n_n_; }

  std::vector<cplx>& data() { return data_; }
  const std::vector<cplx>& data() const { return data_; }

  bool same_shape(const Se2Spectrum& o) const {
    return n_lambda_ == o.n_lambda_ && n_m_ == o.n_m_ && n_n_ == o.n_n_;
  }

  Se2Spectrum& operator+=(const Se2Spectrum& o);
  Se2Spectrum& operator*=(double s);

 private:
  std::size_t offset(int r, int m, int n) const {
    return (static_cast<std::size_t>(r) * n_m_ + (m - m_min())) * n_n_ + (n - n_min());
  }

  int n_lambda_ = 0, n_m_ = 0, n_n_ = 0;
  SpectrumRole role_ = SpectrumRole::ProbSpace;
  std::vector<cplx> data_;
};

Se2Spectrum operator+(const Se2Spectrum& a, const Se2Spectrum& b);

struct TransformOptions {
  // Least-squares inversion runs on a grid `pad` times larger per axis and
  // crops the centre; use 2 when convolution results reach the box edge.
  int pad = 1;
  // Polar node spacing relative to the reciprocal lattice step 2π/(pad·L).
  double node_spacing = 0.7;
  double nufft_tol = 1e-12;
  double cg_tol = 1e-13;
  int cg_max_iter = 300;

  bool operator==(const TransformOptions&) const = default;
};

// Fourier transform on the compact SE(2) box.
//
// Analysis evaluates, per θ-slice, F(p) = Δx·Δy·Σ_j f_j·exp(i p·x_j) on a
// polar lattice p = λ(cos ψ, sin ψ), then
//   η(λ, m, n) = (1/n_psi)·Σ_ψ exp(i(n−m)ψ)·Δθ·Σ_θ exp(imθ)·F(λ, ψ, θ).
// Synthesis inverts the two angular DFTs exactly and recovers grid values by
// weighted least squares from the polar samples, so synthesize∘analyze is the
// identity on grid functions.
class Se2Fourier {
 public:
  explicit Se2Fourier(const GridSpec& grid, TransformOptions opts = {});
  ~Se2Fourier();
  Se2Fourier(const Se2Fourier&) = delete;
  Se2Fourier& operator=(const Se2Fourier&) = delete;

  const GridSpec& grid() const { return grid_; }
  const TransformOptions& options() const { return opts_; }
  int n_lambda() const { return n_lambda_; }
  int n_psi() const { return n_psi_; }
  int band_m() const { return grid_.ntheta / 2; }
  int band_n() const { return n_psi_ / 2; }
  double radius(int r) const { return r * dlam_; }
  double psi(int s) const { return kTwoPi * s / n_psi_; }

  Se2Spectrum zero(SpectrumRole role) const;
  void check_compatible(const Se2Spectrum& s) const;

  Se2Spectrum analyze(const DensityGrid& f, SpectrumRole role) const;
  DensityGrid synthesize(const Se2Spectrum& s) const;

  // Polar values F(λ_r, ψ_s, θ_t), layout [r][s][t]. Exposed for tests.
  std::vector<cplx> polar_values(const DensityGrid& f) const;

 private:
  void forward_angular(std::vector<cplx>& polar, Se2Spectrum& out) const;
  void inverse_angular(const Se2Spectrum& s, std::vector<cplx>& polar) const;
  void solve_slice(const std::vector<cplx>& polar, int t, double* out) const;
  struct CgWork;
  void gram_apply(const double* x, double* y, CgWork& w) const;
  void precondition(const double* x, double* y, CgWork& w) const;

  GridSpec grid_;
  TransformOptions opts_;
  int n_lambda_ = 0, n_psi_ = 0;
  double dlam_ = 0.0;
  double cx_ = 0.0, cy_ = 0.0;  // anchor sample nearest the box centre

  // half-plane nodes (r ≥ 1, ψ ∈ [0, π)), index (r−1)·n_psi/2 + s
  std::vector<cplx> node_phase_;  // exp(i p·c)
  std::unique_ptr<detail::Nufft2d> fwd_;

  // least-squares data: in-cell half-plane nodes followed by the origin
  std::vector<int> ls_node_;      // half-plane node index, −1 for the origin
  std::vector<double> ls_weight_;
  std::unique_ptr<detail::Nufft2d> ls_;
  int ne1_ = 0, ne2_ = 0;         // extended grid
  int mc1_ = 0, mc2_ = 0;         // circulant embedding
  std::vector<double> gram_hat_;
  std::unique_ptr<detail::RealFftPlan2d> circ_;
  std::vector<double> pre_inv_;
  std::unique_ptr<detail::RealFftPlan2d> pre_;

  std::unique_ptr<detail::FftPlanMany> theta_bwd_, theta_fwd_, psi_bwd_, psi_fwd_;
};

// Spectral group convolution: per radius, C = Mb·Ma with Ma expanded to the
// full n_psi×n_psi block via the shift rule. Both inputs must be PROB_SPACE.
Se2Spectrum spectral_convolve(const Se2Spectrum& Ma, const Se2Spectrum& Mb);

// Direct quadrature convolution c(g) = w·Σ_h a(h)·b(h⁻¹∘g) with b evaluated
// analytically; O(N²) reference used by tests and the benchmark.
template <class F>
DensityGrid direct_convolve(const DensityGrid& a, F&& b) {
  const GridSpec& g = a.spec();
  DensityGrid out(g);
  const std::size_t n = g.size();
  std::vector<Pose> poses(n);
  std::vector<std::size_t> nz;
  std::vector<double> ix, iy, it, ic, is;
  for (std::size_t i = 0; i < n; ++i) {
    poses[i] = g.pose(i);
    if (a[i] == 0.0) continue;
    const Pose v = inverse(poses[i]);
    nz.push_back(i);
    ix.push_back(v.x);
    iy.push_back(v.y);
    it.push_back(v.theta);
    ic.push_back(std::cos(v.theta));
    is.push_back(std::sin(v.theta));
  }
  const double w = g.weight();
  Pose rel;
  for (std::size_t k = 0; k < n; ++k) {
    const Pose& pk = poses[k];
    double s = 0.0;
    for (std::size_t q = 0; q < nz.size(); ++q) {
      // compose(inverse(pose_j), pose_k) with both angles already in [0, 2π)
      rel.x = ix[q] + ic[q] * pk.x - is[q] * pk.y;
      rel.y = iy[q] + is[q] * pk.x + ic[q] * pk.y;
      rel.theta = it[q] + pk.theta;
      if (rel.theta >= kTwoPi) rel.theta -= kTwoPi;
      s += a[nz[q]] * b(rel);
    }
    out[k] = w * s;
  }
  return out;
}

}  // namespace hef
