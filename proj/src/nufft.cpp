#include "nufft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hef::detail {

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    nodes[i] = -z;
    nodes[n - 1 - i] = z;
    weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

namespace {
inline int wrap_index(int l, int m) {
  l %= m;
  return l < 0 ? l + m : l;
}
}  // namespace

Nufft2d::Nufft2d(int n1, int n2, std::vector<double> q1, std::vector<double> q2, double tol)
    : n1_(n1), n2_(n2), q1_(std::move(q1)), q2_(std::move(q2)) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("nufft: mode counts must be positive");
  if (q1_.size() != q2_.size()) throw std::invalid_argument("nufft: coordinate arrays differ in length");
  w_ = std::clamp(static_cast<int>(std::ceil(-std::log10(tol))) + 1, 2, 16);
  beta_ = 2.30 * w_;
  m1_ = next_smooth(std::max(2 * n1, 2 * w_));
  m2_ = next_smooth(std::max(2 * n2, 2 * w_));
  precompute_axis(n1_, m1_, q1_, idx1_, ker1_, corr1_);
  precompute_axis(n2_, m2_, q2_, idx2_, ker2_, corr2_);
  start2_.resize(q2_.size());
  for (std::size_t k = 0; k < q2_.size(); ++k) start2_[k] = idx2_[k * w_];
  fwd_ = std::make_unique<FftPlan>(std::vector<int>{m1_, m2_}, -1);
  bwd_ = std::make_unique<FftPlan>(std::vector<int>{m1_, m2_}, +1);
}

double Nufft2d::kernel(double z) const {
  const double t = 1.0 - z * z;
  return t > 0.0 ? std::exp(beta_ * (std::sqrt(t) - 1.0)) : 0.0;
}

void Nufft2d::precompute_axis(int n, int m, const std::vector<double>& q, std::vector<int>& idx,
                              std::vector<double>& ker, std::vector<double>& corr) const {
  const double h = 2.0 * std::numbers::pi / m;
  const double half = 0.5 * w_ * h;
  idx.resize(q.size() * w_);
  ker.resize(q.size() * w_);
  for (std::size_t k = 0; k < q.size(); ++k) {
    const int l0 = static_cast<int>(std::ceil(q[k] / h - 0.5 * w_));
    for (int a = 0; a < w_; ++a) {
      const double u = q[k] - (l0 + a) * h;
      idx[k * w_ + a] = wrap_index(l0 + a, m);
      ker[k * w_ + a] = kernel(u / half);
    }
  }
  // kernel Fourier transform by Gauss-Legendre quadrature
  std::vector<double> z, wq;
  gauss_legendre(120, z, wq);
  const int jlo = -(n / 2);
  corr.resize(n);
  for (int a = 0; a < n; ++a) {
    const int j = jlo + a;
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += wq[i] * kernel(z[i]) * std::cos(j * z[i] * half);
    corr[a] = h / (half * s);
  }
}

void Nufft2d::forward(const cplx* modes, cplx* values) const {
  std::vector<cplx> g(static_cast<std::size_t>(m1_) * m2_, cplx(0.0, 0.0));
  const int j1lo = -(n1_ / 2), j2lo = -(n2_ / 2);
  for (int a = 0; a < n1_; ++a) {
    const std::size_t row = static_cast<std::size_t>(wrap_index(j1lo + a, m1_)) * m2_;
    for (int b = 0; b < n2_; ++b) {
      g[row + wrap_index(j2lo + b, m2_)] = modes[static_cast<std::size_t>(a) * n2_ + b] * (corr1_[a] * corr2_[b]);
    }
  }
  std::vector<cplx> G(g.size());
  bwd_->execute(g.data(), G.data());
  // rows extended periodically so each kernel window is contiguous
  const int me = m2_ + w_;
  std::vector<cplx> ge(static_cast<std::size_t>(m1_) * me);
  for (int a = 0; a < m1_; ++a) {
    const cplx* src = &G[static_cast<std::size_t>(a) * m2_];
    cplx* dst = &ge[static_cast<std::size_t>(a) * me];
    std::copy_n(src, m2_, dst);
    std::copy_n(src, w_, dst + m2_);
  }
  const std::size_t np = q1_.size();
  for (std::size_t k = 0; k < np; ++k) {
    const int* i1 = &idx1_[k * w_];
    const double* k1 = &ker1_[k * w_];
    const double* k2 = &ker2_[k * w_];
    const int s2 = start2_[k];
    double re = 0.0, im = 0.0;
    for (int a = 0; a < w_; ++a) {
      const double* row = reinterpret_cast<const double*>(&ge[static_cast<std::size_t>(i1[a]) * me + s2]);
      double rre = 0.0, rim = 0.0;
      for (int b = 0; b < w_; ++b) {
        rre += row[2 * b] * k2[b];
        rim += row[2 * b + 1] * k2[b];
      }
      re += rre * k1[a];
      im += rim * k1[a];
    }
    values[k] = cplx(re, im);
  }
}

void Nufft2d::adjoint(const cplx* values, cplx* modes) const {
  const int me = m2_ + w_;
  std::vector<cplx> be(static_cast<std::size_t>(m1_) * me, cplx(0.0, 0.0));
  const std::size_t np = q1_.size();
  for (std::size_t k = 0; k < np; ++k) {
    const int* i1 = &idx1_[k * w_];
    const double* k1 = &ker1_[k * w_];
    const double* k2 = &ker2_[k * w_];
    const int s2 = start2_[k];
    const cplx c = values[k];
    for (int a = 0; a < w_; ++a) {
      double* row = reinterpret_cast<double*>(&be[static_cast<std::size_t>(i1[a]) * me + s2]);
      const double cr = c.real() * k1[a], ci = c.imag() * k1[a];
      for (int bb = 0; bb < w_; ++bb) {
        row[2 * bb] += cr * k2[bb];
        row[2 * bb + 1] += ci * k2[bb];
      }
    }
  }
  // fold the periodic extension back
  std::vector<cplx> b(static_cast<std::size_t>(m1_) * m2_);
  for (int a = 0; a < m1_; ++a) {
    const cplx* src = &be[static_cast<std::size_t>(a) * me];
    cplx* dst = &b[static_cast<std::size_t>(a) * m2_];
    std::copy_n(src, m2_, dst);
    for (int j = 0; j < w_; ++j) dst[j] += src[m2_ + j];
  }
  std::vector<cplx> B(b.size());
  fwd_->execute(b.data(), B.data());
  const int j1lo = -(n1_ / 2), j2lo = -(n2_ / 2);
  for (int a = 0; a < n1_; ++a) {
    const std::size_t row = static_cast<std::size_t>(wrap_index(j1lo + a, m1_)) * m2_;
    for (int bb = 0; bb < n2_; ++bb) {
      modes[static_cast<std::size_t>(a) * n2_ + bb] = B[row + wrap_index(j2lo + bb, m2_)] * (corr1_[a] * corr2_[bb]);
    }
  }
}

}  // namespace hef::detail
