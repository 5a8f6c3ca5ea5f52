#include "hef/se2_fourier.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fft.hpp"
#include "nufft.hpp"

namespace hef {

const char* role_name(SpectrumRole r) { return r == SpectrumRole::LogSpace ? "LOG_SPACE" : "PROB_SPACE"; }

Se2Spectrum::Se2Spectrum(int n_lambda, int n_m, int n_n, SpectrumRole role)
    : n_lambda_(n_lambda), n_m_(n_m), n_n_(n_n), role_(role),
      data_(static_cast<std::size_t>(n_lambda) * n_m * n_n, cplx(0.0, 0.0)) {
  if (n_lambda < 1 || n_m < 1 || n_n < 1) throw std::invalid_argument("Se2Spectrum: empty shape");
}

Se2Spectrum& Se2Spectrum::operator+=(const Se2Spectrum& o) {
  if (!same_shape(o)) throw std::invalid_argument("Se2Spectrum: shape mismatch in addition");
  if (role_ != o.role_) throw std::invalid_argument("Se2Spectrum: cannot add LOG_SPACE and PROB_SPACE spectra");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Se2Spectrum& Se2Spectrum::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

Se2Spectrum operator+(const Se2Spectrum& a, const Se2Spectrum& b) {
  Se2Spectrum out = a;
  out += b;
  return out;
}

namespace {

inline int wrap_mod(int k, int n) {
  k %= n;
  return k < 0 ? k + n : k;
}

}  // namespace

Se2Fourier::Se2Fourier(const GridSpec& grid, TransformOptions opts) : grid_(grid), opts_(opts) {
  grid_.validate();
  if (opts_.pad < 1) throw std::invalid_argument("transform: pad must be >= 1");
  if (!(opts_.node_spacing > 0.0 && opts_.node_spacing <= 1.0)) {
    throw std::invalid_argument("transform: node_spacing must lie in (0, 1]");
  }
  const int nx = grid_.nx, ny = grid_.ny, nt = grid_.ntheta;
  const double dx = grid_.dx(), dy = grid_.dy();
  cx_ = grid_.x(nx / 2);
  cy_ = grid_.y(ny / 2);

  const double kx = std::numbers::pi / dx, ky = std::numbers::pi / dy;
  const double lam_max = std::hypot(kx, ky);
  const double step = kTwoPi / (opts_.pad * std::max(nx * dx, ny * dy));
  dlam_ = opts_.node_spacing * step;
  n_lambda_ = static_cast<int>(std::ceil(lam_max / dlam_ - 1e-9)) + 1;
  const int base = std::lcm(nt, 2);
  n_psi_ = base * static_cast<int>(std::ceil(kTwoPi * lam_max / (dlam_ * base) - 1e-9));
  const int half = n_psi_ / 2;

  // forward nodes
  const std::size_t nnodes = static_cast<std::size_t>(n_lambda_ - 1) * half;
  std::vector<double> q1(nnodes), q2(nnodes);
  node_phase_.resize(nnodes);
  for (int r = 1; r < n_lambda_; ++r) {
    for (int s = 0; s < half; ++s) {
      const std::size_t k = static_cast<std::size_t>(r - 1) * half + s;
      const double px = radius(r) * std::cos(psi(s));
      const double py = radius(r) * std::sin(psi(s));
      q1[k] = px * dx;
      q2[k] = py * dy;
      node_phase_[k] = std::polar(1.0, px * cx_ + py * cy_);
    }
  }
  fwd_ = std::make_unique<detail::Nufft2d>(nx, ny, q1, q2, opts_.nufft_tol);

  // least-squares system over the reciprocal cell
  std::vector<double> l1, l2;
  const double dpsi = kTwoPi / n_psi_;
  for (int r = 1; r < n_lambda_; ++r) {
    for (int s = 0; s < half; ++s) {
      const std::size_t k = static_cast<std::size_t>(r - 1) * half + s;
      const double px = q1[k] / dx, py = q2[k] / dy;
      if (std::abs(px) >= kx * (1.0 - 1e-9) || std::abs(py) >= ky * (1.0 - 1e-9)) continue;
      ls_node_.push_back(static_cast<int>(k));
      ls_weight_.push_back(2.0 * radius(r) * dlam_ * dpsi);  // node and its mirror −p
      l1.push_back(q1[k]);
      l2.push_back(q2[k]);
    }
  }
  ls_node_.push_back(-1);
  ls_weight_.push_back(std::numbers::pi * 0.25 * dlam_ * dlam_);
  l1.push_back(0.0);
  l2.push_back(0.0);
  ne1_ = opts_.pad * nx;
  ne2_ = opts_.pad * ny;
  ls_ = std::make_unique<detail::Nufft2d>(ne1_, ne2_, l1, l2, opts_.nufft_tol);

  // Gram kernel K(d) = Σ W·cos(q·d), d ∈ [−ne, ne), embedded in a circulant
  mc1_ = 2 * ne1_;
  mc2_ = 2 * ne2_;
  {
    detail::Nufft2d kern(mc1_, mc2_, l1, l2, opts_.nufft_tol);
    std::vector<cplx> wv(ls_weight_.begin(), ls_weight_.end());
    std::vector<cplx> kd(static_cast<std::size_t>(mc1_) * mc2_);
    kern.adjoint(wv.data(), kd.data());
    std::vector<double> c(kd.size(), 0.0);
    for (int a = 0; a < mc1_; ++a) {
      const int d1 = a - ne1_;
      if (d1 == -ne1_) continue;
      for (int b = 0; b < mc2_; ++b) {
        const int d2 = b - ne2_;
        if (d2 == -ne2_) continue;
        c[static_cast<std::size_t>(wrap_mod(d1, mc1_)) * mc2_ + wrap_mod(d2, mc2_)] =
            kd[static_cast<std::size_t>(a) * mc2_ + b].real();
      }
    }
    circ_ = std::make_unique<detail::RealFftPlan2d>(mc1_, mc2_);
    std::vector<cplx> ch(static_cast<std::size_t>(mc1_) * circ_->n2_half());
    circ_->forward(c.data(), ch.data());
    gram_hat_.resize(ch.size());
    const double norm = 1.0 / (static_cast<double>(mc1_) * mc2_);
    for (std::size_t i = 0; i < ch.size(); ++i) gram_hat_[i] = ch[i].real() * norm;

    // optimal (T. Chan) circulant preconditioner on the extended grid
    auto kval = [&](int d1, int d2) {
      return kd[static_cast<std::size_t>(d1 + ne1_) * mc2_ + (d2 + ne2_)].real();
    };
    std::vector<double> pc(static_cast<std::size_t>(ne1_) * ne2_);
    for (int d1 = 0; d1 < ne1_; ++d1) {
      const double a1 = static_cast<double>(ne1_ - d1) / ne1_, b1 = static_cast<double>(d1) / ne1_;
      for (int d2 = 0; d2 < ne2_; ++d2) {
        const double a2 = static_cast<double>(ne2_ - d2) / ne2_, b2 = static_cast<double>(d2) / ne2_;
        double v = a1 * a2 * kval(d1, d2);
        if (d1 > 0) v += b1 * a2 * kval(d1 - ne1_, d2);
        if (d2 > 0) v += a1 * b2 * kval(d1, d2 - ne2_);
        if (d1 > 0 && d2 > 0) v += b1 * b2 * kval(d1 - ne1_, d2 - ne2_);
        pc[static_cast<std::size_t>(d1) * ne2_ + d2] = v;
      }
    }
    pre_ = std::make_unique<detail::RealFftPlan2d>(ne1_, ne2_);
    std::vector<cplx> ph(static_cast<std::size_t>(ne1_) * pre_->n2_half());
    pre_->forward(pc.data(), ph.data());
    pre_inv_.resize(ph.size());
    double pmax = 0.0;
    for (const auto& v : ph) pmax = std::max(pmax, v.real());
    const double pnorm = static_cast<double>(ne1_) * ne2_;
    for (std::size_t i = 0; i < ph.size(); ++i) pre_inv_[i] = 1.0 / (std::max(ph[i].real(), 1e-8 * pmax) * pnorm);
  }

  theta_bwd_ = std::make_unique<detail::FftPlanMany>(nt, n_psi_, +1);
  theta_fwd_ = std::make_unique<detail::FftPlanMany>(nt, n_psi_, -1);
  psi_bwd_ = std::make_unique<detail::FftPlanMany>(n_psi_, nt, +1);
  psi_fwd_ = std::make_unique<detail::FftPlanMany>(n_psi_, nt, -1);
}

Se2Fourier::~Se2Fourier() = default;

Se2Spectrum Se2Fourier::zero(SpectrumRole role) const {
  return Se2Spectrum(n_lambda_, grid_.ntheta, n_psi_, role);
}

void Se2Fourier::check_compatible(const Se2Spectrum& s) const {
  if (s.n_lambda() != n_lambda_ || s.n_m() != grid_.ntheta || s.n_n() != n_psi_) {
    throw std::invalid_argument("spectrum shape (" + std::to_string(s.n_lambda()) + ", " +
                                std::to_string(s.n_m()) + ", " + std::to_string(s.n_n()) +
                                ") does not match transform (" + std::to_string(n_lambda_) + ", " +
                                std::to_string(grid_.ntheta) + ", " + std::to_string(n_psi_) + ")");
  }
}

std::vector<cplx> Se2Fourier::polar_values(const DensityGrid& f) const {
  if (!(f.spec() == grid_)) throw std::invalid_argument("analyze: density grid does not match transform grid");
  const int nx = grid_.nx, ny = grid_.ny, nt = grid_.ntheta;
  const int half = n_psi_ / 2;
  const double area = grid_.dx() * grid_.dy();
  std::vector<cplx> polar(static_cast<std::size_t>(n_lambda_) * n_psi_ * nt);
  std::vector<cplx> slice(static_cast<std::size_t>(nx) * ny);
  std::vector<cplx> vals(fwd_->n_points());
  for (int t = 0; t < nt; ++t) {
    double dc = 0.0;
    for (int ix = 0; ix < nx; ++ix) {
      for (int iy = 0; iy < ny; ++iy) {
        const double v = f.at(ix, iy, t);
        slice[static_cast<std::size_t>(ix) * ny + iy] = v;
        dc += v;
      }
    }
    fwd_->forward(slice.data(), vals.data());
    for (int s = 0; s < n_psi_; ++s) polar[static_cast<std::size_t>(s) * nt + t] = dc * area;
    for (int r = 1; r < n_lambda_; ++r) {
      for (int s = 0; s < half; ++s) {
        const std::size_t k = static_cast<std::size_t>(r - 1) * half + s;
        const cplx v = vals[k] * node_phase_[k] * area;
        polar[(static_cast<std::size_t>(r) * n_psi_ + s) * nt + t] = v;
        polar[(static_cast<std::size_t>(r) * n_psi_ + s + half) * nt + t] = std::conj(v);
      }
    }
  }
  return polar;
}

void Se2Fourier::forward_angular(std::vector<cplx>& polar, Se2Spectrum& out) const {
  const int nt = grid_.ntheta;
  const int np = n_psi_;
  const double dth = grid_.dtheta();
  const int mlo = out.m_min(), nlo = out.n_min();
  std::vector<cplx> h(static_cast<std::size_t>(np) * nt);
  std::vector<cplx> bm(static_cast<std::size_t>(nt) * np), cm(bm.size());
  std::vector<cplx> root(np);
  for (int j = 0; j < np; ++j) root[j] = std::polar(dth / np, -kTwoPi * j / np);
  for (int r = 0; r < n_lambda_; ++r) {
    const cplx* a = polar.data() + static_cast<std::size_t>(r) * np * nt;
    theta_bwd_->execute(a, h.data());  // h[s][m mod nt] = Σ_t exp(imθ_t) F
    for (int mi = 0; mi < nt; ++mi) {
      const int m = mlo + mi;
      const int mw = wrap_mod(m, nt);
      for (int s = 0; s < np; ++s) {
        bm[static_cast<std::size_t>(mi) * np + s] = h[static_cast<std::size_t>(s) * nt + mw] * root[wrap_mod(m * s, np)];
      }
    }
    psi_bwd_->execute(bm.data(), cm.data());  // cm[m][n mod np] = Σ_s exp(inψ_s)·bm
    cplx* blk = out.block(r);
    for (int mi = 0; mi < nt; ++mi) {
      for (int ni = 0; ni < np; ++ni) {
        blk[static_cast<std::size_t>(mi) * np + ni] = cm[static_cast<std::size_t>(mi) * np + wrap_mod(nlo + ni, np)];
      }
    }
  }
}

Se2Spectrum Se2Fourier::analyze(const DensityGrid& f, SpectrumRole role) const {
  std::vector<cplx> polar = polar_values(f);
  Se2Spectrum out = zero(role);
  forward_angular(polar, out);
  return out;
}

void Se2Fourier::inverse_angular(const Se2Spectrum& spec, std::vector<cplx>& polar) const {
  const int nt = grid_.ntheta;
  const int np = n_psi_;
  const int mlo = spec.m_min(), nlo = spec.n_min();
  polar.assign(static_cast<std::size_t>(n_lambda_) * np * nt, cplx(0.0, 0.0));
  std::vector<cplx> cm(static_cast<std::size_t>(nt) * np), bm(cm.size());
  std::vector<cplx> h(static_cast<std::size_t>(np) * nt);
  std::vector<cplx> root(np);
  for (int j = 0; j < np; ++j) root[j] = std::polar(1.0 / kTwoPi, kTwoPi * j / np);
  for (int r = 0; r < n_lambda_; ++r) {
    const cplx* blk = spec.block(r);
    for (int mi = 0; mi < nt; ++mi) {
      for (int ni = 0; ni < np; ++ni) {
        cm[static_cast<std::size_t>(mi) * np + wrap_mod(nlo + ni, np)] = blk[static_cast<std::size_t>(mi) * np + ni];
      }
    }
    psi_fwd_->execute(cm.data(), bm.data());  // bm[m][s] = Σ_n exp(−inψ_s)·η
    std::fill(h.begin(), h.end(), cplx(0.0, 0.0));
    for (int mi = 0; mi < nt; ++mi) {
      const int m = mlo + mi;
      const int mw = wrap_mod(m, nt);
      for (int s = 0; s < np; ++s) {
        h[static_cast<std::size_t>(s) * nt + mw] = bm[static_cast<std::size_t>(mi) * np + s] * root[wrap_mod(m * s, np)];
      }
    }
    theta_fwd_->execute(h.data(), polar.data() + static_cast<std::size_t>(r) * np * nt);
  }
}

struct Se2Fourier::CgWork {
  std::vector<double> pad;   // mc1×mc2
  std::vector<cplx> spec;    // half spectrum of the circulant
  std::vector<double> small; // ne1×ne2
  std::vector<cplx> small_spec;
};

void Se2Fourier::gram_apply(const double* x, double* y, CgWork& w) const {
  std::fill(w.pad.begin(), w.pad.end(), 0.0);
  for (int a = 0; a < ne1_; ++a) {
    std::copy_n(x + static_cast<std::size_t>(a) * ne2_, ne2_, w.pad.data() + static_cast<std::size_t>(a) * mc2_);
  }
  circ_->forward(w.pad.data(), w.spec.data());
  for (std::size_t i = 0; i < w.spec.size(); ++i) w.spec[i] *= gram_hat_[i];
  circ_->backward(w.spec.data(), w.pad.data());
  for (int a = 0; a < ne1_; ++a) {
    std::copy_n(w.pad.data() + static_cast<std::size_t>(a) * mc2_, ne2_, y + static_cast<std::size_t>(a) * ne2_);
  }
}

void Se2Fourier::precondition(const double* x, double* y, CgWork& w) const {
  pre_->forward(x, w.small_spec.data());
  for (std::size_t i = 0; i < w.small_spec.size(); ++i) w.small_spec[i] *= pre_inv_[i];
  pre_->backward(w.small_spec.data(), y);
}

void Se2Fourier::solve_slice(const std::vector<cplx>& polar, int t, double* out) const {
  const int nt = grid_.ntheta;
  const int np = n_psi_;
  const int half = np / 2;
  const double area = grid_.dx() * grid_.dy();
  const std::size_t nls = ls_node_.size();
  std::vector<cplx> c(nls);
  for (std::size_t i = 0; i < nls; ++i) {
    const int k = ls_node_[i];
    if (k < 0) {
      cplx avg(0.0, 0.0);
      for (int s = 0; s < np; ++s) avg += polar[static_cast<std::size_t>(s) * nt + t];
      c[i] = ls_weight_[i] * avg.real() / (np * area);
    } else {
      const int r = 1 + k / half, s = k % half;
      const cplx y = polar[(static_cast<std::size_t>(r) * np + s) * nt + t] * std::conj(node_phase_[k]) / area;
      c[i] = ls_weight_[i] * y;
    }
  }
  const std::size_t ne = static_cast<std::size_t>(ne1_) * ne2_;
  std::vector<cplx> rhs_c(ne);
  ls_->adjoint(c.data(), rhs_c.data());
  std::vector<double> b(ne), x(ne, 0.0), r(ne), p(ne), ap(ne), z(ne);
  for (std::size_t i = 0; i < ne; ++i) b[i] = rhs_c[i].real();

  CgWork w;
  w.pad.resize(static_cast<std::size_t>(mc1_) * mc2_);
  w.spec.resize(static_cast<std::size_t>(mc1_) * circ_->n2_half());
  w.small_spec.resize(static_cast<std::size_t>(ne1_) * pre_->n2_half());

  // preconditioned conjugate gradients on the symmetric positive definite Gram system
  r = b;
  precondition(r.data(), z.data(), w);
  p = z;
  double rz = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < ne; ++i) {
    rz += r[i] * z[i];
    bb += b[i] * b[i];
  }
  double rr = bb;
  const double stop = opts_.cg_tol * opts_.cg_tol * bb;
  int it = 0;
  for (; it < opts_.cg_max_iter && rr > stop; ++it) {
    gram_apply(p.data(), ap.data(), w);
    double pap = 0.0;
    for (std::size_t i = 0; i < ne; ++i) pap += p[i] * ap[i];
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    rr = 0.0;
    for (std::size_t i = 0; i < ne; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      rr += r[i] * r[i];
    }
    precondition(r.data(), z.data(), w);
    double rz_new = 0.0;
    for (std::size_t i = 0; i < ne; ++i) rz_new += r[i] * z[i];
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < ne; ++i) p[i] = z[i] + beta * p[i];
  }

  // crop the original grid out of the extended one
  const int o1 = ne1_ / 2 - grid_.nx / 2;
  const int o2 = ne2_ / 2 - grid_.ny / 2;
  for (int ix = 0; ix < grid_.nx; ++ix) {
    for (int iy = 0; iy < grid_.ny; ++iy) {
      out[grid_.index(ix, iy, t)] = x[static_cast<std::size_t>(ix + o1) * ne2_ + (iy + o2)];
    }
  }
}

DensityGrid Se2Fourier::synthesize(const Se2Spectrum& s) const {
  check_compatible(s);
  std::vector<cplx> polar;
  inverse_angular(s, polar);
  DensityGrid out(grid_);
  for (int t = 0; t < grid_.ntheta; ++t) solve_slice(polar, t, out.values().data());
  return out;
}

namespace {

// Batched FFT plans shared across calls, keyed by (length, batch, sign).
const detail::FftPlanMany& cached_plan(int n, int howmany, int sign) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, std::unique_ptr<detail::FftPlanMany>> plans;
  std::lock_guard<std::mutex> lock(mu);
  auto& p = plans[{n, howmany, sign}];
  if (!p) p = std::make_unique<detail::FftPlanMany>(n, howmany, sign);
  return *p;
}

}  // namespace

Se2Spectrum spectral_convolve(const Se2Spectrum& Ma, const Se2Spectrum& Mb) {
  if (Ma.role() != SpectrumRole::ProbSpace || Mb.role() != SpectrumRole::ProbSpace) {
    throw std::invalid_argument("spectral_convolve: both spectra must be PROB_SPACE");
  }
  if (!Ma.same_shape(Mb)) throw std::invalid_argument("spectral_convolve: band mismatch");
  const int nt = Ma.n_m(), np = Ma.n_n();
  if (np % nt != 0) throw std::invalid_argument("spectral_convolve: n_psi must be a multiple of ntheta");
  const int mlo = Ma.m_min(), nlo = Ma.n_min();
  const int period = np / nt;
  // Row k of the expanded n_psi×n_psi block of Ma is row m0(k) of Ma rolled
  // by k − m0(k), a multiple of nt. So C = Mb·A_full splits into cyclic
  // convolutions along ψ: c_m = Σ_m0 d_{m,m0} ⊛ a_m0, where d_{m,m0} holds
  // Mb's entries of residue class m0 at offsets that are multiples of nt.
  // The DFT of such a sparse sequence is the length-(np/nt) DFT of its
  // nonzeros, repeated nt times.
  const detail::FftPlanMany& fa = cached_plan(np, nt, -1);
  const detail::FftPlanMany& fd = cached_plan(period, nt * nt, -1);
  const detail::FftPlanMany& bc = cached_plan(np, nt, +1);
  std::vector<int> cls(np), pos(np);
  for (int ki = 0; ki < np; ++ki) {
    const int k = nlo + ki;
    const int m0 = mlo + wrap_mod(k - mlo, nt);
    cls[ki] = m0 - mlo;
    pos[ki] = wrap_mod((k - m0) / nt, period);
  }
  Se2Spectrum out(Ma.n_lambda(), nt, np, SpectrumRole::ProbSpace);
  std::vector<cplx> ahat(static_cast<std::size_t>(nt) * np), d(static_cast<std::size_t>(nt) * nt * period),
      dhat(d.size()), chat(ahat.size());
  const double inv = 1.0 / np;
  for (int r = 0; r < Ma.n_lambda(); ++r) {
    fa.execute(Ma.block(r), ahat.data());
    const cplx* b = Mb.block(r);
    for (int m = 0; m < nt; ++m) {
      for (int ki = 0; ki < np; ++ki) {
        d[(static_cast<std::size_t>(m) * nt + cls[ki]) * period + pos[ki]] = b[static_cast<std::size_t>(m) * np + ki];
      }
    }
    fd.execute(d.data(), dhat.data());
    std::fill(chat.begin(), chat.end(), cplx(0.0));
    for (int m = 0; m < nt; ++m) {
      cplx* crow = chat.data() + static_cast<std::size_t>(m) * np;
      for (int m0 = 0; m0 < nt; ++m0) {
        const cplx* dh = dhat.data() + (static_cast<std::size_t>(m) * nt + m0) * period;
        const cplx* ah = ahat.data() + static_cast<std::size_t>(m0) * np;
        for (int f = 0; f < np; ++f) crow[f] += dh[f % period] * ah[f];
      }
    }
    cplx* c = out.block(r);
    bc.execute(chat.data(), c);
    for (std::size_t i = 0; i < static_cast<std::size_t>(nt) * np; ++i) c[i] *= inv;
  }
  return out;
}

}  // namespace hef
