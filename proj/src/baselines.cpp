#include "hef/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hef {

void GaussianBelief::validate() const {
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw std::invalid_argument("Gaussian belief: covariance is not symmetric");
  }
  if (Eigen::LLT<Eigen::Matrix3d>(cov).info() != Eigen::Success) {
    throw std::invalid_argument("Gaussian belief: covariance is not positive definite");
  }
}

GaussianBelief ekf_predict(const GaussianBelief& bel, const DiffDriveModel& model, const ControlInput& u) {
  model.validate();
  u.validate();
  const double c = std::cos(bel.mean.theta), s = std::sin(bel.mean.theta);
  GaussianBelief out;
  out.mean = compose(bel.mean, u.as_pose());
  Eigen::Matrix3d F = Eigen::Matrix3d::Identity();
  F(0, 2) = -s * u.dx - c * u.dy;
  F(1, 2) = c * u.dx - s * u.dy;
  // body-frame noise rotated into the world frame
  Eigen::Matrix3d G = Eigen::Matrix3d::Zero();
  G << c, -s, 0, s, c, 0, 0, 0, 1;
  const Eigen::Vector3d q(model.sigma_trans * model.sigma_trans, model.sigma_trans * model.sigma_trans,
                          model.sigma_rot * model.sigma_rot);
  out.cov = F * bel.cov * F.transpose() + G * q.asDiagonal() * G.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

GaussianBelief ekf_update(const GaussianBelief& bel, const LandmarkMap& map, const Measurement& z) {
  if (!z.landmark_id) throw std::invalid_argument("EKF update needs a known landmark correspondence");
  const Landmark& L = map.find(*z.landmark_id);
  const double ex = L.x - bel.mean.x, ey = L.y - bel.mean.y;
  const double r2 = ex * ex + ey * ey;
  const double r = std::sqrt(r2);
  if (!(r > 1e-12)) throw std::runtime_error("EKF update: pose coincides with the landmark");
  Eigen::RowVector3d H;
  double innov = 0.0;
  if (z.kind == MeasurementKind::Range) {
    H << -ex / r, -ey / r, 0.0;
    innov = z.value - r;
  } else {
    H << ey / r2, -ex / r2, -1.0;
    innov = wrap_pi(z.value - (std::atan2(ey, ex) - bel.mean.theta));
  }
  const double S = (H * bel.cov * H.transpose())(0, 0) + z.sigma * z.sigma;
  if (!(S > 1e-300) || !std::isfinite(S)) throw std::runtime_error("EKF update: singular innovation covariance");
  const Eigen::Vector3d K = bel.cov * H.transpose() / S;
  GaussianBelief out;
  out.mean = Pose(bel.mean.x + K(0) * innov, bel.mean.y + K(1) * innov, bel.mean.theta + K(2) * innov);
  const Eigen::Matrix3d IKH = Eigen::Matrix3d::Identity() - K * H;
  out.cov = IKH * bel.cov * IKH.transpose() + K * (z.sigma * z.sigma) * K.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

GaussianBelief ekf_step(const GaussianBelief& bel, const DiffDriveModel& model, const ControlInput& u,
                        const std::vector<Measurement>& zs, const LandmarkMap& map) {
  GaussianBelief b = ekf_predict(bel, model, u);
  for (const auto& z : zs) b = ekf_update(b, map, z);
  return b;
}

DensityGrid gaussian_on_grid(const GaussianBelief& bel, const GridSpec& grid) {
  bel.validate();
  const Eigen::Matrix3d P = bel.cov.inverse();
  DensityGrid out(grid);
  std::vector<double> eth(grid.ntheta);
  for (int it = 0; it < grid.ntheta; ++it) eth[it] = angdiff(grid.theta(it), bel.mean.theta);
  double mx = -INFINITY;
  for (int ix = 0; ix < grid.nx; ++ix) {
    for (int iy = 0; iy < grid.ny; ++iy) {
      for (int it = 0; it < grid.ntheta; ++it) {
        const Eigen::Vector3d e(grid.x(ix) - bel.mean.x, grid.y(iy) - bel.mean.y, eth[it]);
        const double v = -0.5 * e.dot(P * e);
        out.at(ix, iy, it) = v;
        mx = std::max(mx, v);
      }
    }
  }
  for (auto& v : out.values()) v = std::exp(v - mx);
  out.normalize();
  return out;
}

namespace {

double circular_mean_heading(const DensityGrid& bel) {
  const GridSpec& g = bel.spec();
  std::vector<double> mt(g.ntheta, 0.0);
  for (std::size_t i = 0; i < bel.size(); ++i) mt[i % g.ntheta] += bel[i];
  double c = 0.0, s = 0.0;
  for (int it = 0; it < g.ntheta; ++it) {
    c += mt[it] * std::cos(g.theta(it));
    s += mt[it] * std::sin(g.theta(it));
  }
  return std::hypot(c, s) > 1e-12 ? std::atan2(s, c) : 0.0;
}

// Integer offsets within 3σ of the continuous shift, Gaussian weights.
void axis_taps(double shift, double sigma, double step, std::vector<int>& k, std::vector<double>& w) {
  const int lo = static_cast<int>(std::floor((shift - 3.0 * sigma) / step));
  const int hi = static_cast<int>(std::ceil((shift + 3.0 * sigma) / step));
  k.clear();
  w.clear();
  for (int i = lo; i <= hi; ++i) {
    const double e = i * step - shift;
    if (std::abs(e) > 3.0 * sigma) continue;
    k.push_back(i);
    w.push_back(std::exp(-e * e / (2.0 * sigma * sigma)));
  }
  if (k.empty()) {
    k.push_back(static_cast<int>(std::lround(shift / step)));
    w.push_back(1.0);
  }
}

}  // namespace

HistKernel histf_kernel(const DiffDriveModel& model, const ControlInput& u, double heading, const GridSpec& grid) {
  model.validate();
  u.validate();
  const double c = std::cos(heading), s = std::sin(heading);
  const double sx = c * u.dx - s * u.dy, sy = s * u.dx + c * u.dy;
  std::vector<int> kx, ky, kt;
  std::vector<double> wx, wy, wt;
  axis_taps(sx, model.sigma_trans, grid.dx(), kx, wx);
  axis_taps(sy, model.sigma_trans, grid.dy(), ky, wy);
  axis_taps(wrap_pi(u.dtheta), model.sigma_rot, grid.dtheta(), kt, wt);
  auto span = [](const std::vector<int>& k) { return k.back() - k.front() + 1; };
  if (span(kx) > grid.nx || span(ky) > grid.ny || span(kt) > grid.ntheta) {
    throw std::invalid_argument("histogram filter: motion kernel exceeds the grid");
  }
  HistKernel K;
  double sum = 0.0;
  for (std::size_t a = 0; a < kx.size(); ++a) {
    for (std::size_t b = 0; b < ky.size(); ++b) {
      for (std::size_t d = 0; d < kt.size(); ++d) {
        K.dix.push_back(kx[a]);
        K.diy.push_back(ky[b]);
        K.dit.push_back(kt[d]);
        K.w.push_back(wx[a] * wy[b] * wt[d]);
        sum += K.w.back();
      }
    }
  }
  for (auto& w : K.w) w /= sum;
  return K;
}

DensityGrid histf_predict(const DensityGrid& bel, const DiffDriveModel& model, const ControlInput& u) {
  const GridSpec& g = bel.spec();
  const HistKernel K = histf_kernel(model, u, circular_mean_heading(bel), g);
  DensityGrid out(g, 0.0);
  for (int ix = 0; ix < g.nx; ++ix) {
    for (int iy = 0; iy < g.ny; ++iy) {
      for (int it = 0; it < g.ntheta; ++it) {
        const double p = bel.at(ix, iy, it);
        if (p == 0.0) continue;
        for (std::size_t k = 0; k < K.w.size(); ++k) {
          const int jx = ix + K.dix[k], jy = iy + K.diy[k];
          if (jx < 0 || jx >= g.nx || jy < 0 || jy >= g.ny) continue;
          int jt = (it + K.dit[k]) % g.ntheta;
          if (jt < 0) jt += g.ntheta;
          out.at(jx, jy, jt) += p * K.w[k];
        }
      }
    }
  }
  if (!(out.integral() > 0.0)) throw std::runtime_error("histogram filter: all mass left the grid");
  out.normalize();
  return out;
}

DensityGrid histf_update(const DensityGrid& bel, const DensityGrid& log_lik) {
  if (!(bel.spec() == log_lik.spec())) throw std::invalid_argument("histogram filter: grid mismatch");
  const double mx = log_lik.max();
  if (!std::isfinite(mx)) throw std::invalid_argument("histogram filter: non-finite likelihood");
  DensityGrid out(bel.spec());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = bel[i] * std::exp(log_lik[i] - mx);
  if (!(out.integral() > 0.0)) throw std::runtime_error("histogram filter: posterior has no mass");
  out.normalize();
  return out;
}

DensityGrid histf_step(const DensityGrid& bel, const DiffDriveModel& model, const ControlInput& u,
                       const std::vector<Measurement>& zs, const LandmarkMap& map) {
  DensityGrid pred = histf_predict(bel, model, u);
  if (zs.empty()) return pred;
  DensityGrid ll(pred.spec(), 0.0);
  for (const auto& z : zs) {
    Measurement zr = z;
    if (!zr.landmark_id) zr.landmark_id = associate_greedy(map, zr, pred);
    const DensityGrid f = measurement_loglik(map, zr, pred.spec());
    for (std::size_t i = 0; i < ll.size(); ++i) ll[i] += f[i];
  }
  return histf_update(pred, ll);
}

void ParticleSet::validate() const {
  if (particles.empty() || particles.size() != weights.size()) {
    throw std::invalid_argument("particle set: empty or mismatched weights");
  }
  double s = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("particle set: negative weight");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("particle set: weights do not sum to 1");
}

ParticleSet pf_from_samples(std::vector<Pose> samples) {
  if (samples.empty()) throw std::invalid_argument("particle filter needs at least one particle");
  ParticleSet ps;
  ps.weights.assign(samples.size(), 1.0 / samples.size());
  ps.particles = std::move(samples);
  ps.mode = ps.particles.front();
  return ps;
}

void pf_predict(ParticleSet& ps, const DiffDriveModel& model, const ControlInput& u, Rng& rng) {
  model.validate();
  u.validate();
  std::normal_distribution<double> n01(0.0, 1.0);
  for (auto& p : ps.particles) {
    const double ex = model.sigma_trans * n01(rng);
    const double ey = model.sigma_trans * n01(rng);
    const double et = model.sigma_rot * n01(rng);
    p = compose(p, Pose(u.dx + ex, u.dy + ey, u.dtheta + et));
  }
}

void pf_weight(ParticleSet& ps, const std::vector<Measurement>& zs, const LandmarkMap& map, const GridSpec* grid) {
  const std::size_t n = ps.size();
  ps.degenerate_reset = false;
  if (!zs.empty()) {
    std::vector<Measurement> zr = zs;
    for (auto& z : zr) {
      if (!z.landmark_id) {
        if (!grid) throw std::invalid_argument("particle filter: association needs a grid");
        z.landmark_id = associate_greedy(map, z, pf_histogram(ps, *grid));
      }
    }
    std::vector<double> lw(n);
    double mx = -INFINITY;
    bool informative = false;
    for (std::size_t i = 0; i < n; ++i) {
      double ll = 0.0;
      bool floor_only = true;
      for (const auto& z : zr) {
        const double v = loglik_at(map, z, ps.particles[i], grid);
        if (v > kLogFloor) floor_only = false;
        ll += v;
      }
      informative = informative || !floor_only;
      lw[i] = std::log(ps.weights[i]) + ll;
      mx = std::max(mx, lw[i]);
    }
    if (!informative || !std::isfinite(mx)) {
      ps.weights.assign(n, 1.0 / n);
      ps.degenerate_reset = true;
    } else {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (ps.weights[i] = std::exp(lw[i] - mx));
      for (auto& w : ps.weights) w /= s;
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (ps.weights[i] > ps.weights[best]) best = i;
  }
  ps.mode = ps.particles[best];
}

double effective_sample_size(const ParticleSet& ps) {
  double s2 = 0.0;
  for (double w : ps.weights) s2 += w * w;
  return 1.0 / s2;
}

void systematic_resample(ParticleSet& ps, Rng& rng) {
  const std::size_t n = ps.size();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double u0 = u01(rng) / n;
  std::vector<Pose> out;
  out.reserve(n);
  double c = ps.weights[0];
  std::size_t i = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double target = u0 + static_cast<double>(k) / n;
    while (target > c && i + 1 < n) c += ps.weights[++i];
    out.push_back(ps.particles[i]);
  }
  ps.particles = std::move(out);
  ps.weights.assign(n, 1.0 / n);
}

void pf_step(ParticleSet& ps, const DiffDriveModel& model, const ControlInput& u, const std::vector<Measurement>& zs,
             const LandmarkMap& map, Rng& rng, const GridSpec* grid) {
  pf_predict(ps, model, u, rng);
  pf_weight(ps, zs, map, grid);
  ps.resampled = false;
  if (effective_sample_size(ps) < 0.5 * ps.size()) {
    systematic_resample(ps, rng);
    ps.resampled = true;
  }
}

Pose pf_mean(const ParticleSet& ps) {
  double x = 0.0, y = 0.0, c = 0.0, s = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double w = ps.weights[i];
    x += w * ps.particles[i].x;
    y += w * ps.particles[i].y;
    c += w * std::cos(ps.particles[i].theta);
    s += w * std::sin(ps.particles[i].theta);
  }
  return Pose(x, y, std::atan2(s, c));
}

DensityGrid pf_histogram(const ParticleSet& ps, const GridSpec& grid) {
  DensityGrid out(grid, 0.0);
  const double hx = 0.5 * grid.dx(), hy = 0.5 * grid.dy();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Pose& p = ps.particles[i];
    if (p.x < grid.x_min - hx || p.x >= grid.x(grid.nx - 1) + hx || p.y < grid.y_min - hy ||
        p.y >= grid.y(grid.ny - 1) + hy) {
      continue;
    }
    out[grid.nearest_index(p)] += ps.weights[i];
  }
  const double w = grid.weight();
  for (auto& v : out.values()) v = v / w + kDensityFloor;
  out.normalize();
  return out;
}

}  // namespace hef
