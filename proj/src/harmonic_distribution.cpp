#include "hef/harmonic_distribution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <stdexcept>

#include "hef/binary_io.hpp"

namespace hef {

struct HarmonicExpDist::Cache {
  std::once_flag once;
  Se2Spectrum eta;
};

namespace {

double log_normalizer(const DensityGrid& log_phi) {
  const double c = log_phi.max();
  double s = 0.0;
  for (double v : log_phi.values()) s += std::exp(v - c);
  return std::log(s * log_phi.spec().weight()) + c;
}

void check_finite(const DensityGrid& g, const char* what) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw std::invalid_argument(std::string(what) + ": non-finite value at sample " + std::to_string(i));
    }
  }
}

void check_same_transform(const HarmonicExpDist& a, const HarmonicExpDist& b, const char* op) {
  if (!a.transform() || !b.transform()) throw std::invalid_argument(std::string(op) + ": empty distribution");
  if (a.transform() != b.transform() &&
      (!(a.grid() == b.grid()) || !(a.transform()->options() == b.transform()->options()))) {
    throw std::invalid_argument(std::string(op) + ": operands use different grids or bands");
  }
}

}  // namespace

HarmonicExpDist::HarmonicExpDist(TransformPtr tr, DensityGrid log_phi)
    : tr_(std::move(tr)), log_phi_(std::move(log_phi)), cache_(std::make_shared<Cache>()) {
  log_phi_.set_normalized(false);
  log_z_ = log_normalizer(log_phi_);
}

const Se2Spectrum& HarmonicExpDist::eta() const {
  if (!cache_) throw std::logic_error("HarmonicExpDist: empty distribution");
  std::call_once(cache_->once, [this] { cache_->eta = tr_->analyze(log_phi_, SpectrumRole::LogSpace); });
  return cache_->eta;
}

DensityGrid HarmonicExpDist::evaluate() const {
  DensityGrid out(log_phi_.spec());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_phi_[i] - log_z_);
  out.set_normalized(true);
  return out;
}

HarmonicExpDist fit_from_log_density(TransformPtr tr, const DensityGrid& log_f) {
  if (!tr) throw std::invalid_argument("fit_from_log_density: no transform");
  if (!(log_f.spec() == tr->grid())) throw std::invalid_argument("fit_from_log_density: grid mismatch");
  check_finite(log_f, "fit_from_log_density");
  return HarmonicExpDist(std::move(tr), log_f);
}

HarmonicExpDist from_natural_parameters(TransformPtr tr, Se2Spectrum eta) {
  if (!tr) throw std::invalid_argument("from_natural_parameters: no transform");
  if (eta.role() != SpectrumRole::LogSpace) {
    throw std::invalid_argument("from_natural_parameters: expected a LOG_SPACE spectrum");
  }
  tr->check_compatible(eta);
  DensityGrid log_phi = tr->synthesize(eta);
  check_finite(log_phi, "from_natural_parameters");
  HarmonicExpDist d(std::move(tr), std::move(log_phi));
  std::call_once(d.cache_->once, [&] { d.cache_->eta = std::move(eta); });
  return d;
}

HarmonicExpDist product(const HarmonicExpDist& a, const HarmonicExpDist& b) {
  check_same_transform(a, b, "product");
  // synthesis is linear, so F⁻¹[η_a + η_b] = ln φ_a + ln φ_b on the grid
  DensityGrid log_phi(a.grid());
  for (std::size_t i = 0; i < log_phi.size(); ++i) log_phi[i] = a.log_phi()[i] + b.log_phi()[i];
  HarmonicExpDist out(a.transform(), std::move(log_phi));
  return out;
}

DensityGrid floored_log(const DensityGrid& density) {
  const double mx = density.max();
  if (!(mx > 0.0) || !std::isfinite(mx)) {
    throw std::runtime_error("floored_log: density has no positive mass");
  }
  const double floor = kDensityFloor * mx;
  DensityGrid out(density.spec());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(density[i], floor));
  return out;
}

HarmonicExpDist convolve(const HarmonicExpDist& a, const HarmonicExpDist& b) {
  check_same_transform(a, b, "convolve");
  const Se2Fourier& tr = *a.transform();
  const Se2Spectrum ma = tr.analyze(a.evaluate(), SpectrumRole::ProbSpace);
  const Se2Spectrum mb = tr.analyze(b.evaluate(), SpectrumRole::ProbSpace);
  const DensityGrid c = tr.synthesize(spectral_convolve(ma, mb));
  return fit_from_log_density(a.transform(), floored_log(c));
}

PoseEstimate mean_pose(const DensityGrid& density) {
  const GridSpec& g = density.spec();
  const double w = g.weight();
  double mass = 0.0, mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0, sc = 0.0, ss = 0.0;
  std::vector<double> ct(g.ntheta), st(g.ntheta);
  for (int it = 0; it < g.ntheta; ++it) {
    ct[it] = std::cos(g.theta(it));
    st[it] = std::sin(g.theta(it));
  }
  for (int ix = 0; ix < g.nx; ++ix) {
    const double x = g.x(ix);
    for (int iy = 0; iy < g.ny; ++iy) {
      const double y = g.y(iy);
      for (int it = 0; it < g.ntheta; ++it) {
        const double p = density.at(ix, iy, it) * w;
        mass += p;
        mx += p * x;
        my += p * y;
        sxx += p * x * x;
        syy += p * y * y;
        sxy += p * x * y;
        sc += p * ct[it];
        ss += p * st[it];
      }
    }
  }
  if (!(mass > 0.0)) throw std::runtime_error("mean_pose: density has no mass");
  mx /= mass;
  my /= mass;
  PoseEstimate out;
  out.planar_cov << sxx / mass - mx * mx, sxy / mass - mx * my, sxy / mass - mx * my, syy / mass - my * my;
  out.resultant_length = std::hypot(sc, ss) / mass;
  out.orientation_defined = out.resultant_length >= 1e-6;
  out.pose = Pose(mx, my, out.orientation_defined ? std::atan2(ss, sc) : 0.0);
  return out;
}

PoseEstimate mean_pose(const HarmonicExpDist& d) { return mean_pose(d.evaluate()); }

Se2Spectrum expected_iur(const HarmonicExpDist& d) {
  return d.transform()->analyze(d.evaluate(), SpectrumRole::ProbSpace);
}

std::size_t mode_index(const DensityGrid& values) {
  std::size_t best = 0;
  double bv = values[0];
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > bv + 1e-12 * std::max(1.0, std::abs(bv))) {
      bv = values[i];
      best = i;
    }
  }
  return best;
}

Pose mode_pose(const HarmonicExpDist& d) { return d.grid().pose(mode_index(d.log_phi())); }

double kl_divergence(std::span<const double> p, std::span<const double> q, double weight) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  const double qmax = *std::max_element(q.begin(), q.end());
  const double floor = kDensityFloor * qmax;
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    s += p[i] * std::log(p[i] / std::max(q[i], floor));
  }
  return std::max(0.0, s * weight);
}

double kl_divergence(const DensityGrid& p, const DensityGrid& q) {
  if (!(p.spec() == q.spec())) throw std::invalid_argument("kl_divergence: grid mismatch");
  return kl_divergence(p.values(), q.values(), p.spec().weight());
}

void save_distribution(const HarmonicExpDist& d, const std::string& prefix) {
  save_spectrum(d.eta(), prefix + ".bin");
  const auto& o = d.transform()->options();
  nlohmann::json j;
  j["grid"] = d.grid();
  j["log_z"] = d.log_z();
  j["role"] = role_name(SpectrumRole::LogSpace);
  j["transform"] = {{"pad", o.pad}, {"node_spacing", o.node_spacing}, {"nufft_tol", o.nufft_tol},
                    {"cg_tol", o.cg_tol}, {"cg_max_iter", o.cg_max_iter}};
  j["shape"] = {d.eta().n_lambda(), d.eta().n_m(), d.eta().n_n()};
  atomic_write(prefix + ".json", j.dump(2) + "\n");
}

HarmonicExpDist load_distribution(const std::string& prefix) {
  std::ifstream f(prefix + ".json");
  if (!f) throw std::runtime_error("cannot open " + prefix + ".json");
  const nlohmann::json j = nlohmann::json::parse(f);
  const GridSpec grid = j.at("grid").get<GridSpec>();
  TransformOptions o;
  const auto& t = j.at("transform");
  o.pad = t.at("pad").get<int>();
  o.node_spacing = t.at("node_spacing").get<double>();
  o.nufft_tol = t.at("nufft_tol").get<double>();
  o.cg_tol = t.at("cg_tol").get<double>();
  o.cg_max_iter = t.at("cg_max_iter").get<int>();
  auto tr = std::make_shared<const Se2Fourier>(grid, o);
  return from_natural_parameters(tr, load_spectrum(prefix + ".bin", SpectrumRole::LogSpace));
}

}  // namespace hef
