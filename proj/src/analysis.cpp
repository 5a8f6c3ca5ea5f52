#include "hef/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "hef/harmonic_distribution.hpp"
#include "hef/s1_fourier.hpp"

namespace hef {

double bessel_i0(double x) { return std::cyl_bessel_i(0.0, std::abs(x)); }

double bessel_i0e(double x) {
  x = std::abs(x);
  if (x < 500.0) return std::cyl_bessel_i(0.0, x) * std::exp(-x);
  // asymptotic series, terms ((2k−1)!!)² / (k!·(8x)^k)
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 12; ++k) {
    term *= (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
    sum += term;
  }
  return sum / std::sqrt(kTwoPi * x);
}

void VonMisesMixture::validate() const {
  if (components.empty()) throw std::invalid_argument("von Mises mixture has no components");
  double s = 0.0;
  for (const auto& c : components) {
    if (!(c.kappa >= 0.0) || !std::isfinite(c.kappa)) throw std::invalid_argument("von Mises: invalid kappa");
    if (!(c.weight >= 0.0)) throw std::invalid_argument("von Mises: negative weight");
    s += c.weight;
  }
  if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("von Mises: weights must sum to 1");
}

std::vector<double> vm_mixture_density(const VonMisesMixture& mix, const std::vector<double>& theta) {
  mix.validate();
  std::vector<double> out(theta.size(), 0.0);
  for (const auto& c : mix.components) {
    // exp(κ(cos − 1)) / (2π·I0(κ)·e^{−κ}) keeps large κ finite
    const double norm = c.weight / (kTwoPi * bessel_i0e(c.kappa));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      out[i] += norm * std::exp(c.kappa * (std::cos(theta[i] - c.mu) - 1.0));
    }
  }
  return out;
}

VonMisesMixture default_mixture(double kappa) {
  return {{{-0.25 * M_PI, kappa, 0.5}, {0.5 * M_PI, kappa, 0.5}}};
}

namespace {

double kl_s1(const std::vector<double>& p, const std::vector<double>& q) {
  return kl_divergence(p, q, kTwoPi / static_cast<double>(p.size()));
}

void normalize_s1(std::vector<double>& f) {
  double s = 0.0;
  for (double v : f) s += v;
  s *= kTwoPi / static_cast<double>(f.size());
  for (double& v : f) v /= s;
}

}  // namespace

std::vector<double> histogram_fit(const std::vector<double>& truth, int bins) {
  if (bins < 2) throw std::invalid_argument("histogram fit needs at least 2 bins");
  const int n = static_cast<int>(truth.size());
  std::vector<double> sum(bins, 0.0);
  std::vector<int> cnt(bins, 0);
  std::vector<int> bin_of(n);
  for (int i = 0; i < n; ++i) {
    bin_of[i] = std::min(bins - 1, static_cast<int>(static_cast<long long>(i) * bins / n));
    sum[bin_of[i]] += truth[i];
    ++cnt[bin_of[i]];
  }
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = sum[bin_of[i]] / cnt[bin_of[i]];
  normalize_s1(out);
  return out;
}

std::vector<double> hed_fit(const std::vector<double>& truth, int params) {
  if (params < 2) throw std::invalid_argument("HED fit needs at least 2 parameters");
  const int band = (params - 1) / 2;
  std::vector<double> logf(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) logf[i] = std::log(std::max(truth[i], 1e-300));
  const S1Spectrum spec = s1_analyze(logf, band);
  std::vector<double> out = s1_synthesize(spec, s1_grid(static_cast<int>(truth.size())));
  const double mx = *std::max_element(out.begin(), out.end());
  for (double& v : out) v = std::exp(v - mx);
  normalize_s1(out);
  return out;
}

std::vector<FidelityRow> fidelity_sweep(const std::vector<int>& params, const std::vector<double>& kappas, int fine) {
  if (fine < 4096) throw std::invalid_argument("fidelity sweep needs at least 4096 quadrature points");
  const std::vector<double> th = s1_grid(fine);
  std::vector<FidelityRow> rows;
  for (double kappa : kappas) {
    std::vector<double> truth = vm_mixture_density(default_mixture(kappa), th);
    normalize_s1(truth);
    for (int p : params) {
      if (p < 2) throw std::invalid_argument("fidelity sweep: parameter counts must be at least 2");
      rows.push_back({"hist", p, kappa, kl_s1(truth, histogram_fit(truth, p))});
      rows.push_back({"hed", p, kappa, kl_s1(truth, hed_fit(truth, p))});
    }
  }
  return rows;
}

int bench_pad(int n) { return n <= 20 ? 2 : 1; }

DensityGrid bench_density_a(const GridSpec& g) {
  const double s = 1.5 * g.dx();
  DensityGrid a(g);
  for (int ix = 0; ix < g.nx; ++ix) {
    for (int iy = 0; iy < g.ny; ++iy) {
      const double r2 = g.x(ix) * g.x(ix) + g.y(iy) * g.y(iy);
      for (int it = 0; it < g.ntheta; ++it) {
        a.at(ix, iy, it) = std::exp(-r2 / (2.0 * s * s)) * (1.0 + 0.3 * std::cos(g.theta(it)));
      }
    }
  }
  a.normalize();
  return a;
}

double bench_density_b(const GridSpec& g, const Pose& p) {
  const double s = 1.1 * g.dx();
  const double norm = 1.0 / (kTwoPi * s * s * kTwoPi);
  return norm * std::exp(-(p.x * p.x + p.y * p.y) / (2.0 * s * s)) * (1.0 + 0.3 * std::sin(p.theta));
}

std::vector<BenchRow> bench_convolution(const std::vector<int>& sizes, int ntheta, int reps, double gate) {
  if (reps < 1) throw std::invalid_argument("benchmark: reps must be at least 1");
  using clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  for (int n : sizes) {
    const GridSpec g(n, n, ntheta, -0.5, 0.5, -0.5, 0.5);
    g.validate();
    TransformOptions opts;
    opts.pad = bench_pad(n);
    const Se2Fourier tr(g, opts);
    const DensityGrid a = bench_density_a(g);
    DensityGrid bgrid(g);
    for (std::size_t i = 0; i < g.size(); ++i) bgrid[i] = bench_density_b(g, g.pose(i));
    auto b = [&g](const Pose& p) { return bench_density_b(g, p); };

    auto spectral = [&] {
      const Se2Spectrum ma = tr.analyze(a, SpectrumRole::ProbSpace);
      const Se2Spectrum mb = tr.analyze(bgrid, SpectrumRole::ProbSpace);
      return tr.synthesize(spectral_convolve(ma, mb));
    };
    auto direct = [&] { return direct_convolve(a, b); };

    const DensityGrid cs = spectral();
    const DensityGrid cd = direct();
    const double err = max_abs_diff(cs, cd);
    if (!(err <= gate)) {
      throw std::runtime_error("benchmark: spectral and direct results differ by " + std::to_string(err) +
                               " at size " + std::to_string(n));
    }
    auto median_time = [&](auto&& fn) {
      std::vector<double> t;
      for (int r = 0; r < reps; ++r) {
        const auto t0 = clock::now();
        const DensityGrid out = fn();
        t.push_back(std::chrono::duration<double>(clock::now() - t0).count());
        if (out.size() == 0) throw std::logic_error("empty result");
      }
      std::sort(t.begin(), t.end());
      return t[t.size() / 2];
    };
    rows.push_back({"direct", n, n, ntheta, median_time(direct), err});
    rows.push_back({"spectral", n, n, ntheta, median_time(spectral), err});
  }
  return rows;
}

}  // namespace hef
