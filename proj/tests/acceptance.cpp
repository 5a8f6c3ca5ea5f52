// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Criterion 7 runs the default config (10 seeds).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "hef/analysis.hpp"
#include "hef/experiments.hpp"
#include "hef/s1_fourier.hpp"

using namespace hef;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Defaults {
  GridSpec grid;
  SimConfig sim;
  std::map<FilterKind, FilterParams> filters;
  BananaConfig banana;
  std::size_t oracle_particles = 1000000;
  std::uint64_t banana_seed = 0;
  std::uint64_t seed = 0;
  int seeds = 10;
};

Defaults load_defaults() {
  std::ifstream f(HEF_DEFAULT_CONFIG);
  if (!f) throw std::runtime_error("cannot open " HEF_DEFAULT_CONFIG);
  const json j = json::parse(f);
  Defaults d;
  d.grid = j.at("grid").get<GridSpec>();
  json sim = j.at("sim");
  sim["grid"] = d.grid;
  d.sim = sim_config_from_json(sim);
  for (auto it = j.at("filters").begin(); it != j.at("filters").end(); ++it) {
    d.filters[parse_filter(it.key())] = filter_params_from_json(it.value());
  }
  const json& b = j.at("banana");
  d.banana.n_steps = b.at("n_steps");
  d.banana.step = b.at("step");
  d.banana.sigma_trans = b.at("sigma_trans");
  d.banana.sigma_rot = b.at("sigma_rot");
  const auto& r = b.at("prior_rect");
  for (std::size_t i = 0; i < r.size(); ++i) d.banana.prior_rect[i] = r[i];
  d.banana.grid = d.grid;
  d.oracle_particles = b.at("oracle_particles");
  d.banana_seed = b.at("seed");
  d.seed = j.at("run").at("seed");
  d.seeds = j.at("run").at("seeds");
  return d;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

DensityGrid sample(const GridSpec& g, const std::function<double(const Pose&)>& f) {
  DensityGrid out(g);
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = f(g.pose(i));
  return out;
}

// Normalized Gaussian bump with a heading profile 1 + tilt·cos(θ − phase).
// σ stays at or below 1.6 cells so the tails are negligible at the box edge.
std::function<double(const Pose&)> random_bump(const GridSpec& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double d = g.dx();
  const double cx = 0.5 * d * u(rng), cy = 0.5 * d * u(rng);
  const double s = (1.425 + 0.175 * u(rng)) * d;
  const double tilt = 0.4 * u(rng), phase = std::numbers::pi * u(rng);
  const double norm = 1.0 / (kTwoPi * s * s * kTwoPi);
  return [=](const Pose& p) {
    const double r2 = (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy);
    return norm * std::exp(-r2 / (2 * s * s)) * (1.0 + tilt * std::cos(p.theta - phase));
  };
}

Outcome c1_convolution() {
  const GridSpec g(16, 16, 8, -0.5, 0.5, -0.5, 0.5);
  TransformOptions o;
  o.pad = 2;
  const Se2Fourier tr(g, o);
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const DensityGrid a = sample(g, random_bump(g, rng));
    const auto bf = random_bump(g, rng);
    const DensityGrid b = sample(g, bf);
    const DensityGrid spec =
        tr.synthesize(spectral_convolve(tr.analyze(a, SpectrumRole::ProbSpace), tr.analyze(b, SpectrumRole::ProbSpace)));
    worst = std::max(worst, max_abs_diff(spec, direct_convolve(a, bf)));
  }
  return {worst <= 1e-5, "max abs err " + num(worst) + " (<= 1e-5) over 20 pairs"};
}

Outcome c2_product() {
  const GridSpec g(16, 16, 8, -0.5, 0.5, -0.5, 0.5);
  const auto tr = std::make_shared<const Se2Fourier>(g);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double a0 = u(rng), a1 = u(rng), a2 = u(rng), b0 = u(rng), b1 = u(rng), b2 = u(rng);
    // log-densities built from low harmonics of the box and the circle
    const DensityGrid la = sample(g, [&](const Pose& p) {
      return a0 * std::cos(kTwoPi * p.x) + a1 * std::sin(kTwoPi * p.y) + a2 * std::cos(p.theta);
    });
    const DensityGrid lb = sample(g, [&](const Pose& p) {
      return b0 * std::sin(kTwoPi * (p.x + p.y)) + b1 * std::cos(p.theta - 1.0) + b2 * std::cos(2 * p.theta);
    });
    const HarmonicExpDist A = fit_from_log_density(tr, la), B = fit_from_log_density(tr, lb);
    const HarmonicExpDist viaeta = from_natural_parameters(tr, A.eta() + B.eta());
    const DensityGrid pa = A.evaluate(), pb = B.evaluate();
    DensityGrid oracle(g);
    for (std::size_t i = 0; i < g.size(); ++i) oracle[i] = pa[i] * pb[i];
    oracle.normalize();
    worst = std::max({worst, max_abs_diff(product(A, B).evaluate(), oracle), max_abs_diff(viaeta.evaluate(), oracle)});
  }
  return {worst <= 1e-6, "max abs err " + num(worst) + " (<= 1e-6)"};
}

Outcome c3_round_trip() {
  // S¹: band-limited trigonometric polynomial, band 6, 32 samples, evaluated off-grid
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> c(13);
  for (double& v : c) v = u(rng);
  auto f1 = [&](double t) {
    double s = 3.0 + c[0];
    for (int k = 1; k <= 6; ++k) s += c[2 * k - 1] * std::cos(k * t) + c[2 * k] * std::sin(k * t);
    return s;
  };
  const std::vector<double> th = s1_grid(32);
  std::vector<double> samples;
  for (double t : th) samples.push_back(f1(t));
  std::vector<double> probe;
  for (int i = 0; i < 101; ++i) probe.push_back(0.0617 * i);
  const std::vector<double> back = s1_synthesize(s1_analyze(samples, 6), probe);
  double e1 = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) e1 = std::max(e1, std::abs(back[i] - f1(probe[i])));

  // SE(2), 16×16×8: smooth positive function through analyze → synthesize
  const GridSpec g(16, 16, 8, -0.5, 0.5, -0.5, 0.5);
  const Se2Fourier tr(g);
  double e2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double p = u(rng), q = u(rng), r = u(rng);
    const DensityGrid f = sample(g, [&](const Pose& x) {
      return 2.0 + p * std::cos(kTwoPi * x.x) + q * std::sin(kTwoPi * x.y) * std::cos(x.theta) +
             0.5 * r * std::cos(2 * kTwoPi * x.x + x.theta);
    });
    const DensityGrid b = tr.synthesize(tr.analyze(f, SpectrumRole::LogSpace));
    for (std::size_t i = 0; i < f.size(); ++i) e2 = std::max(e2, std::abs(b[i] - f[i]) / std::abs(f[i]));
  }
  return {e1 <= 1e-9 && e2 <= 1e-3, "S1 max err " + num(e1) + " (<= 1e-9), SE2 max rel err " + num(e2) + " (<= 1e-3)"};
}

Outcome c4_banana(const Defaults& D) {
  const Dataset d = banana_scenario(D.banana);
  const MapTransform mt = d.transform();
  const DiffDriveModel gm{D.banana.sigma_trans * mt.scale, D.banana.sigma_rot};
  const DensityGrid oracle = particle_oracle(d, gm, D.oracle_particles, D.banana_seed);
  FilterParams p = D.filters.at(FilterKind::HEF);
  p.sigma_trans = D.banana.sigma_trans;
  p.sigma_rot = D.banana.sigma_rot;
  auto tv = [&](FilterKind k) {
    DensityGrid last;
    run_filter(k, d, p, D.banana_seed, nullptr, [&](int, const DensityGrid& b) { last = b; });
    return total_variation(last, oracle);
  };
  const double hef = tv(FilterKind::HEF), hist = tv(FilterKind::HistF);
  return {hef <= 0.1 && hist >= 2.0 * hef,
          "TV hef " + num(hef) + " (<= 0.1), histf " + num(hist) + " (>= 2x hef = " + num(2 * hef) + ")"};
}

Outcome c5_fidelity() {
  const auto rows = fidelity_sweep({8, 16, 32, 64}, {1, 2, 4, 8});
  int ok = 0, n = 0;
  double worst_ratio = 0.0;
  for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
    const FidelityRow& h = rows[i];
    const FidelityRow& e = rows[i + 1];
    if (h.method != "hist" || e.method != "hed") return {false, "unexpected row order"};
    ++n;
    if (e.kl < h.kl) ++ok;
    worst_ratio = std::max(worst_ratio, e.kl / h.kl);
  }
  return {ok == n && n == 16, std::to_string(ok) + "/" + std::to_string(n) +
                                  " cells with KL(hed) < KL(hist); worst ratio " + num(worst_ratio)};
}

Outcome c6_bench() {
  const auto rows = bench_convolution({10, 20, 40}, 8, 3);
  std::vector<double> speedup;
  for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
    const BenchRow* dir = rows[i].method == "direct" ? &rows[i] : &rows[i + 1];
    const BenchRow* sp = rows[i].method == "direct" ? &rows[i + 1] : &rows[i];
    speedup.push_back(dir->seconds / sp->seconds);
  }
  bool increasing = true;
  for (std::size_t i = 1; i < speedup.size(); ++i) increasing = increasing && speedup[i] > speedup[i - 1];
  return {speedup.size() == 3 && speedup.back() >= 50.0 && increasing,
          "speedup 10/20/40: " + num(speedup[0]) + " " + num(speedup[1]) + " " + num(speedup[2]) +
              " (>= 50 at 40, strictly increasing)"};
}

Outcome c7_simulation(const Defaults& D) {
  std::map<FilterKind, std::vector<MetricsReport>> m;
  const auto tr = std::make_shared<const Se2Fourier>(D.grid, D.filters.at(FilterKind::HEF).transform);
  for (int k = 0; k < D.seeds; ++k) {
    const std::uint64_t s = D.seed + k;
    const Dataset d = simulate_range_world(D.sim, s);
    for (FilterKind f : {FilterKind::HEF, FilterKind::EKF, FilterKind::HistF, FilterKind::PF}) {
      m[f].push_back(run_filter(f, d, D.filters.at(f), s, f == FilterKind::HEF ? tr : nullptr).metrics);
    }
  }
  std::map<FilterKind, double> nll, ate;
  for (auto& [f, v] : m) {
    for (const auto& r : v) {
      nll[f] += r.nll / v.size();
      ate[f] += r.ate_mode / v.size();
    }
  }
  bool lowest = true;
  double best_other_ate = INFINITY;
  std::string detail;
  for (FilterKind f : {FilterKind::HEF, FilterKind::EKF, FilterKind::HistF, FilterKind::PF}) {
    detail += std::string(filter_name(f)) + " nll " + num(nll[f]) + " ate " + num(ate[f]) + "; ";
    if (f == FilterKind::HEF) continue;
    lowest = lowest && nll[FilterKind::HEF] < nll[f];
    best_other_ate = std::min(best_other_ate, ate[f]);
  }
  const bool ate_ok = ate[FilterKind::HEF] <= 2.0 * best_other_ate;
  return {lowest && ate_ok, detail + "hef lowest nll: " + (lowest ? "yes" : "no") +
                                ", hef ate <= 2x best other (" + num(2 * best_other_ate) + "): " + (ate_ok ? "yes" : "no")};
}

Outcome c8_closed_forms() {
  const GridSpec g(16, 16, 8, -0.5, 0.5, -0.5, 0.5);
  const auto tr = std::make_shared<const Se2Fourier>(g);
  const HarmonicExpDist uni = fit_from_log_density(tr, DensityGrid(g, 0.0));
  const double nll = nll_term(uni.evaluate()[g.nearest_index(Pose(0.1, -0.2, 1.0))]);
  const double e_nll = std::abs(nll - std::log(kTwoPi));
  const double e_z = std::abs(std::exp(uni.log_z()) - g.total_measure());
  const DensityGrid lb = sample(g, [](const Pose& p) { return std::cos(kTwoPi * p.x) + 0.5 * std::sin(p.theta); });
  const HarmonicExpDist bel = fit_from_log_density(tr, lb);
  const double e_id = max_abs_diff(update(bel, DensityGrid(g, -2.5)).evaluate(), bel.evaluate());
  const bool ok = e_nll <= 1e-9 && e_z <= 1e-9 && e_id <= 1e-9;
  return {ok, "|NLL - ln 2pi| " + num(e_nll) + ", uniform-update err " + num(e_id) + ", |Z - measure| " + num(e_z) +
                  " (all <= 1e-9)"};
}

Outcome c9_consistency(const Defaults& D) {
  // gently curving path past three landmarks, tight Gaussian prior
  Dataset d;
  d.grid = D.grid;
  d.map.landmarks = {{0, -0.3, 0.3}, {1, 0.3, 0.3}, {2, 0.0, -0.35}};
  d.prior.kind = PriorSpec::Kind::Gaussian;
  d.prior.mean = Pose(-0.2, -0.1, 0.3);
  d.prior.sigma_xy = 0.03;
  d.prior.sigma_theta = 0.1;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01(0.0, 1.0);
  Pose gt = d.prior.mean;
  const ControlInput u{0.04, 0.0, 0.05};
  for (int t = 1; t <= 10; ++t) {
    DatasetStep s;
    s.t = t;
    s.u = u;
    gt = compose(gt, u.as_pose());
    s.gt = gt;
    const Landmark& L = d.map.landmarks[(t - 1) % 3];
    s.z.push_back({MeasurementKind::Range, std::hypot(gt.x - L.x, gt.y - L.y) + 0.03 * n01(rng), L.id, 0.03});
    d.steps.push_back(s);
  }
  d.validate();
  FilterParams p;
  p.sigma_trans = 0.01;
  p.sigma_rot = 0.05;
  p.n_particles = D.filters.at(FilterKind::PF).n_particles;
  p.transform = D.filters.at(FilterKind::HEF).transform;
  std::vector<std::vector<Pose>> est;
  for (FilterKind f : {FilterKind::HEF, FilterKind::EKF, FilterKind::HistF, FilterKind::PF}) {
    std::vector<Pose> e;
    for (const auto& r : run_filter(f, d, p, 1).records) e.push_back(r.mean);
    est.push_back(e);
  }
  const double cell = d.grid.dx() / d.transform().scale;  // one grid cell in map units
  double worst = 0.0;
  for (std::size_t a = 0; a < est.size(); ++a) {
    for (std::size_t b = a + 1; b < est.size(); ++b) {
      for (std::size_t t = 0; t < est[a].size(); ++t) {
        worst = std::max(worst, std::hypot(est[a][t].x - est[b][t].x, est[a][t].y - est[b][t].y) / cell);
      }
    }
  }
  return {worst <= 2.0, "max pairwise mean distance " + num(worst) + " cells (<= 2)"};
}

}  // namespace

int main(int argc, char** argv) {
  // optional arguments select criteria by number; default is all
  std::vector<bool> want(10, argc == 1);
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k >= 1 && k <= 9) want[k] = true;
  }
  const Defaults D = load_defaults();
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks = {
      {"spectral convolution vs direct quadrature", c1_convolution},
      {"product by coefficient addition", c2_product},
      {"transform round trip", c3_round_trip},
      {"banana distribution vs particle oracle", [&] { return c4_banana(D); }},
      {"von Mises fidelity sweep", c5_fidelity},
      {"convolution runtime benchmark", c6_bench},
      {"simulated range-only experiment", [&] { return c7_simulation(D); }},
      {"closed-form checks", c8_closed_forms},
      {"cross-filter consistency", [&] { return c9_consistency(D); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    if (!want[i + 1]) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, checks[i].first, o.detail.c_str(), sec);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
