#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <memory>
#include <random>

#include "hef/harmonic_distribution.hpp"

using namespace hef;

namespace {

GridSpec g16() { return GridSpec(16, 16, 8, -0.5, 0.5, -0.5, 0.5); }

TransformPtr make_tr(const GridSpec& g, int pad = 1) {
  TransformOptions o;
  o.pad = pad;
  return std::make_shared<const Se2Fourier>(g, o);
}

DensityGrid log_bump(const GridSpec& g, double cx, double cy, double s, double kappa, double mu) {
  DensityGrid f(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Pose p = g.pose(i);
    f[i] = -((p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy)) / (2 * s * s) + kappa * std::cos(p.theta - mu);
  }
  return f;
}

DensityGrid log_wave(const GridSpec& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
  DensityGrid f(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Pose p = g.pose(i);
    f[i] = a * std::cos(kTwoPi * p.x) + b * std::sin(kTwoPi * p.y + p.theta) + c * std::cos(p.theta) +
           d * std::cos(kTwoPi * (p.x - p.y));
  }
  return f;
}

}  // namespace

TEST(HarmonicExpDist, NormalizedDensity) {
  const auto tr = make_tr(g16());
  const HarmonicExpDist d = fit_from_log_density(tr, log_bump(g16(), 0.1, -0.05, 0.1, 2.0, 1.0));
  const DensityGrid p = d.evaluate();
  EXPECT_TRUE(p.normalized());
  EXPECT_NEAR(p.integral(), 1.0, 1e-6);
  for (double v : p.values()) EXPECT_GE(v, 0.0);
}

TEST(HarmonicExpDist, UniformNormalizerIsTotalMeasure) {
  const GridSpec g = g16();
  const auto tr = make_tr(g);
  const HarmonicExpDist d = fit_from_log_density(tr, DensityGrid(g, 0.0));
  EXPECT_NEAR(std::exp(d.log_z()), g.total_measure(), 1e-9);
  const HarmonicExpDist e = from_natural_parameters(tr, tr->zero(SpectrumRole::LogSpace));
  EXPECT_NEAR(std::exp(e.log_z()), g.total_measure(), 1e-9);
  // a constant shift of ln φ only moves log Z
  const HarmonicExpDist s = fit_from_log_density(tr, DensityGrid(g, 3.0));
  EXPECT_NEAR(s.log_z(), 3.0 + std::log(g.total_measure()), 1e-12);
  EXPECT_LE(max_abs_diff(s.evaluate(), d.evaluate()), 1e-12);
}

TEST(HarmonicExpDist, RejectsNonFiniteAndWrongRole) {
  const GridSpec g = g16();
  const auto tr = make_tr(g);
  DensityGrid f(g, 0.0);
  f[5] = std::nan("");
  EXPECT_THROW(fit_from_log_density(tr, f), std::invalid_argument);
  f[5] = -INFINITY;
  EXPECT_THROW(fit_from_log_density(tr, f), std::invalid_argument);
  EXPECT_THROW(from_natural_parameters(tr, tr->zero(SpectrumRole::ProbSpace)), std::invalid_argument);
  EXPECT_THROW(fit_from_log_density(tr, DensityGrid(GridSpec(8, 8, 8, -0.5, 0.5, -0.5, 0.5), 0.0)),
               std::invalid_argument);
}

TEST(HarmonicExpDist, NaturalParametersRoundTrip) {
  const auto tr = make_tr(g16());
  const HarmonicExpDist d = fit_from_log_density(tr, log_wave(g16(), 3));
  const HarmonicExpDist e = from_natural_parameters(tr, d.eta());
  EXPECT_LE(max_abs_diff(e.log_phi(), d.log_phi()), 1e-9);
  EXPECT_NEAR(e.log_z(), d.log_z(), 1e-9);
}

TEST(HarmonicExpDist, ProductMatchesPointwiseOracle) {
  const GridSpec g = g16();
  const auto tr = make_tr(g);
  for (std::uint64_t seed : {1, 2, 3}) {
    const HarmonicExpDist a = fit_from_log_density(tr, log_wave(g, seed));
    const HarmonicExpDist b = fit_from_log_density(tr, log_wave(g, seed + 10));
    DensityGrid oracle(g);
    const DensityGrid pa = a.evaluate(), pb = b.evaluate();
    for (std::size_t i = 0; i < g.size(); ++i) oracle[i] = pa[i] * pb[i];
    oracle.normalize();
    EXPECT_LE(max_abs_diff(product(a, b).evaluate(), oracle), 1e-6);
    // the same result through explicit coefficient addition
    const HarmonicExpDist viaeta = from_natural_parameters(tr, a.eta() + b.eta());
    EXPECT_LE(max_abs_diff(viaeta.evaluate(), oracle), 1e-6);
    EXPECT_LE(max_abs_diff(product(a, b).evaluate(), product(b, a).evaluate()), 1e-12);
  }
}

TEST(HarmonicExpDist, ProductWithUniformIsIdentity) {
  const GridSpec g = g16();
  const auto tr = make_tr(g);
  const HarmonicExpDist a = fit_from_log_density(tr, log_bump(g, 0.0, 0.1, 0.12, 1.0, 2.0));
  const HarmonicExpDist u = fit_from_log_density(tr, DensityGrid(g, -1.7));
  EXPECT_LE(max_abs_diff(product(a, u).evaluate(), a.evaluate()), 1e-9);
}

TEST(HarmonicExpDist, ConvolutionMatchesDirectOracle) {
  const GridSpec g = g16();
  const auto tr = make_tr(g, 2);
  const double s = 1.5 * g.dx();
  const HarmonicExpDist a = fit_from_log_density(tr, log_bump(g, 0.5 * g.dx(), 0.0, s, 0.5, 0.0));
  const HarmonicExpDist b = fit_from_log_density(tr, log_bump(g, 0.0, -0.5 * g.dy(), s, 0.3, 1.0));
  const double zb = b.log_z();
  auto bf = [&](const Pose& p) {
    return std::exp(-(p.x * p.x + (p.y + 0.5 * g.dy()) * (p.y + 0.5 * g.dy())) / (2 * s * s) +
                    0.3 * std::cos(p.theta - 1.0) - zb);
  };
  const DensityGrid direct = direct_convolve(a.evaluate(), bf);
  const HarmonicExpDist c = convolve(a, b);
  DensityGrid cd = direct;
  cd.normalize();
  EXPECT_LE(max_abs_diff(c.evaluate(), cd), 1e-5);
  EXPECT_NEAR(c.evaluate().integral(), 1.0, 1e-9);
}

TEST(HarmonicExpDist, ExpectedIurDcIsOne) {
  const auto tr = make_tr(g16());
  const HarmonicExpDist d = fit_from_log_density(tr, log_wave(g16(), 9));
  const Se2Spectrum m = expected_iur(d);
  EXPECT_EQ(m.role(), SpectrumRole::ProbSpace);
  EXPECT_NEAR(std::abs(m(0, 0, 0) - cplx(1.0, 0.0)), 0.0, 1e-9);
}

TEST(HarmonicExpDist, MeanAndModeOfBump) {
  const GridSpec g(20, 20, 16, -0.5, 0.5, -0.5, 0.5);
  const auto tr = make_tr(g);
  const HarmonicExpDist d = fit_from_log_density(tr, log_bump(g, 0.1, -0.05, 0.06, 4.0, g.theta(3)));
  const PoseEstimate m = mean_pose(d);
  EXPECT_NEAR(m.pose.x, 0.1, 1e-3);
  EXPECT_NEAR(m.pose.y, -0.05, 1e-3);
  EXPECT_NEAR(angdiff(m.pose.theta, g.theta(3)), 0.0, 1e-9);
  EXPECT_TRUE(m.orientation_defined);
  EXPECT_NEAR(m.planar_cov(0, 0), 0.06 * 0.06, 2e-4);
  const Pose mode = mode_pose(d);
  EXPECT_NEAR(mode.x, 0.1, 1e-12);
  EXPECT_NEAR(mode.y, -0.05, 1e-12);
  EXPECT_NEAR(mode.theta, g.theta(3), 1e-12);
}

TEST(HarmonicExpDist, UndefinedHeadingForUniformTheta) {
  const GridSpec g = g16();
  const auto tr = make_tr(g);
  const HarmonicExpDist d = fit_from_log_density(tr, log_bump(g, 0.0, 0.0, 0.1, 0.0, 0.0));
  EXPECT_FALSE(mean_pose(d).orientation_defined);
}

TEST(HarmonicExpDist, ModeTiesGoToLowestIndex) {
  const GridSpec g(4, 4, 4, -0.5, 0.5, -0.5, 0.5);
  DensityGrid v(g, 0.0);
  v[9] = 2.0;
  v[3] = 2.0;
  v[40] = 2.0 * (1.0 + 1e-14);
  EXPECT_EQ(mode_index(v), 3u);
  v[40] = 2.5;
  EXPECT_EQ(mode_index(v), 40u);
}

TEST(KlDivergence, ClosedForm) {
  const GridSpec g(4, 4, 4, -0.5, 0.5, -0.5, 0.5);
  DensityGrid p(g, 1.0), q(g, 0.0);
  p.normalize();
  const double p0 = p[0];
  for (std::size_t i = 0; i < g.size(); ++i) q[i] = (i % 2 == 0) ? 1.5 * p0 : 0.5 * p0;
  EXPECT_NEAR(kl_divergence(p, q), 0.5 * std::log(1 / 1.5) + 0.5 * std::log(1 / 0.5), 1e-14);
  EXPECT_EQ(kl_divergence(p, p), 0.0);
  // zeros in q are floored instead of producing infinity
  q[0] = 0.0;
  EXPECT_TRUE(std::isfinite(kl_divergence(p, q)));
}

TEST(HarmonicExpDist, SaveLoadRoundTrip) {
  const auto tr = make_tr(g16());
  const HarmonicExpDist d = fit_from_log_density(tr, log_wave(g16(), 4));
  const auto dir = std::filesystem::temp_directory_path() / "hef_dist_test";
  save_distribution(d, (dir / "belief").string());
  const HarmonicExpDist e = load_distribution((dir / "belief").string());
  EXPECT_EQ(e.grid(), d.grid());
  EXPECT_LE(max_abs_diff(e.evaluate(), d.evaluate()), 1e-9);
  std::filesystem::remove_all(dir);
}
