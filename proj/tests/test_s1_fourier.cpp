#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hef/s1_fourier.hpp"

using namespace hef;
constexpr double kPi = std::numbers::pi;

namespace {
std::vector<double> sample(int n, auto&& f) {
  std::vector<double> v;
  for (double t : s1_grid(n)) v.push_back(f(t));
  return v;
}
}  // namespace

TEST(S1, ConstantHasOnlyDc) {
  const S1Spectrum s = s1_analyze(sample(8, [](double) { return 1.0; }), 2);
  EXPECT_NEAR(std::abs(s[0] - std::complex<double>(2 * kPi, 0)), 0.0, 1e-12);
  for (int l : {-2, -1, 1, 2}) EXPECT_NEAR(std::abs(s[l]), 0.0, 1e-12);
}

TEST(S1, CosineSplitsIntoPlusMinusOne) {
  const S1Spectrum s = s1_analyze(sample(8, [](double t) { return std::cos(t); }), 2);
  EXPECT_NEAR(std::abs(s[1] - std::complex<double>(kPi, 0)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(s[-1] - std::complex<double>(kPi, 0)), 0.0, 1e-12);
  for (int l : {-2, 0, 2}) EXPECT_NEAR(std::abs(s[l]), 0.0, 1e-12);
}

TEST(S1, VonMisesRatioMatchesQuadrature) {
  const double kappa = 2.0;
  const S1Spectrum s = s1_analyze(sample(64, [&](double t) { return std::exp(kappa * std::cos(t)); }), 8);
  // independent oracle: midpoint quadrature of ∫exp(κ cos θ)cos θ / ∫exp(κ cos θ)
  const int n = 200000;
  double num = 0.0, den = 0.0;
  for (int k = 0; k < n; ++k) {
    const double t = (k + 0.5) * 2 * kPi / n;
    num += std::exp(kappa * std::cos(t)) * std::cos(t);
    den += std::exp(kappa * std::cos(t));
  }
  EXPECT_NEAR(s[1].real() / s[0].real(), num / den, 1e-10);
  EXPECT_NEAR(num / den, 0.697774657964008, 1e-12);  // I1(2)/I0(2)
}

TEST(S1, RealInputsGiveHermitianSpectra) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  std::vector<double> f(33);
  for (double& v : f) v = n01(rng);
  const S1Spectrum s = s1_analyze(f, 16);
  for (int l = 0; l <= 16; ++l) EXPECT_NEAR(std::abs(s[-l] - std::conj(s[l])), 0.0, 1e-10);
}

TEST(S1, DcOnlySynthesizesToOne) {
  S1Spectrum s;
  s.band_limit = 1;
  s.coeffs.assign(3, 0.0);
  s[0] = 2 * kPi;
  for (double v : s1_synthesize(s, {0.0, 0.7, 2.0, 5.9})) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST(S1, BandLimitedRoundTrip) {
  auto f = [](double t) { return 0.3 + std::cos(2 * t) - 0.5 * std::sin(5 * t) + 0.1 * std::cos(7 * t + 0.4); };
  const S1Spectrum s = s1_analyze(sample(17, f), 8);
  std::vector<double> pts;
  for (int k = 0; k < 101; ++k) pts.push_back(0.0617 * k);
  const auto g = s1_synthesize(s, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(g[i], f(pts[i]), 1e-9);
}

TEST(S1, VonMisesReconstructionOffGrid) {
  const double kappa = 4.0;
  const double z = 2 * kPi * std::cyl_bessel_i(0.0, kappa);
  auto vm = [&](double t) { return std::exp(kappa * std::cos(t)) / z; };
  const S1Spectrum s = s1_analyze(sample(64, vm), 16);
  std::vector<double> pts;
  for (int k = 0; k < 257; ++k) pts.push_back(2 * kPi * (k + 0.37) / 257);
  const auto g = s1_synthesize(s, pts);
  double err = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) err = std::max(err, std::abs(g[i] - vm(pts[i])));
  EXPECT_LE(err, 1e-6);
}

TEST(S1, RejectsAliasedBands) {
  EXPECT_THROW(s1_analyze(std::vector<double>(4, 1.0), 2), std::invalid_argument);
  EXPECT_NO_THROW(s1_analyze(std::vector<double>(5, 1.0), 2));
}

TEST(S1, NonHermitianSpectrumIsRejected) {
  S1Spectrum s;
  s.band_limit = 1;
  s.coeffs = {0.0, 0.0, {1.0, 0.0}};
  EXPECT_THROW(s1_synthesize(s, {0.0, 1.0}), std::exception);
}
