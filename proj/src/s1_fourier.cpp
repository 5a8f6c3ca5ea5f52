#include "hef/s1_fourier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hef/pose.hpp"

namespace hef {

S1Spectrum s1_analyze(const std::vector<double>& samples, int band_limit) {
  const int n = static_cast<int>(samples.size());
  if (band_limit < 0) throw std::invalid_argument("s1_analyze: negative band limit");
  if (n < 2 * band_limit + 1) {
    throw std::invalid_argument("s1_analyze: " + std::to_string(n) + " samples cannot resolve band limit " +
                                std::to_string(band_limit));
  }
  S1Spectrum out;
  out.band_limit = band_limit;
  out.coeffs.assign(2 * band_limit + 1, {0.0, 0.0});
  const double scale = kTwoPi / n;
  for (int lam = 0; lam <= band_limit; ++lam) {
    double re = 0.0, im = 0.0;
    for (int k = 0; k < n; ++k) {
      // reduce the phase index exactly before converting to an angle
      const double a = kTwoPi * static_cast<double>((static_cast<long>(lam) * k) % n) / n;
      re += samples[k] * std::cos(a);
      im -= samples[k] * std::sin(a);
    }
    out[lam] = {re * scale, im * scale};
    out[-lam] = std::conj(out[lam]);
  }
  return out;
}

std::vector<double> s1_synthesize(const S1Spectrum& spec, const std::vector<double>& points) {
  std::vector<double> out(points.size());
  double max_re = 0.0, max_im = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    std::complex<double> s{0.0, 0.0};
    for (int lam = -spec.band_limit; lam <= spec.band_limit; ++lam) {
      s += spec[lam] * std::polar(1.0, lam * points[k]);
    }
    s /= kTwoPi;
    out[k] = s.real();
    max_re = std::max(max_re, std::abs(s.real()));
    max_im = std::max(max_im, std::abs(s.imag()));
  }
  if (max_im > 1e-9 * std::max(max_re, 1e-300) && max_im > 1e-12) {
    throw std::runtime_error("s1_synthesize: spectrum is not conjugate-symmetric");
  }
  return out;
}

std::vector<double> s1_grid(int n) {
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) t[k] = kTwoPi * k / n;
  return t;
}

}  // namespace hef
