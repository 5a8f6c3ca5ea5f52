#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <stdexcept>

namespace hef::detail {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

FftPlan::FftPlan(std::vector<int> dims, int sign) {
  size_ = 1;
  for (int d : dims) size_ *= static_cast<std::size_t>(d);
  std::vector<cplx> a(size_), b(size_);
  std::lock_guard<std::mutex> lock(planner_mutex());
  plan_ = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(),
                        reinterpret_cast<fftw_complex*>(a.data()),
                        reinterpret_cast<fftw_complex*>(b.data()),
                        sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plan_) throw std::runtime_error("fftw: plan creation failed");
}

FftPlan::~FftPlan() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void FftPlan::execute(const cplx* in, cplx* out) const {
  fftw_execute_dft(static_cast<fftw_plan>(plan_),
                   reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

FftPlanMany::FftPlanMany(int n, int howmany, int sign) {
  std::vector<cplx> a(static_cast<std::size_t>(n) * howmany), b(a.size());
  std::lock_guard<std::mutex> lock(planner_mutex());
  plan_ = fftw_plan_many_dft(1, &n, howmany, reinterpret_cast<fftw_complex*>(a.data()), nullptr, 1, n,
                             reinterpret_cast<fftw_complex*>(b.data()), nullptr, 1, n,
                             sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plan_) throw std::runtime_error("fftw: plan creation failed");
}

FftPlanMany::~FftPlanMany() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void FftPlanMany::execute(const cplx* in, cplx* out) const {
  fftw_execute_dft(static_cast<fftw_plan>(plan_),
                   reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

RealFftPlan2d::RealFftPlan2d(int n1, int n2) : n1_(n1), n2_(n2) {
  std::vector<double> r(static_cast<std::size_t>(n1) * n2);
  std::vector<cplx> c(static_cast<std::size_t>(n1) * (n2 / 2 + 1));
  std::lock_guard<std::mutex> lock(planner_mutex());
  fwd_ = fftw_plan_dft_r2c_2d(n1, n2, r.data(), reinterpret_cast<fftw_complex*>(c.data()),
                              FFTW_ESTIMATE | FFTW_UNALIGNED);
  bwd_ = fftw_plan_dft_c2r_2d(n1, n2, reinterpret_cast<fftw_complex*>(c.data()), r.data(),
                              FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!fwd_ || !bwd_) throw std::runtime_error("fftw: plan creation failed");
}

RealFftPlan2d::~RealFftPlan2d() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
}

void RealFftPlan2d::forward(const double* in, cplx* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(fwd_), const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void RealFftPlan2d::backward(cplx* in, double* out) const {
  fftw_execute_dft_c2r(static_cast<fftw_plan>(bwd_), reinterpret_cast<fftw_complex*>(in), out);
}

int next_smooth(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

}  // namespace hef::detail
