#pragma once

#include <complex>
#include <vector>

namespace hef::detail {

using cplx = std::complex<double>;

// Unnormalized complex DFT of fixed shape. sign = -1 forward, +1 backward.
// Plans use FFTW_ESTIMATE so results do not depend on timing measurements;
// execution is reentrant, plan creation is serialized internally.
class FftPlan {
 public:
  FftPlan(std::vector<int> dims, int sign);
  ~FftPlan();
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  void execute(const cplx* in, cplx* out) const;
  std::size_t size() const { return size_; }

 private:
  void* plan_ = nullptr;
  std::size_t size_ = 0;
};

// Batched 1-D transforms of length n over `howmany` contiguous rows.
class FftPlanMany {
 public:
  FftPlanMany(int n, int howmany, int sign);
  ~FftPlanMany();
  FftPlanMany(const FftPlanMany&) = delete;
  FftPlanMany& operator=(const FftPlanMany&) = delete;

  void execute(const cplx* in, cplx* out) const;

 private:
  void* plan_ = nullptr;
};

// 2-D real-to-complex transform pair of shape n1×n2 (half spectrum n1×(n2/2+1)).
// backward() is unnormalized and overwrites its input.
class RealFftPlan2d {
 public:
  RealFftPlan2d(int n1, int n2);
  ~RealFftPlan2d();
  RealFftPlan2d(const RealFftPlan2d&) = delete;
  RealFftPlan2d& operator=(const RealFftPlan2d&) = delete;

  void forward(const double* in, cplx* out) const;
  void backward(cplx* in, double* out) const;
  int n1() const { return n1_; }
  int n2() const { return n2_; }
  int n2_half() const { return n2_ / 2 + 1; }

 private:
  int n1_, n2_;
  void* fwd_ = nullptr;
  void* bwd_ = nullptr;
};

// Smallest integer >= n whose only prime factors are 2, 3, 5.
int next_smooth(int n);

}  // namespace hef::detail
