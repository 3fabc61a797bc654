#include "cmwd/correlation.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace cmwd {
namespace {

// FFTW planning is not thread-safe; execution on distinct buffers is.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  std::pair<fftw_plan, fftw_plan> get(int n) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    CVector in(n), out(n);
    auto* pin = reinterpret_cast<fftw_complex*>(in.data());
    auto* pout = reinterpret_cast<fftw_complex*>(out.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan fwd = fftw_plan_dft_1d(n, pin, pout, FFTW_FORWARD, flags);
    fftw_plan bwd = fftw_plan_dft_1d(n, pin, pout, FFTW_BACKWARD, flags);
    if (fwd == nullptr || bwd == nullptr) throw std::runtime_error("fftw: planning failed");
    plans_.emplace(n, std::make_pair(fwd, bwd));
    return {fwd, bwd};
  }

  ~PlanCache() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.first);
      fftw_destroy_plan(p.second);
    }
  }

 private:
  std::mutex mutex_;
  std::map<int, std::pair<fftw_plan, fftw_plan>> plans_;
};

CVector transform(const CVector& in, bool forward) {
  const int n = static_cast<int>(in.size());
  auto [fwd, bwd] = PlanCache::instance().get(n);
  CVector src = in;
  CVector out(n);
  fftw_execute_dft(forward ? fwd : bwd, reinterpret_cast<fftw_complex*>(src.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

CVector padded(const CVector& v, int n) {
  CVector out = CVector::Zero(n);
  out.head(v.size()) = v;
  return out;
}

}  // namespace

int fft_size_for(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

CVector cross_correlation(const CVector& a, const CVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cross_correlation: length mismatch");
  const int L = static_cast<int>(a.size());
  if (L == 0) return CVector();
  const int n = fft_size_for(2 * L - 1);
  const CVector fa = transform(padded(a, n), true);
  const CVector fb = transform(padded(b, n), true);
  // IFFT(conj(FA) FB)[tau] = sum_i conj(a[i]) b[i + tau]; conjugate to get c[tau].
  const CVector r = transform(fa.conjugate().cwiseProduct(fb), false);
  CVector c(2 * L - 1);
  for (int tau = -(L - 1); tau <= L - 1; ++tau)
    c(lag_index(tau, L)) = std::conj(r((tau + n) % n)) / static_cast<double>(n);
  return c;
}

CVector cross_correlation_direct(const CVector& a, const CVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cross_correlation: length mismatch");
  const int L = static_cast<int>(a.size());
  CVector c = CVector::Zero(std::max(2 * L - 1, 0));
  for (int tau = -(L - 1); tau <= L - 1; ++tau) {
    cdouble s = 0.0;
    for (int i = std::max(0, -tau); i < std::min(L, L - tau); ++i) s += a(i) * std::conj(b(i + tau));
    c(lag_index(tau, L)) = s;
  }
  return c;
}

CVector lag_convolve(const CVector& mask, const CVector& s) {
  const int L = static_cast<int>(s.size());
  if (mask.size() != 2 * L - 1) throw std::invalid_argument("lag_convolve: mask length != 2L-1");
  const int n = fft_size_for(2 * L - 1);
  // Linear convolution index j + L - 1 holds out[j]; circular wrap only reaches
  // indices above 3L-3, which are never read.
  const CVector prod =
      transform(padded(mask, n), true).cwiseProduct(transform(padded(s, n), true));
  const CVector full = transform(prod, false);
  CVector out(L);
  for (int j = 0; j < L; ++j) out(j) = full((j + L - 1) % n) / static_cast<double>(n);
  return out;
}

CVector lag_convolve_direct(const CVector& mask, const CVector& s) {
  const int L = static_cast<int>(s.size());
  if (mask.size() != 2 * L - 1) throw std::invalid_argument("lag_convolve: mask length != 2L-1");
  CVector out = CVector::Zero(L);
  for (int j = 0; j < L; ++j)
    for (int tau = -(L - 1); tau <= L - 1; ++tau) {
      const int k = j - tau;
      if (k >= 0 && k < L) out(j) += mask(lag_index(tau, L)) * s(k);
    }
  return out;
}

CVector lag_correlate(const CVector& mask, const CVector& s) {
  return lag_convolve(mask.reverse(), s);
}

CVector lag_correlate_direct(const CVector& mask, const CVector& s) {
  const int L = static_cast<int>(s.size());
  if (mask.size() != 2 * L - 1) throw std::invalid_argument("lag_correlate: mask length != 2L-1");
  CVector out = CVector::Zero(L);
  for (int j = 0; j < L; ++j)
    for (int tau = -(L - 1); tau <= L - 1; ++tau) {
      const int k = j + tau;
      if (k >= 0 && k < L) out(j) += mask(lag_index(tau, L)) * s(k);
    }
  return out;
}

}  // namespace cmwd
