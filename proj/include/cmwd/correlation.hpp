#pragma once

#include "cmwd/scenario.hpp"

namespace cmwd {

/// Lag-indexed sequences of length 2L-1 store lag tau at index tau + L - 1.
inline int lag_index(int lag, int block_len) { return lag + block_len - 1; }

/// c[tau] = sum_i a[i] * conj(b[i + tau]), tau = -(L-1)..(L-1).
/// Zero-padded FFT of length >= 2L-1, so the result is the exact linear correlation.
CVector cross_correlation(const CVector& a, const CVector& b);
CVector cross_correlation_direct(const CVector& a, const CVector& b);

/// out[j] = sum_tau m[tau] * s[j - tau], j = 0..L-1 (m lag-indexed, length 2L-1).
CVector lag_convolve(const CVector& mask, const CVector& s);
CVector lag_convolve_direct(const CVector& mask, const CVector& s);

/// out[j] = sum_tau m[tau] * s[j + tau], j = 0..L-1.
CVector lag_correlate(const CVector& mask, const CVector& s);
CVector lag_correlate_direct(const CVector& mask, const CVector& s);

/// Smallest power of two >= n.
int fft_size_for(int n);

}  // namespace cmwd
