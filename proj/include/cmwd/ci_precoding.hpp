#pragma once

#include <cstdint>
#include <vector>

#include "cmwd/scenario.hpp"

namespace cmwd {

/// Constructive-interference half-spaces Re{hhat_{l,m}^H x_l} >= Gamma~_m.
///
/// Column m of `rotated[l]` is hhat_{l,m}. Constraint m = 2k carries the
/// (sin L + j cos L) rotation of h_k^H and m = 2k + 1 the (sin L - j cos L)
/// one (zero-based k).
struct CiConstraintSet {
  int n_tx = 0;
  int block_len = 0;
  int n_users = 0;
  std::vector<CMatrix> rotated;
  RVector thresholds;  // Gamma~_m, length 2K

  int n_constraints() const { return 2 * n_users; }
  bool empty() const { return n_users == 0; }

  struct Index {
    int subpulse;
    int user;
    bool plus_rotation;  // true for the (sin + j cos) member of the pair
  };
  Index index(int subpulse, int m) const { return {subpulse, m / 2, m % 2 == 0}; }
};

struct MarginReport {
  RMatrix margins;  // 2K x L
  double min_margin = 0.0;
  bool feasible = true;
};

inline constexpr double kCiFeasibilityTol = 1e-6;

/// Gamma~ = sqrt(N_T / P_T) * sigma * sqrt(gamma) * sin(Lambda).
double ci_threshold(double noise_var, double snr_linear, double half_angle, int n_tx,
                    double total_power);

CiConstraintSet build_ci_set(const CommsConfig& comms, double total_power, int n_tx);

MarginReport ci_margins(const CMatrix& X, const CiConstraintSet& set,
                        double tol = kCiFeasibilityTol);

struct InitResult {
  WaveformBlock waveform;
  MarginReport margins;
  double min_margin = 0.0;  // achieved phi after phase projection
  bool feasible = false;
};

struct InitOptions {
  int max_iter = 2000;
  double step_scale = 0.5;
};

/// Max-min margin start point: per-subpulse projected subgradient ascent on
/// min_m (Re{hhat_m^H x_l} - Gamma~_m) over |x_n| <= 1, then phase projection.
/// An empty set yields seeded random phases.
InitResult initialize_waveform(const CiConstraintSet& set, int n_tx, int block_len,
                               std::uint64_t seed, const InitOptions& options = {});

}  // namespace cmwd
