#pragma once

#include <span>
#include <vector>

#include "cmwd/scenario.hpp"

namespace cmwd {

struct CostBreakdown {
  double bp = 0.0;
  double ac = 0.0;
  double cc = 0.0;
  double sim = 0.0;
  double total = 0.0;
};

struct CorrelationProfile {
  std::vector<int> lags;
  std::vector<double> values;
};

/// Steering data and weights shared by every cost, majorizer and gradient.
///
/// Columns of `grid_steering` are a(theta_u) on the beam-pattern grid; columns
/// of `target_steering` are a(theta_q) at the directions whose correlations
/// are suppressed.
struct CostModel {
  int n_tx = 0;
  int max_lag = 1;
  CMatrix grid_steering;
  RVector desired;
  double desired_energy = 0.0;
  CMatrix target_steering;
  Weights weights;
  CVector reference;  // x_ref for the angular-similarity term; empty if unused

  static CostModel build(const ArrayGeometry& geometry, const BeamPatternSpec& spec,
                         std::span<const double> target_angles_deg, int max_lag,
                         const Weights& weights, CVector reference = {});

  int grid_size() const { return static_cast<int>(grid_steering.cols()); }
  int n_targets() const { return static_cast<int>(target_steering.cols()); }
  bool uses_similarity() const { return weights.sim > 0.0 && reference.size() > 0; }

  /// Sum_u G_d,u a_u a_u^H.
  CMatrix desired_covariance() const;
};

/// ||a^H X||^2.
double beam_gain(const CMatrix& X, const CVector& a);
double beam_gain(const WaveformBlock& X, const ArrayGeometry& geometry, double angle_deg);

/// G(x, theta_u) for every column of M.
RVector beam_gains(const CMatrix& X, const CMatrix& M);

/// Least-squares scale sum G_d G / sum G_d^2, clipped at zero.
double optimal_alpha(const RVector& gains, const RVector& desired);
double optimal_alpha(const CMatrix& X, const CostModel& model);

enum class BpForm { direct, bu };

double beam_pattern_mse(const CMatrix& X, const CostModel& model, BpForm form = BpForm::direct);

/// Beam-domain sequence a^H X as a length-L vector.
CVector beam_domain(const CMatrix& X, const CVector& a);

/// |a_q^H X J_tau X^H a_q'|^2.
double space_time_correlation(const CMatrix& X, const CVector& a_q, const CVector& a_q2, int lag);
CorrelationProfile correlation_profile(const CMatrix& X, const CVector& a_q, const CVector& a_q2);

/// Sum over q and 0 < |tau| < P of chi_{tau,q,q}.
double autocorrelation_isl(const CMatrix& X, const CMatrix& A_targets, int max_lag);
double autocorrelation_isl_direct(const CMatrix& X, const CMatrix& A_targets, int max_lag);

/// Sum over ordered pairs q != q' and |tau| < P of chi_{tau,q,q'}.
double crosscorrelation_isl(const CMatrix& X, const CMatrix& A_targets, int max_lag);
double crosscorrelation_isl_direct(const CMatrix& X, const CMatrix& A_targets, int max_lag);

/// x_ref,l = exp(j pi l^2 / L), l = 0..L-1.
CVector lfm_reference(int block_len);

/// Sum_q ||X^H a_q - x_ref||^2.
double angular_similarity(const CMatrix& X, const CMatrix& A_targets, const CVector& reference);

CostBreakdown total_objective(const CMatrix& X, const CostModel& model);

}  // namespace cmwd
