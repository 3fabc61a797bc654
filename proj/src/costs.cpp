#include "cmwd/costs.hpp"

#include <cmath>
#include <stdexcept>

#include "cmwd/correlation.hpp"

namespace cmwd {

CostModel CostModel::build(const ArrayGeometry& geometry, const BeamPatternSpec& spec,
                           std::span<const double> target_angles_deg, int max_lag,
                           const Weights& weights, CVector reference) {
  geometry.validate();
  spec.validate();
  weights.validate();
  if (max_lag < 1) throw std::invalid_argument("CostModel: max_lag must be >= 1");
  CostModel m;
  m.n_tx = geometry.n_tx;
  m.max_lag = max_lag;
  m.grid_steering = steering_matrix(geometry.n_tx, geometry.spacing_wavelengths, spec.angle_grid_deg);
  m.desired = Eigen::Map<const RVector>(spec.desired_gain.data(), spec.size());
  m.desired_energy = spec.desired_energy();
  m.target_steering = steering_matrix(geometry.n_tx, geometry.spacing_wavelengths, target_angles_deg);
  m.weights = weights;
  m.reference = std::move(reference);
  return m;
}

CMatrix CostModel::desired_covariance() const {
  return grid_steering * desired.cast<cdouble>().asDiagonal() * grid_steering.adjoint();
}

double beam_gain(const CMatrix& X, const CVector& a) {
  return (a.adjoint() * X).squaredNorm();
}

double beam_gain(const WaveformBlock& X, const ArrayGeometry& geometry, double angle_deg) {
  return beam_gain(X.X, steering_vector(geometry, angle_deg, ArraySide::transmit));
}

RVector beam_gains(const CMatrix& X, const CMatrix& M) {
  // a_u^H (X X^H) a_u; cheaper than forming M^H X once L exceeds N_T.
  const CMatrix C = X * X.adjoint();
  return (M.adjoint() * C).cwiseProduct(M.transpose()).rowwise().sum().real();
}

double optimal_alpha(const RVector& gains, const RVector& desired) {
  const double energy = desired.squaredNorm();
  if (!(energy > 0.0)) throw std::domain_error("optimal_alpha: desired pattern is identically zero");
  return std::max(0.0, desired.dot(gains) / energy);
}

double optimal_alpha(const CMatrix& X, const CostModel& model) {
  return optimal_alpha(beam_gains(X, model.grid_steering), model.desired);
}

double beam_pattern_mse(const CMatrix& X, const CostModel& model, BpForm form) {
  if (form == BpForm::direct) {
    const RVector G = beam_gains(X, model.grid_steering);
    const double alpha = optimal_alpha(G, model.desired);
    return (alpha * model.desired - G).squaredNorm();
  }
  // x^H B_u x = (G_d,u / sum G_d^2) Tr(X^H R_d X) - ||a_u^H X||^2.
  const CMatrix Rd = model.desired_covariance();
  const double common = (X.adjoint() * Rd * X).trace().real() / model.desired_energy;
  double total = 0.0;
  for (int u = 0; u < model.grid_size(); ++u) {
    const double q = model.desired(u) * common - beam_gain(X, model.grid_steering.col(u));
    total += q * q;
  }
  return total;
}

CVector beam_domain(const CMatrix& X, const CVector& a) {
  return X.transpose() * a.conjugate();
}

double space_time_correlation(const CMatrix& X, const CVector& a_q, const CVector& a_q2, int lag) {
  const int L = static_cast<int>(X.cols());
  if (lag >= L || -lag >= L) return 0.0;
  const CVector s = beam_domain(X, a_q);
  const CVector t = beam_domain(X, a_q2);
  cdouble c = 0.0;
  for (int i = std::max(0, -lag); i < std::min(L, L - lag); ++i) c += s(i) * std::conj(t(i + lag));
  return std::norm(c);
}

CorrelationProfile correlation_profile(const CMatrix& X, const CVector& a_q, const CVector& a_q2) {
  const int L = static_cast<int>(X.cols());
  const CVector c = cross_correlation(beam_domain(X, a_q), beam_domain(X, a_q2));
  CorrelationProfile p;
  for (int tau = -(L - 1); tau <= L - 1; ++tau) {
    p.lags.push_back(tau);
    p.values.push_back(std::norm(c(lag_index(tau, L))));
  }
  return p;
}

namespace {

std::vector<CVector> beam_sequences(const CMatrix& X, const CMatrix& A) {
  std::vector<CVector> out;
  out.reserve(static_cast<std::size_t>(A.cols()));
  for (Eigen::Index q = 0; q < A.cols(); ++q) out.push_back(beam_domain(X, A.col(q)));
  return out;
}

double windowed_energy(const CVector& c, int L, int max_lag, bool skip_zero) {
  double s = 0.0;
  const int P = std::min(max_lag, L);
  for (int tau = -(P - 1); tau <= P - 1; ++tau) {
    if (skip_zero && tau == 0) continue;
    s += std::norm(c(lag_index(tau, L)));
  }
  return s;
}

}  // namespace

double autocorrelation_isl(const CMatrix& X, const CMatrix& A_targets, int max_lag) {
  const int L = static_cast<int>(X.cols());
  double total = 0.0;
  for (const auto& s : beam_sequences(X, A_targets))
    total += windowed_energy(cross_correlation(s, s), L, max_lag, true);
  return total;
}

double autocorrelation_isl_direct(const CMatrix& X, const CMatrix& A_targets, int max_lag) {
  const int P = std::min(max_lag, static_cast<int>(X.cols()));
  double total = 0.0;
  for (Eigen::Index q = 0; q < A_targets.cols(); ++q)
    for (int tau = -(P - 1); tau <= P - 1; ++tau)
      if (tau != 0) total += space_time_correlation(X, A_targets.col(q), A_targets.col(q), tau);
  return total;
}

double crosscorrelation_isl(const CMatrix& X, const CMatrix& A_targets, int max_lag) {
  const int L = static_cast<int>(X.cols());
  const auto seqs = beam_sequences(X, A_targets);
  double total = 0.0;
  for (std::size_t q = 0; q < seqs.size(); ++q)
    for (std::size_t p = 0; p < seqs.size(); ++p)
      if (p != q) total += windowed_energy(cross_correlation(seqs[q], seqs[p]), L, max_lag, false);
  return total;
}

double crosscorrelation_isl_direct(const CMatrix& X, const CMatrix& A_targets, int max_lag) {
  const int P = std::min(max_lag, static_cast<int>(X.cols()));
  double total = 0.0;
  for (Eigen::Index q = 0; q < A_targets.cols(); ++q)
    for (Eigen::Index p = 0; p < A_targets.cols(); ++p) {
      if (p == q) continue;
      for (int tau = -(P - 1); tau <= P - 1; ++tau)
        total += space_time_correlation(X, A_targets.col(q), A_targets.col(p), tau);
    }
  return total;
}

CVector lfm_reference(int block_len) {
  CVector r(block_len);
  for (int l = 0; l < block_len; ++l)
    r(l) = std::polar(1.0, kPi * static_cast<double>(l) * l / block_len);
  return r;
}

double angular_similarity(const CMatrix& X, const CMatrix& A_targets, const CVector& reference) {
  if (reference.size() != X.cols())
    throw std::invalid_argument("angular_similarity: reference length != L");
  double total = 0.0;
  for (Eigen::Index q = 0; q < A_targets.cols(); ++q)
    total += (X.adjoint() * A_targets.col(q) - reference).squaredNorm();
  return total;
}

CostBreakdown total_objective(const CMatrix& X, const CostModel& model) {
  CostBreakdown c;
  const auto& w = model.weights;
  c.bp = beam_pattern_mse(X, model);
  c.ac = autocorrelation_isl(X, model.target_steering, model.max_lag);
  c.cc = crosscorrelation_isl(X, model.target_steering, model.max_lag);
  if (model.reference.size() > 0) c.sim = angular_similarity(X, model.target_steering, model.reference);
  c.total = w.bp * c.bp + w.ac * c.ac + w.cc * c.cc + (model.uses_similarity() ? w.sim * c.sim : 0.0);
  return c;
}

}  // namespace cmwd
