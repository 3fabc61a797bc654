#include "cmwd/ci_precoding.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace cmwd {

double ci_threshold(double noise_var, double snr_linear, double half_angle, int n_tx,
                    double total_power) {
  const double gamma = std::sqrt(noise_var) * std::sqrt(snr_linear) * std::sin(half_angle);
  return std::sqrt(static_cast<double>(n_tx) / total_power) * gamma;
}

CiConstraintSet build_ci_set(const CommsConfig& comms, double total_power, int n_tx) {
  if (!(total_power > 0.0)) throw std::invalid_argument("build_ci_set: P_T must be > 0");
  const int L = comms.n_users == 0 ? 0 : static_cast<int>(comms.symbols.rows());
  comms.validate(n_tx, L);
  CiConstraintSet set;
  set.n_tx = n_tx;
  set.block_len = L;
  set.n_users = comms.n_users;
  if (comms.n_users == 0) return set;

  const int K = comms.n_users;
  const double lam = comms.ci_half_angle;
  // hhat^H = h^H e^{-j<s} (sin L -/+ j cos L)  =>  hhat = h e^{j<s} (sin L +/- j cos L).
  const cdouble rot_minus(std::sin(lam), std::cos(lam));   // conj of (sin - j cos)
  const cdouble rot_plus(std::sin(lam), -std::cos(lam));   // conj of (sin + j cos)
  set.thresholds.resize(2 * K);
  for (int k = 0; k < K; ++k) {
    const double t = ci_threshold(comms.noise_var, comms.snr_thresholds[static_cast<std::size_t>(k)],
                                  lam, n_tx, total_power);
    set.thresholds(2 * k) = t;
    set.thresholds(2 * k + 1) = t;
  }
  set.rotated.assign(static_cast<std::size_t>(L), CMatrix(n_tx, 2 * K));
  for (int l = 0; l < L; ++l)
    for (int k = 0; k < K; ++k) {
      const cdouble sym = std::polar(1.0, std::arg(comms.symbols(l, k)));
      const CVector& h = comms.channels[static_cast<std::size_t>(k)];
      set.rotated[static_cast<std::size_t>(l)].col(2 * k) = h * (sym * rot_plus);
      set.rotated[static_cast<std::size_t>(l)].col(2 * k + 1) = h * (sym * rot_minus);
    }
  return set;
}

MarginReport ci_margins(const CMatrix& X, const CiConstraintSet& set, double tol) {
  MarginReport r;
  if (set.empty()) {
    r.min_margin = std::numeric_limits<double>::infinity();
    r.feasible = true;
    return r;
  }
  if (X.rows() != set.n_tx || X.cols() != set.block_len)
    throw std::invalid_argument("ci_margins: waveform dimensions do not match the constraint set");
  const int M = set.n_constraints();
  r.margins.resize(M, set.block_len);
  for (int l = 0; l < set.block_len; ++l) {
    const CVector proj = set.rotated[static_cast<std::size_t>(l)].adjoint() * X.col(l);
    for (int m = 0; m < M; ++m) r.margins(m, l) = proj(m).real() - set.thresholds(m);
  }
  r.min_margin = r.margins.minCoeff();
  r.feasible = r.min_margin >= -tol;
  return r;
}

namespace {

CVector random_phases(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> phase(-kPi, kPi);
  CVector x(n);
  for (int i = 0; i < n; ++i) x(i) = std::polar(1.0, phase(rng));
  return x;
}

double min_margin_of(const CMatrix& Hhat, const RVector& thresholds, const CVector& x, int* arg) {
  const CVector proj = Hhat.adjoint() * x;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; m < proj.size(); ++m) {
    const double v = proj(m).real() - thresholds(m);
    if (v < best) {
      best = v;
      if (arg != nullptr) *arg = static_cast<int>(m);
    }
  }
  return best;
}

}  // namespace

InitResult initialize_waveform(const CiConstraintSet& set, int n_tx, int block_len,
                               std::uint64_t seed, const InitOptions& options) {
  if (n_tx < 1 || block_len < 1) throw std::invalid_argument("initialize_waveform: bad dimensions");
  std::mt19937_64 rng(seed);
  InitResult res;
  res.waveform.X.resize(n_tx, block_len);
  if (set.empty()) {
    for (int l = 0; l < block_len; ++l) res.waveform.X.col(l) = random_phases(rng, n_tx);
    res.margins = ci_margins(res.waveform.X, set);
    res.min_margin = res.margins.min_margin;
    res.feasible = true;
    return res;
  }
  if (set.n_tx != n_tx || set.block_len != block_len)
    throw std::invalid_argument("initialize_waveform: dimensions do not match the constraint set");

  for (int l = 0; l < block_len; ++l) {
    const CMatrix& H = set.rotated[static_cast<std::size_t>(l)];
    CVector x = random_phases(rng, n_tx);
    CVector best = x;
    double best_val = min_margin_of(H, set.thresholds, x, nullptr);
    for (int t = 1; t <= options.max_iter; ++t) {
      int m = 0;
      min_margin_of(H, set.thresholds, x, &m);
      // Subgradient of Re{h^H x} with respect to (Re x, Im x) is h.
      const CVector g = H.col(m);
      const double gn = g.norm();
      if (gn == 0.0) break;
      x += (options.step_scale / std::sqrt(static_cast<double>(t)) / gn) * g;
      for (int n = 0; n < n_tx; ++n)
        if (std::abs(x(n)) > 1.0) x(n) /= std::abs(x(n));
      const CVector p = phase_project(x);
      const double v = min_margin_of(H, set.thresholds, p, nullptr);
      if (v > best_val) {
        best_val = v;
        best = p;
      }
    }
    res.waveform.X.col(l) = best;
  }
  res.margins = ci_margins(res.waveform.X, set);
  res.min_margin = res.margins.min_margin;
  res.feasible = res.margins.feasible;
  return res;
}

}  // namespace cmwd
