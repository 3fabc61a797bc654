#include "cmwd/ladmm_solver.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "cmwd/correlation.hpp"

namespace cmwd {
namespace {

// rho_u = x^H A_u v - alpha G_d,u = -(x^H B_u v), with x^H A_u v = a_u^H (V X^H) a_u.
CVector beam_residual(const CMatrix& X, const CMatrix& V, const CostModel& m) {
  const CMatrix C = V * X.adjoint();
  const CVector p = (m.grid_steering.adjoint() * C).cwiseProduct(m.grid_steering.transpose()).rowwise().sum();
  const cdouble alpha = m.desired.cast<cdouble>().dot(p) / m.desired_energy;
  return p - alpha * m.desired.cast<cdouble>();
}

// M diag(c) M^H.
CMatrix weighted_covariance(const CMatrix& M, const CVector& c) {
  return M * c.asDiagonal() * M.adjoint();
}

int lag_window(const CostModel& m, int L) { return std::min(m.max_lag, L); }

// Correlation-atom weight for the (q, p) pair at lag tau; zero outside the window.
double corr_weight(const Weights& w, int q, int p, int tau, int P) {
  if (std::abs(tau) >= P) return 0.0;
  if (q == p) return tau == 0 ? 0.0 : w.ac;
  return w.cc;
}

CVector masked(const CVector& r, const Weights& w, int q, int p, int P, int L, bool conj_r) {
  CVector out = CVector::Zero(2 * L - 1);
  for (int tau = -(P - 1); tau <= P - 1; ++tau) {
    const double wt = corr_weight(w, q, p, tau, P);
    if (wt == 0.0) continue;
    const cdouble v = r(lag_index(tau, L));
    out(lag_index(tau, L)) = wt * (conj_r ? std::conj(v) : v);
  }
  return out;
}

void check_shapes(const CMatrix& X, const CMatrix& V, const CostModel& m) {
  if (X.rows() != m.n_tx || V.rows() != m.n_tx || X.cols() != V.cols())
    throw std::invalid_argument("biconvex: waveform dimensions do not match the model");
}

double sq(const CVector& v) { return v.squaredNorm(); }

}  // namespace

CostBreakdown biconvex_breakdown(const CMatrix& X, const CMatrix& V, const CostModel& m) {
  check_shapes(X, V, m);
  const int L = static_cast<int>(X.cols());
  const int P = lag_window(m, L);
  CostBreakdown c;
  if (m.weights.bp > 0.0 || m.grid_size() > 0) c.bp = beam_residual(X, V, m).squaredNorm();
  const int Q = m.n_targets();
  for (int q = 0; q < Q; ++q) {
    const CVector vq = beam_domain(V, m.target_steering.col(q));
    for (int p = 0; p < Q; ++p) {
      const CVector xp = beam_domain(X, m.target_steering.col(p));
      const CVector r = cross_correlation(vq, xp);  // r[tau] = x^H D_{tau,q,p} v
      for (int tau = -(P - 1); tau <= P - 1; ++tau) {
        const double e = std::norm(r(lag_index(tau, L)));
        if (p == q) {
          if (tau != 0) c.ac += e;
        } else {
          c.cc += e;
        }
      }
    }
  }
  c.total = m.weights.bp * c.bp + m.weights.ac * c.ac + m.weights.cc * c.cc;
  return c;
}

double biconvex_cost(const CMatrix& X, const CMatrix& V, const CostModel& model) {
  return biconvex_breakdown(X, V, model).total;
}

CVector biconvex_grad_x(const CMatrix& X, const CMatrix& V, const CostModel& m) {
  check_shapes(X, V, m);
  const int L = static_cast<int>(X.cols());
  const int P = lag_window(m, L);
  const auto& w = m.weights;
  CMatrix g = CMatrix::Zero(X.rows(), L);
  if (w.bp > 0.0) {
    const CVector rho = beam_residual(X, V, m);
    g += 2.0 * w.bp * weighted_covariance(m.grid_steering, rho.conjugate()) * V;
  }
  const int Q = m.n_targets();
  if (w.ac > 0.0 || w.cc > 0.0) {
    for (int q = 0; q < Q; ++q) {
      const CVector vq = beam_domain(V, m.target_steering.col(q));
      for (int p = 0; p < Q; ++p) {
        if ((p == q ? w.ac : w.cc) <= 0.0) continue;
        const CVector xp = beam_domain(X, m.target_steering.col(p));
        const CVector r = cross_correlation(vq, xp);
        const CVector s = lag_convolve(masked(r, w, q, p, P, L, true), vq);
        g += 2.0 * m.target_steering.col(p) * s.transpose();
      }
    }
  }
  if (m.uses_similarity()) {
    CMatrix t = CMatrix::Zero(X.rows(), L);
    for (int q = 0; q < Q; ++q) {
      const CVector a = m.target_steering.col(q);
      t += a * (a.adjoint() * X) - a * m.reference.adjoint();
    }
    g += 2.0 * w.sim * t;
  }
  return vec(g);
}

CVector biconvex_grad_v(const CMatrix& X, const CMatrix& V, const CostModel& m) {
  check_shapes(X, V, m);
  const int L = static_cast<int>(X.cols());
  const int P = lag_window(m, L);
  const auto& w = m.weights;
  CMatrix g = CMatrix::Zero(X.rows(), L);
  if (w.bp > 0.0) {
    const CVector rho = beam_residual(X, V, m);
    g += 2.0 * w.bp * weighted_covariance(m.grid_steering, rho) * X;
  }
  const int Q = m.n_targets();
  if (w.ac > 0.0 || w.cc > 0.0) {
    for (int q = 0; q < Q; ++q) {
      const CVector vq = beam_domain(V, m.target_steering.col(q));
      for (int p = 0; p < Q; ++p) {
        if ((p == q ? w.ac : w.cc) <= 0.0) continue;
        const CVector xp = beam_domain(X, m.target_steering.col(p));
        const CVector r = cross_correlation(vq, xp);
        const CVector s = lag_correlate(masked(r, w, q, p, P, L, false), xp);
        g += 2.0 * m.target_steering.col(q) * s.transpose();
      }
    }
  }
  return vec(g);
}

CVector apply_channels(const CiConstraintSet& set, const CVector& x) {
  const int M = set.n_constraints();
  const int L = set.block_len;
  CVector out(static_cast<Eigen::Index>(M) * L);
  if (M == 0) return out;
  const int N = set.n_tx;
  for (int l = 0; l < L; ++l)
    out.segment(l * M, M) = set.rotated[static_cast<std::size_t>(l)].adjoint() * x.segment(l * N, N);
  return out;
}

CVector apply_channels_adjoint(const CiConstraintSet& set, const CVector& y, int n_tx) {
  const int M = set.n_constraints();
  const int L = set.block_len;
  if (M == 0) return CVector::Zero(static_cast<Eigen::Index>(n_tx) * std::max(L, 0));
  CVector out(static_cast<Eigen::Index>(n_tx) * L);
  for (int l = 0; l < L; ++l)
    out.segment(l * n_tx, n_tx) = set.rotated[static_cast<std::size_t>(l)] * y.segment(l * M, M);
  return out;
}

double augmented_lagrangian(const LadmmState& s, const LadmmParams& p, const CostModel& model,
                            const CiConstraintSet& set) {
  const int N = model.n_tx;
  const CMatrix X = mat(s.x, N), V = mat(s.v, N);
  double val = biconvex_cost(X, V, model);
  if (model.uses_similarity())
    val += model.weights.sim * angular_similarity(X, model.target_steering, model.reference);
  val += 0.5 * p.mu1 * (sq(s.x - s.v + s.eta1) - sq(s.eta1));
  val += 0.5 * p.mu2 * (sq(s.u - s.v + s.eta2) - sq(s.eta2));
  if (!set.empty()) val += 0.5 * p.mu3 * (sq(s.z - apply_channels(set, s.x) + s.rho) - sq(s.rho));
  return val;
}

CVector grad_x(const LadmmState& s, const LadmmParams& p, const CostModel& model,
               const CiConstraintSet& set) {
  const int N = model.n_tx;
  CVector g = biconvex_grad_x(mat(s.x, N), mat(s.v, N), model);
  g += p.mu1 * (s.x - s.v + s.eta1);
  if (!set.empty())
    g += p.mu3 * apply_channels_adjoint(set, CVector(apply_channels(set, s.x) - s.z - s.rho), N);
  return g;
}

CVector grad_v(const LadmmState& s, const LadmmParams& p, const CostModel& model,
               const CiConstraintSet&) {
  const int N = model.n_tx;
  CVector g = biconvex_grad_v(mat(s.x, N), mat(s.v, N), model);
  g -= p.mu1 * (s.x - s.v + s.eta1);
  g += p.mu2 * (s.v - s.u - s.eta2);
  return g;
}

namespace {

bool finite(const CVector& v) { return v.allFinite(); }

// x <- x - g / mu, doubling mu until the Lagrangian does not increase.
// `before` is the Lagrangian at the current state; returns the value after the step.
double prox_step(LadmmState& s, CVector LadmmState::*var, double LadmmState::*mu, const CVector& g,
                 double before, const LadmmParams& p, const CostModel& model,
                 const CiConstraintSet& set) {
  if (!finite(g)) throw std::runtime_error("LADMM: non-finite gradient");
  const CVector start = s.*var;
  for (int k = 0; k < 60; ++k) {
    s.*var = start - g / (s.*mu);
    const double after = augmented_lagrangian(s, p, model, set);
    if (after <= before) return after;
    s.*mu *= 2.0;
  }
  s.*var = start;
  return before;
}

// Largest eigenvalue of the Hessian of c -> biconvex_cost in one block, via
// power iteration on gradient differences (the block gradient is linear).
double block_curvature(const CMatrix& X, const CMatrix& V, const CostModel& model, bool in_x) {
  const int N = static_cast<int>(X.rows());
  const auto hess = [&](const CVector& d) -> CVector {
    const CMatrix D = mat(d, N);
    CostModel m = model;
    m.weights.sim = 0.0;
    return in_x ? CVector(0.5 * biconvex_grad_x(D, V, m)) : CVector(0.5 * biconvex_grad_v(X, D, m));
  };
  CVector d = vec(in_x ? X : V);
  if (d.norm() == 0.0) d = CVector::Ones(X.size());
  d.normalize();
  double lam = 0.0;
  for (int it = 0; it < 30; ++it) {
    const CVector h = hess(d);
    lam = d.dot(h).real();
    const double n = h.norm();
    if (n == 0.0) return 0.0;
    d = h / n;
  }
  return std::max(lam, 0.0);
}

double channel_gain(const CiConstraintSet& set) {
  double best = 0.0;
  for (const auto& H : set.rotated) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(H.adjoint() * H, Eigen::EigenvaluesOnly);
    best = std::max(best, es.eigenvalues().maxCoeff());
  }
  return best;
}

}  // namespace

void update_x(LadmmState& s, const LadmmParams& p, const CostModel& model, const CiConstraintSet& set) {
  prox_step(s, &LadmmState::x, &LadmmState::mu_x, grad_x(s, p, model, set),
            augmented_lagrangian(s, p, model, set), p, model, set);
}

void update_v(LadmmState& s, const LadmmParams& p, const CostModel& model, const CiConstraintSet& set) {
  prox_step(s, &LadmmState::v, &LadmmState::mu_v, grad_v(s, p, model, set),
            augmented_lagrangian(s, p, model, set), p, model, set);
}

void update_z(LadmmState& s, const CiConstraintSet& set) {
  if (set.empty()) return;
  const int M = set.n_constraints();
  s.z = apply_channels(set, s.x) - s.rho;
  for (Eigen::Index i = 0; i < s.z.size(); ++i) {
    const double thr = set.thresholds(i % M);
    if (s.z(i).real() < thr) s.z(i) = cdouble(thr, s.z(i).imag());
  }
}

void update_u(LadmmState& s) { s.u = phase_project(CVector(s.v - s.eta2)); }

void update_multipliers(LadmmState& s, const CiConstraintSet& set) {
  s.eta1 += s.x - s.v;
  s.eta2 += s.u - s.v;
  if (!set.empty()) s.rho += s.z - apply_channels(set, s.x);
}

LadmmState initial_ladmm_state(const WaveformBlock& initial, const CiConstraintSet& set) {
  LadmmState s;
  s.x = initial.vec();
  s.v = s.x;
  s.u = s.v;
  s.eta1 = CVector::Zero(s.x.size());
  s.eta2 = CVector::Zero(s.x.size());
  const CVector hx = apply_channels(set, s.x);
  s.z = hx.real().cast<cdouble>();
  s.rho = CVector::Zero(hx.size());
  return s;
}

LadmmResult run_ladmm(const WaveformBlock& initial, const CostModel& model, const CiConstraintSet& set,
                      const LadmmParams& params) {
  if (!(params.mu1 > 0 && params.mu2 > 0 && params.mu3 > 0))
    throw std::invalid_argument("run_ladmm: penalties must be > 0");
  const int N = initial.n_tx();
  const int L = initial.block_len();
  if (N != model.n_tx) throw std::invalid_argument("run_ladmm: N_T mismatch between waveform and model");
  if (!set.empty() && (set.n_tx != N || set.block_len != L))
    throw std::invalid_argument("run_ladmm: constraint set dimensions do not match the waveform");
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  LadmmResult out;
  LadmmState& s = out.state;
  s = initial_ladmm_state(initial, set);
  const CMatrix X0 = mat(s.x, N);
  const double g0 = total_objective(X0, model).total;
  s.objective_scale = params.objective_scale > 0 ? params.objective_scale
                      : g0 > 0 ? params.objective_target * N * L / g0
                               : 1.0;
  CostModel scaled_model = model;
  scaled_model.weights.bp *= s.objective_scale;
  scaled_model.weights.ac *= s.objective_scale;
  scaled_model.weights.cc *= s.objective_scale;
  scaled_model.weights.sim *= s.objective_scale;
  const double sigma2 = set.empty() ? 0.0 : channel_gain(set);
  s.mu_x = params.mu_x > 0 ? params.mu_x
                           : params.mu1 + params.mu3 * sigma2 + block_curvature(X0, X0, scaled_model, true);
  s.mu_v = params.mu_v > 0 ? params.mu_v
                           : params.mu1 + params.mu2 + block_curvature(X0, X0, scaled_model, false);

  const auto objective = [&](const CVector& x) { return total_objective(mat(x, N), model).total; };
  const auto record = [&](int it) {
    LadmmTraceRow row;
    row.iteration = it;
    row.objective = objective(s.x);
    row.projected_objective = objective(phase_project(s.x));
    row.res_xv = (s.x - s.v).norm();
    row.res_uv = (s.u - s.v).norm();
    row.res_zhx = set.empty() ? 0.0 : (s.z - apply_channels(set, s.x)).norm();
    row.wall_ms = elapsed_ms();
    out.trace.push_back(row);
    return row;
  };
  record(0);
  out.status = "max_iter";

  double g_prev = out.trace.back().objective;
  for (int it = 1; it <= params.max_iter; ++it) {
    double lag = augmented_lagrangian(s, params, scaled_model, set);
    lag = prox_step(s, &LadmmState::x, &LadmmState::mu_x, grad_x(s, params, scaled_model, set), lag,
                    params, scaled_model, set);
    prox_step(s, &LadmmState::v, &LadmmState::mu_v, grad_v(s, params, scaled_model, set), lag, params,
              scaled_model, set);
    update_z(s, set);
    update_u(s);
    update_multipliers(s, set);
    s.iter = it;
    out.iterations = it;
    const LadmmTraceRow row = record(it);
    const double worst = std::max({row.objective, row.res_xv, row.res_uv, row.res_zhx});
    if (!std::isfinite(worst) || worst > params.divergence_limit) {
      out.diverged = true;
      out.status = "diverged";
      break;
    }
    const double n_x = std::sqrt(static_cast<double>(s.x.size()));
    const double n_z = std::sqrt(static_cast<double>(std::max<Eigen::Index>(s.z.size(), 1)));
    const bool primal_ok = row.res_xv / n_x <= params.residual_tol &&
                           row.res_uv / n_x <= params.residual_tol &&
                           row.res_zhx / n_z <= params.residual_tol;
    const bool flat = g_prev == 0.0 ? row.objective == 0.0
                                    : std::abs(row.objective - g_prev) / std::abs(g_prev) <= params.eps1;
    if (flat && primal_ok) {
      out.converged = true;
      out.status = "converged";
      break;
    }
    g_prev = row.objective;
    if (params.time_limit_sec > 0 && row.wall_ms > 1e3 * params.time_limit_sec) {
      out.status = "timeout";
      break;
    }
  }

  out.waveform = WaveformBlock{phase_project(mat(s.x, N)), initial.total_power};
  out.margins = ci_margins(out.waveform.X, set);
  return out;
}

void write_ladmm_trace_csv(std::ostream& out, const std::vector<LadmmTraceRow>& trace) {
  out << "iteration,objective,projected_objective,res_xv,res_uv,res_zhx,wall_ms\n";
  out.precision(17);
  for (const auto& r : trace)
    out << r.iteration << ',' << r.objective << ',' << r.projected_objective << ',' << r.res_xv << ','
        << r.res_uv << ',' << r.res_zhx << ',' << r.wall_ms << '\n';
}

}  // namespace cmwd
