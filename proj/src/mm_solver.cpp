#include "cmwd/mm_solver.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace cmwd {
namespace {

bool all_finite(const CVector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v(i).real()) || !std::isfinite(v(i).imag())) return false;
  return true;
}

RVector constraint_values(const CMatrix& H, const RVector& thresholds, const CVector& x) {
  return thresholds - (H.adjoint() * x).real();
}

}  // namespace

DualResult solve_subpulse_dual(const CVector& d, const CMatrix& H, const RVector& thresholds,
                               const RVector& nu0, const DualOptions& opt) {
  if (!all_finite(d)) throw std::domain_error("solve_subpulse_dual: non-finite linear term");
  if (H.rows() != d.size() || H.cols() != thresholds.size())
    throw std::invalid_argument("solve_subpulse_dual: inconsistent constraint slice");
  const auto M = H.cols();
  DualResult res;
  res.nu = nu0.size() == M ? nu0.cwiseMax(0.0) : RVector(RVector::Zero(M));
  if (M == 0) {
    res.x = phase_project(CVector(-d));
    res.h = RVector();
    res.dual_objective = d.dot(res.x).real();
    res.converged = true;
    return res;
  }

  const auto x_of = [&](const RVector& nu) -> CVector {
    return phase_project(CVector(H * nu.cast<cdouble>() - d));
  };

  double prev = std::numeric_limits<double>::infinity();
  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    res.sweeps = sweep;
    for (Eigen::Index m = 0; m < M; ++m) {
      const CVector hm = H.col(m);
      const CVector base = H * res.nu.cast<cdouble>() - res.nu(m) * hm - d;
      const auto h_at = [&](double nu) {
        double acc = 0.0;
        for (Eigen::Index n = 0; n < hm.size(); ++n) {
          const cdouble z = base(n) + nu * hm(n);
          const double mag = std::sqrt(std::norm(z));
          // Re{conj(h) e^{j angle z}}; angle(0) is taken as 0.
          acc += mag > 0.0 ? (std::conj(hm(n)) * z).real() / mag : hm(n).real();
        }
        return thresholds(m) - acc;
      };
      if (h_at(0.0) <= 0.0) {
        res.nu(m) = 0.0;
        continue;
      }
      // As nu -> inf, x -> exp(j angle(hhat_m)) and Re{hhat^H x} -> ||hhat_m||_1.
      if (thresholds(m) - hm.cwiseAbs().sum() >= -opt.eps) {
        res.unreachable = true;
        break;
      }
      double lo = 0.0, hi = 1.0;
      if (h_at(hi) > 0.0) {
        while (h_at(hi) > 0.0 && hi < 1e300) hi *= 2.0;
        lo = hi / 2.0;
      }
      double nu = hi;
      for (int it = 0; it < opt.max_bisect; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double h = h_at(mid);
        // Window (-eps3, 0], narrowed so that |nu h| also meets the slackness tolerance.
        const double window = std::min(opt.eps3, opt.cs_tol / std::max(mid, 1e-300));
        if (h <= 0.0 && h > -window) {
          nu = mid;
          break;
        }
        if (h > 0.0)
          lo = mid;
        else
          hi = mid;
        nu = hi;
        if (hi - lo <= std::numeric_limits<double>::epsilon() * hi) break;
      }
      res.nu(m) = nu;
    }
    res.x = x_of(res.nu);
    res.h = constraint_values(H, thresholds, res.x);
    res.dual_objective = d.dot(res.x).real() + res.nu.dot(res.h);
    if (res.unreachable) return res;
    const double max_h = res.h.maxCoeff();
    const double max_cs = res.nu.cwiseProduct(res.h).cwiseAbs().maxCoeff();
    const double rel = std::isfinite(prev)
                           ? std::abs(res.dual_objective - prev) / std::max(std::abs(prev), 1e-300)
                           : std::numeric_limits<double>::infinity();
    prev = res.dual_objective;
    if (rel < opt.eps2 && max_h <= opt.eps3 && max_cs <= opt.cs_tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

MmResult run_mm(const WaveformBlock& initial, const CostModel& model, const CiConstraintSet& set,
                const MmOptions& options) {
  const int N = initial.n_tx();
  const int L = initial.block_len();
  if (N != model.n_tx) throw std::invalid_argument("run_mm: N_T mismatch between waveform and model");
  if (!set.empty() && (set.n_tx != N || set.block_len != L))
    throw std::invalid_argument("run_mm: constraint set dimensions do not match the waveform");
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  const MajorizerContext ctx(model, L, options.majorizer == MajorizerKind::lambda_max);
  const int M = set.n_constraints();
  const int threads = options.threads > 0 ? options.threads : omp_get_max_threads();

  MmResult out;
  MmState& st = out.state;
  CMatrix X = phase_project(initial.X);
  st.duals = RMatrix::Zero(M, L);
  CostBreakdown cost = total_objective(X, model);
  st.objective_history.push_back(cost.total);
  st.trace.push_back({0, cost, elapsed_ms()});
  st.status = "max_iter";
  CVector ritz;  // lambda_max warm start

  for (int t = 1; t <= options.max_iter; ++t) {
    const double g_prev = st.objective_history.back();
    if (g_prev == 0.0) {
      st.converged = true;
      st.status = "zero_objective";
      break;
    }
    const MajorizerLinear lin = majorize_to_linear(ctx, X, options.majorizer, g_prev, &ritz);
    CMatrix X_new = X;
    RMatrix nu_new = st.duals;
    int rejected = 0, unreachable = 0, restored = 0;

#pragma omp parallel for schedule(static) num_threads(threads) reduction(+ : rejected, unreachable, restored)
    for (int l = 0; l < L; ++l) {
      const CVector d_l = lin.slice(l, N);
      const CVector old = X.col(l);
      CVector cand;
      RVector h_old, h_new, nu_l;
      if (set.empty()) {
        cand = phase_project(CVector(-d_l));
      } else {
        const CMatrix& H = set.rotated[static_cast<std::size_t>(l)];
        const DualResult dr =
            solve_subpulse_dual(d_l, H, set.thresholds, RVector(st.duals.col(l)), options.dual);
        cand = dr.x;
        nu_l = dr.nu;
        if (dr.unreachable) ++unreachable;
        h_old = constraint_values(H, set.thresholds, old);
        h_new = dr.h;
      }
      const double s_old = d_l.dot(old).real();
      const double s_new = d_l.dot(cand).real();
      const double viol_old = h_old.size() ? std::max(0.0, h_old.maxCoeff()) : 0.0;
      const double viol_new = h_new.size() ? std::max(0.0, h_new.maxCoeff()) : 0.0;
      const bool descent = s_new < s_old && viol_new <= options.dual.eps3;
      const bool restore = viol_old > options.dual.eps3 && viol_new < viol_old;
      if (descent || restore) {
        X_new.col(l) = cand;
        if (nu_l.size()) nu_new.col(l) = nu_l;
        if (!descent) ++restored;
      } else {
        ++rejected;
      }
    }

    st.rejected_subpulse_steps += rejected;
    st.unreachable_subpulses = unreachable;
    const CostBreakdown c_new = total_objective(X_new, model);
    st.iterations = t;
    if (c_new.total > g_prev && restored == 0) {
      // Only roundoff can raise the objective here; keep the previous iterate.
      st.stalled = true;
      st.converged = true;
      st.status = "stalled";
      break;
    }
    X = X_new;
    st.duals = nu_new;
    st.objective_history.push_back(c_new.total);
    st.trace.push_back({t, c_new, elapsed_ms()});
    if (std::abs(c_new.total - g_prev) / std::abs(g_prev) <= options.eps4) {
      st.converged = true;
      st.status = "converged";
      break;
    }
    if (options.time_limit_sec > 0 && elapsed_ms() > 1e3 * options.time_limit_sec) {
      st.status = "timeout";
      break;
    }
  }

  st.x_t = vec(X);
  out.waveform = WaveformBlock{X, initial.total_power};
  out.margins = ci_margins(X, set);
  return out;
}

void write_mm_trace_csv(std::ostream& out, const MmState& state) {
  out << "iteration,bp,ac,cc,total,wall_ms\n";
  out.precision(17);
  for (const auto& r : state.trace)
    out << r.iteration << ',' << r.cost.bp << ',' << r.cost.ac << ',' << r.cost.cc << ','
        << r.cost.total << ',' << r.wall_ms << '\n';
}

}  // namespace cmwd
