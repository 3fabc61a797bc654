#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cmwd/ci_precoding.hpp"
#include "cmwd/costs.hpp"

namespace cmwd {

struct LadmmParams {
  double mu1 = 1e4;
  double mu2 = 1e4;
  double mu3 = 1e4;
  double mu_x = 0.0;  // 0: derived from penalties and local curvature
  double mu_v = 0.0;
  double eps1 = 1e-4;
  /// The objective-change test only counts once every primal residual,
  /// divided by the square root of its length, is below this.
  double residual_tol = 1e-5;
  int max_iter = 20000;
  double divergence_limit = 1e12;
  double time_limit_sec = 0.0;  // 0: unlimited
  /// Multiplies the objective inside the Lagrangian. 0 picks
  /// objective_target * L N_T / g(x_0), which keeps the quartic on the scale of the penalties.
  double objective_scale = 0.0;
  double objective_target = 1000.0;
};

/// Iterates of the split problem. z, rho are indexed l * 2K + m.
struct LadmmState {
  CVector x, v, u, z, rho, eta1, eta2;
  double mu_x = 0.0;
  double mu_v = 0.0;
  double objective_scale = 1.0;
  int iter = 0;
};

/// sum_k w_k |x^H V_k v|^2 over the beam-pattern and correlation atoms.
CostBreakdown biconvex_breakdown(const CMatrix& X, const CMatrix& V, const CostModel& model);
double biconvex_cost(const CMatrix& X, const CMatrix& V, const CostModel& model);

/// Gradients 2 d/d(conj) of biconvex_cost (plus w_sim g_sim(x) for x), column-major vec'd.
CVector biconvex_grad_x(const CMatrix& X, const CMatrix& V, const CostModel& model);
CVector biconvex_grad_v(const CMatrix& X, const CMatrix& V, const CostModel& model);

/// Stacked H~ x and H~^H y without forming H~.
CVector apply_channels(const CiConstraintSet& set, const CVector& x);
CVector apply_channels_adjoint(const CiConstraintSet& set, const CVector& y, int n_tx);

double augmented_lagrangian(const LadmmState& s, const LadmmParams& p, const CostModel& model,
                            const CiConstraintSet& set);

/// Gradients of the augmented Lagrangian in x (at x, v) and in v (at the updated x, v).
CVector grad_x(const LadmmState& s, const LadmmParams& p, const CostModel& model,
               const CiConstraintSet& set);
CVector grad_v(const LadmmState& s, const LadmmParams& p, const CostModel& model,
               const CiConstraintSet& set);

/// One proximal gradient step; the step size doubles while the Lagrangian rises.
void update_x(LadmmState& s, const LadmmParams& p, const CostModel& model, const CiConstraintSet& set);
void update_v(LadmmState& s, const LadmmParams& p, const CostModel& model, const CiConstraintSet& set);
void update_z(LadmmState& s, const CiConstraintSet& set);
void update_u(LadmmState& s);
void update_multipliers(LadmmState& s, const CiConstraintSet& set);

struct LadmmTraceRow {
  int iteration = 0;
  double objective = 0.0;            // g on the raw x
  double projected_objective = 0.0;  // g on exp(j angle x)
  double res_xv = 0.0;
  double res_uv = 0.0;
  double res_zhx = 0.0;
  double wall_ms = 0.0;
};

struct LadmmResult {
  WaveformBlock waveform;  // phase-projected x
  LadmmState state;
  std::vector<LadmmTraceRow> trace;
  MarginReport margins;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
  std::string status;
};

LadmmState initial_ladmm_state(const WaveformBlock& initial, const CiConstraintSet& set);

LadmmResult run_ladmm(const WaveformBlock& initial, const CostModel& model, const CiConstraintSet& set,
                      const LadmmParams& params = {});

/// Columns: iteration,objective,projected_objective,res_xv,res_uv,res_zhx,wall_ms.
void write_ladmm_trace_csv(std::ostream& out, const std::vector<LadmmTraceRow>& trace);

}  // namespace cmwd
