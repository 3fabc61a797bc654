#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cmwd/ci_precoding.hpp"
#include "cmwd/costs.hpp"
#include "cmwd/majorizer.hpp"

namespace cmwd {

struct DualOptions {
  double eps2 = 1e-4;         // relative dual-objective change between sweeps
  double eps3 = 1e-4;         // bisection stops once h in (-eps3, 0]
  double eps = 1e-9;          // unreachable-constraint test
  double cs_tol = 1e-4;       // |nu_m h_m| required before the sweep loop stops
  int max_sweeps = 200;
  int max_bisect = 200;
};

struct DualResult {
  CVector x;
  RVector nu;
  RVector h;  // h_m = Gamma~_m - Re{hhat_m^H x}
  double dual_objective = 0.0;
  int sweeps = 0;
  bool converged = false;
  bool unreachable = false;
};

/// Coordinate-ascent bisection on the multipliers of
/// min Re{d^H x} s.t. Re{hhat_m^H x} >= Gamma~_m, |x_n| = 1.
/// `Hhat` holds hhat_m as columns; `nu0` is the warm start (may be empty).
DualResult solve_subpulse_dual(const CVector& d, const CMatrix& Hhat, const RVector& thresholds,
                               const RVector& nu0 = RVector(), const DualOptions& options = {});

struct MmOptions {
  double eps4 = 3e-6;
  int max_iter = 5000;
  MajorizerKind majorizer = MajorizerKind::proposed;
  DualOptions dual;
  int threads = 0;  // 0: OpenMP default
  double time_limit_sec = 0.0;  // 0: unlimited; otherwise stop with status "timeout"
};

struct MmTraceRow {
  int iteration = 0;
  CostBreakdown cost;
  double wall_ms = 0.0;
};

struct MmState {
  CVector x_t;
  RMatrix duals;  // 2K x L
  std::vector<double> objective_history;  // entry 0 is the initial point
  std::vector<MmTraceRow> trace;
  int iterations = 0;
  bool converged = false;
  bool stalled = false;
  int rejected_subpulse_steps = 0;
  int unreachable_subpulses = 0;
  std::string status;
};

struct MmResult {
  WaveformBlock waveform;
  MmState state;
  MarginReport margins;
};

MmResult run_mm(const WaveformBlock& initial, const CostModel& model, const CiConstraintSet& set,
                const MmOptions& options = {});

/// Columns: iteration,bp,ac,cc,total,wall_ms.
void write_mm_trace_csv(std::ostream& out, const MmState& state);

}  // namespace cmwd
