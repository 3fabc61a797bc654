#pragma once

#include <optional>
#include <vector>

#include "cmwd/costs.hpp"

namespace cmwd {

/// diag(|Q| 1): row sums of entrywise moduli. Dominates any Hermitian Q.
/// Throws std::domain_error when Q is not Hermitian within `tol`.
RVector diagonal_majorizer(const CMatrix& Q, double tol = 1e-10);

enum class MajorizerKind { proposed, lambda_max };

/// Quantities that depend only on the scenario, not on the expansion point.
///
/// The quartic objective is sum_k w_k |x^H V_k x|^2 over the atoms
/// V_k in {B_u, D_{tau,q,q'}}. Its Psi = sum_k w_k vec(V_k^H) vec(V_k^H)^H is
/// block Toeplitz in the subpulse offset, so E = mat(|Psi| 1) is stored as one
/// N x N block per offset |delta| < P.
struct MajorizerContext {
  const CostModel* model = nullptr;
  int n_tx = 0;
  int block_len = 0;
  int lag_window = 1;  // min(P, L)
  CMatrix e_zero;      // E block for delta = 0
  CMatrix e_shift;     // E block for delta != 0, before the (L - |delta|) factor
  double lambda_psi = 0.0;
  CMatrix k_sim;  // sum_q a_q a_q^H when the similarity term is active
  CVector b_sim;  // vec(sum_q a_q x_ref^H)

  MajorizerContext(const CostModel& model, int block_len, bool need_lambda_psi = false);

  /// E block for subpulse offset delta (zero outside the lag window).
  CMatrix e_block(int delta) const;
};

/// Phi = 2 (S - E .* x_t x_t^H) (+ w_sim (I kron K_sim)) at a fixed x_t,
/// kept in factored block-Toeplitz form: block (l, l') is
/// 2 (S_{l-l'} - E_{l-l'} .* x_l x_l'^H).
class PhiOperator {
 public:
  PhiOperator(const MajorizerContext& ctx, const CMatrix& Xt, MajorizerKind kind);

  CVector apply(const CVector& p) const;

  /// Exact diag(|Phi| 1), O(L P N^2). Only meaningful for the proposed kind.
  RVector row_abs_sums() const;

  /// Largest eigenvalue via Lanczos with full reorthogonalization, plus the
  /// final residual bound. A non-empty `warm` seeds the iteration and
  /// receives the top Ritz vector.
  double lambda_max(int steps = 40, CVector* warm = nullptr) const;

  /// Dense Phi; small sizes only.
  CMatrix dense() const;

  int dim() const { return n_ * L_; }
  const CMatrix& s_block(int delta) const { return s_[static_cast<std::size_t>(delta + P_ - 1)]; }

 private:
  const MajorizerContext* ctx_;
  MajorizerKind kind_;
  int n_, L_, P_;
  CMatrix X_;
  std::vector<CMatrix> s_;  // S_delta, delta = -(P-1)..(P-1)
  std::vector<CMatrix> e_;  // E_delta, same indexing (proposed only)
};

/// Linear surrogate Re{x^H d} + const, tangent to the objective at the anchor.
struct MajorizerLinear {
  CVector d;
  CVector anchor;
  double anchor_objective = 0.0;
  double diag_trace = 0.0;  // trace of the diagonal majorizer of Phi

  CVector slice(int subpulse, int n_tx) const { return d.segment(subpulse * n_tx, n_tx); }
  double surrogate(const CVector& x) const {
    return anchor_objective + (x - anchor).dot(d).real();
  }
};

/// `objective_at_xt` skips re-evaluating the objective when the caller has it.
/// `ritz` carries the lambda_max eigenvector estimate between calls.
MajorizerLinear majorize_to_linear(const MajorizerContext& ctx, const CMatrix& Xt,
                                   MajorizerKind kind = MajorizerKind::proposed,
                                   std::optional<double> objective_at_xt = std::nullopt,
                                   CVector* ritz = nullptr);

/// Phi p for callers that only need the matvec.
CVector assemble_phi_times(const MajorizerContext& ctx, const CMatrix& Xt, const CVector& probe,
                           MajorizerKind kind = MajorizerKind::proposed);

/// Weighted quartic-plus-similarity objective minimized by the solvers.
double design_objective(const CMatrix& X, const CostModel& model);

}  // namespace cmwd
