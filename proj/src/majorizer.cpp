#include "cmwd/majorizer.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "cmwd/correlation.hpp"

namespace cmwd {

RVector diagonal_majorizer(const CMatrix& Q, double tol) {
  if (Q.rows() != Q.cols()) throw std::domain_error("diagonal_majorizer: matrix is not square");
  const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  if ((Q - Q.adjoint()).cwiseAbs().maxCoeff() > tol * scale)
    throw std::domain_error("diagonal_majorizer: matrix is not Hermitian");
  return Q.cwiseAbs().rowwise().sum();
}

namespace {

struct Atom {
  CMatrix A;  // N x N factor: B_u = I kron A, D = J_{-tau} kron A
  int lag;    // tau (0 for beam-pattern atoms)
  double weight;
  bool beam;
  int q = -1, p = -1;  // D atoms: A = a_p a_q^H
};

std::vector<Atom> collect_atoms(const CostModel& m, int P) {
  std::vector<Atom> atoms;
  const auto& w = m.weights;
  if (w.bp > 0.0) {
    const CMatrix Rd = m.desired_covariance();
    for (int u = 0; u < m.grid_size(); ++u) {
      const CVector a = m.grid_steering.col(u);
      atoms.push_back({(m.desired(u) / m.desired_energy) * Rd - a * a.adjoint(), 0, w.bp, true});
    }
  }
  const int Q = m.n_targets();
  for (int tau = -(P - 1); tau <= P - 1; ++tau)
    for (int q = 0; q < Q; ++q)
      for (int p = 0; p < Q; ++p) {
        const double wt = (p == q) ? (tau == 0 ? 0.0 : w.ac) : w.cc;
        if (wt <= 0.0) continue;
        const CMatrix A = m.target_steering.col(p) * m.target_steering.col(q).adjoint();
        atoms.push_back({A, tau, wt, false, q, p});
      }
  return atoms;
}

// Row-absolute sums of sum_k w_k conj(vec A_k) vec(A_k)^T, returned as the
// N x N block E[n, m] = rowabs[m + n N].
CMatrix e_block_from(const std::vector<const Atom*>& atoms, int N) {
  CMatrix out = CMatrix::Zero(N, N);
  if (atoms.empty()) return out;
  CMatrix alpha(N * N, static_cast<Eigen::Index>(atoms.size()));
  RVector w(static_cast<Eigen::Index>(atoms.size()));
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    alpha.col(static_cast<Eigen::Index>(k)) =
        Eigen::Map<const CVector>(atoms[k]->A.data(), N * N);
    w(static_cast<Eigen::Index>(k)) = atoms[k]->weight;
  }
  const CMatrix W = alpha.conjugate() * w.cast<cdouble>().asDiagonal() * alpha.transpose();
  const RVector rowabs = W.cwiseAbs().rowwise().sum();
  for (int n = 0; n < N; ++n)
    for (int m = 0; m < N; ++m) out(n, m) = rowabs(m + n * N);
  return out;
}

double lambda_psi_from(const std::vector<Atom>& atoms, const CostModel& model, int L) {
  const auto K = static_cast<Eigen::Index>(atoms.size());
  if (K == 0) return 0.0;
  const int N = model.n_tx;
  const CMatrix& At = model.target_steering;
  CMatrix alpha(N * N, K);
  for (Eigen::Index k = 0; k < K; ++k)
    alpha.col(k) = Eigen::Map<const CVector>(atoms[static_cast<std::size_t>(k)].A.data(), N * N);
  // Tr(V_i V_j^H): beam/beam L Tr(K K'); D/D (L-|tau|) [tau = tau'] (a_q^H a_q2)(a_p2^H a_p);
  // beam/D L [tau = 0] a_p^H K a_q.
  CMatrix gram = alpha.adjoint() * alpha;  // Tr(A_i^H A_j)
  for (Eigen::Index i = 0; i < K; ++i)
    for (Eigen::Index j = 0; j < K; ++j) {
      const Atom& ai = atoms[static_cast<std::size_t>(i)];
      const Atom& aj = atoms[static_cast<std::size_t>(j)];
      cdouble t;
      if (ai.beam && aj.beam) {
        t = static_cast<double>(L) * std::conj(gram(i, j));
      } else if (!ai.beam && !aj.beam) {
        if (ai.lag != aj.lag) {
          t = 0.0;
        } else {
          const cdouble qq = At.col(ai.q).dot(At.col(aj.q));
          const cdouble pp = At.col(aj.p).dot(At.col(ai.p));
          t = static_cast<double>(L - std::abs(ai.lag)) * qq * pp;
        }
      } else if (ai.beam) {
        t = aj.lag == 0 ? static_cast<double>(L) *
                              At.col(aj.p).dot(ai.A * At.col(aj.q))
                        : cdouble(0.0);
      } else {
        t = ai.lag == 0 ? static_cast<double>(L) *
                              std::conj(At.col(ai.p).dot(aj.A * At.col(ai.q)))
                        : cdouble(0.0);
      }
      gram(i, j) = std::sqrt(ai.weight * aj.weight) * t;
    }
  CMatrix h = 0.5 * (gram + gram.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

MajorizerContext::MajorizerContext(const CostModel& m, int L, bool need_lambda_psi)
    : model(&m), n_tx(m.n_tx), block_len(L), lag_window(std::min(m.max_lag, L)) {
  if (L < 1) throw std::invalid_argument("MajorizerContext: block_len must be >= 1");
  const auto atoms = collect_atoms(m, lag_window);
  std::vector<const Atom*> zero, shifted;
  for (const auto& a : atoms) {
    if (a.lag == 0) zero.push_back(&a);
    // The shifted set is identical for every tau != 0; take tau = 1.
    if (a.lag == 1) shifted.push_back(&a);
  }
  e_zero = e_block_from(zero, n_tx);
  e_shift = e_block_from(shifted, n_tx);
  if (need_lambda_psi) lambda_psi = lambda_psi_from(atoms, m, L);
  if (m.uses_similarity()) {
    if (m.reference.size() != L)
      throw std::invalid_argument("MajorizerContext: reference length != L");
    k_sim = m.target_steering * m.target_steering.adjoint();
    CMatrix b = CMatrix::Zero(n_tx, L);
    for (int q = 0; q < m.n_targets(); ++q)
      b += m.target_steering.col(q) * m.reference.adjoint();
    b_sim = vec(b);
  }
}

CMatrix MajorizerContext::e_block(int delta) const {
  const int ad = std::abs(delta);
  if (ad >= lag_window) return CMatrix::Zero(n_tx, n_tx);
  if (ad == 0) return static_cast<double>(block_len) * e_zero;
  return static_cast<double>(block_len - ad) * e_shift;
}

PhiOperator::PhiOperator(const MajorizerContext& ctx, const CMatrix& Xt, MajorizerKind kind)
    : ctx_(&ctx), kind_(kind), n_(ctx.n_tx), L_(ctx.block_len), P_(ctx.lag_window), X_(Xt) {
  if (Xt.rows() != n_ || Xt.cols() != L_)
    throw std::invalid_argument("PhiOperator: waveform dimensions do not match the context");
  const CostModel& m = *ctx.model;
  const auto& w = m.weights;
  s_.assign(static_cast<std::size_t>(2 * P_ - 1), CMatrix::Zero(n_, n_));

  if (w.bp > 0.0) {
    const CMatrix G = m.grid_steering.adjoint() * X_;
    const RVector gains = G.rowwise().squaredNorm();
    const double alpha = m.desired.dot(gains) / m.desired_energy;
    const RVector c = alpha * m.desired - gains;  // x_t^H B_u x_t
    const double s = m.desired.dot(c) / m.desired_energy;
    const RVector beta = s * m.desired - c;
    s_[static_cast<std::size_t>(P_ - 1)] +=
        w.bp * (m.grid_steering * beta.cast<cdouble>().asDiagonal() * m.grid_steering.adjoint());
  }

  const int Q = m.n_targets();
  if ((w.ac > 0.0 || w.cc > 0.0) && Q > 0) {
    std::vector<CVector> seq;
    for (int q = 0; q < Q; ++q) seq.push_back(beam_domain(X_, m.target_steering.col(q)));
    for (int q = 0; q < Q; ++q)
      for (int p = 0; p < Q; ++p) {
        const double wt = p == q ? w.ac : w.cc;
        if (wt <= 0.0) continue;
        const CVector corr = cross_correlation(seq[static_cast<std::size_t>(q)],
                                               seq[static_cast<std::size_t>(p)]);
        const CMatrix A = m.target_steering.col(p) * m.target_steering.col(q).adjoint();
        for (int tau = -(P_ - 1); tau <= P_ - 1; ++tau) {
          if (p == q && tau == 0) continue;
          s_[static_cast<std::size_t>(tau + P_ - 1)] += wt * std::conj(corr(lag_index(tau, L_))) * A;
        }
      }
  }
  if (m.uses_similarity()) s_[static_cast<std::size_t>(P_ - 1)] += 0.5 * w.sim * ctx.k_sim;

  if (kind_ == MajorizerKind::proposed) {
    e_.resize(static_cast<std::size_t>(2 * P_ - 1));
    for (int delta = -(P_ - 1); delta <= P_ - 1; ++delta)
      e_[static_cast<std::size_t>(delta + P_ - 1)] = ctx.e_block(delta);
  }
}

CVector PhiOperator::apply(const CVector& p) const {
  if (p.size() != dim()) throw std::invalid_argument("PhiOperator::apply: probe length mismatch");
  const Eigen::Map<const CMatrix> Pm(p.data(), n_, L_);
  CMatrix out = CMatrix::Zero(n_, L_);
  // Column l of the output collects block (l, l - delta) for every offset.
  CMatrix XP;
  if (kind_ == MajorizerKind::proposed) XP = X_.conjugate().cwiseProduct(Pm);
  CMatrix acc = CMatrix::Zero(n_, L_);
  for (int delta = -(P_ - 1); delta <= P_ - 1; ++delta) {
    const int lo = std::max(0, delta);
    const int len = L_ - std::abs(delta);
    if (len <= 0) continue;
    const auto idx = static_cast<std::size_t>(delta + P_ - 1);
    out.middleCols(lo, len).noalias() += s_[idx] * Pm.middleCols(lo - delta, len);
    if (kind_ == MajorizerKind::proposed)
      acc.middleCols(lo, len).noalias() += e_[idx] * XP.middleCols(lo - delta, len);
  }
  if (kind_ == MajorizerKind::proposed) out -= X_.cwiseProduct(acc);
  if (kind_ == MajorizerKind::lambda_max) {
    const cdouble inner = vec(X_).dot(p);  // x_t^H p
    out -= ctx_->lambda_psi * inner * X_;
  }
  return 2.0 * vec(out);
}

RVector PhiOperator::row_abs_sums() const {
  if (kind_ != MajorizerKind::proposed)
    throw std::logic_error("row_abs_sums: only defined for the proposed majorizer");
  // Split real/imaginary, row-major copies so the inner loop vectorizes.
  const int N = n_;
  const std::size_t nb = static_cast<std::size_t>(2 * P_ - 1);
  std::vector<double> sr(nb * N * N), si(nb * N * N), er(nb * N * N);
  for (std::size_t k = 0; k < nb; ++k)
    for (int n = 0; n < N; ++n)
      for (int m = 0; m < N; ++m) {
        const std::size_t o = (k * N + n) * N + m;
        sr[o] = s_[k](n, m).real();
        si[o] = s_[k](n, m).imag();
        er[o] = e_[k](n, m).real();
      }
  const RMatrix xr = X_.real(), xi = X_.imag();
  RVector r = RVector::Zero(dim());
  for (int l = 0; l < L_; ++l)
    for (int delta = -(P_ - 1); delta <= P_ - 1; ++delta) {
      const int lp = l - delta;
      if (lp < 0 || lp >= L_) continue;
      const std::size_t k = static_cast<std::size_t>(delta + P_ - 1);
      const double* cr = xr.col(lp).data();
      const double* ci = xi.col(lp).data();
      for (int n = 0; n < N; ++n) {
        const double ar = xr(n, l), ai = xi(n, l);
        const double* Sr = &sr[(k * N + n) * N];
        const double* Si = &si[(k * N + n) * N];
        const double* Er = &er[(k * N + n) * N];
        double acc = 0.0;
        for (int m = 0; m < N; ++m) {
          const double pr = ar * cr[m] + ai * ci[m];
          const double pi = ai * cr[m] - ar * ci[m];
          const double vr = Sr[m] - Er[m] * pr;
          const double vi = Si[m] - Er[m] * pi;
          acc += std::sqrt(vr * vr + vi * vi);
        }
        r(l * N + n) += acc;
      }
    }
  return 2.0 * r;
}

double PhiOperator::lambda_max(int steps, CVector* warm) const {
  const int n = dim();
  const int k = std::min(steps, n);
  CVector v(n);
  if (warm && warm->size() == n && warm->norm() > 0.0) {
    v = warm->normalized();
  } else {
    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < n; ++i) v(i) = cdouble(g(rng), g(rng));
    v.normalize();
  }
  CMatrix V(n, k + 1);
  V.col(0) = v;
  std::vector<double> alpha, beta;
  int m = 0;
  for (int j = 0; j < k; ++j) {
    CVector w = apply(V.col(j));
    const double a = V.col(j).dot(w).real();
    alpha.push_back(a);
    w -= a * V.col(j);
    if (j > 0) w -= beta.back() * V.col(j - 1);
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i <= j; ++i) w -= V.col(i).dot(w) * V.col(i);
    const double b = w.norm();
    m = j + 1;
    beta.push_back(b);
    if (b <= 1e-12 * std::max(1.0, std::abs(a))) break;
    V.col(j + 1) = w / b;
  }
  RMatrix T = RMatrix::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    T(i, i) = alpha[static_cast<std::size_t>(i)];
    if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
  }
  Eigen::SelfAdjointEigenSolver<RMatrix> es(T);
  const Eigen::Index top = m - 1;
  const double theta = es.eigenvalues()(top);
  const double resid = std::abs(beta.back() * es.eigenvectors()(m - 1, top));
  if (warm) *warm = V.leftCols(m) * es.eigenvectors().col(top).cast<cdouble>();
  return theta + resid;
}

CMatrix PhiOperator::dense() const {
  const int n = dim();
  CMatrix D(n, n);
  CVector e = CVector::Zero(n);
  for (int j = 0; j < n; ++j) {
    e(j) = 1.0;
    D.col(j) = apply(e);
    e(j) = 0.0;
  }
  return D;
}

MajorizerLinear majorize_to_linear(const MajorizerContext& ctx, const CMatrix& Xt,
                                   MajorizerKind kind, std::optional<double> objective_at_xt, CVector* ritz) {
  const PhiOperator phi(ctx, Xt, kind);
  const CVector x = vec(Xt);
  MajorizerLinear out;
  out.anchor = x;
  out.anchor_objective = objective_at_xt ? *objective_at_xt : design_objective(Xt, *ctx.model);
  const CVector phix = phi.apply(x);
  if (kind == MajorizerKind::proposed) {
    const RVector r = phi.row_abs_sums();
    out.d = 2.0 * (phix - r.cast<cdouble>().cwiseProduct(x));
    out.diag_trace = r.sum();
  } else {
    // a warm start from the previous iterate's top Ritz vector needs far fewer steps
    const bool warm = ritz && ritz->size() == phi.dim();
    const double lam = phi.lambda_max(warm ? 15 : 40, ritz);
    out.d = 2.0 * (phix - lam * x);
    out.diag_trace = lam * static_cast<double>(x.size());
  }
  if (ctx.model->uses_similarity()) out.d -= 2.0 * ctx.model->weights.sim * ctx.b_sim;
  return out;
}

CVector assemble_phi_times(const MajorizerContext& ctx, const CMatrix& Xt, const CVector& probe,
                           MajorizerKind kind) {
  return PhiOperator(ctx, Xt, kind).apply(probe);
}

double design_objective(const CMatrix& X, const CostModel& model) {
  return total_objective(X, model).total;
}

}  // namespace cmwd
