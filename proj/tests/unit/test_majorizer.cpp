#include <doctest.h>

#include <random>

#include "cmwd/majorizer.hpp"
#include "dense_oracle.hpp"

using namespace cmwd;

namespace {

struct Toy {
  CostModel model;
  oracle::Problem ref;
};

Toy make_toy(int N, int L, int P, Weights w, bool with_sim) {
  ArrayGeometry geo{N, N, 0.5};
  const std::vector<double> targets{-20.0, 35.0};
  const auto grid = uniform_angle_grid(-90.0, 90.0, 10.0);
  const auto spec = desired_rect_beam_pattern(targets, 20.0, grid);
  CVector xref = with_sim ? lfm_reference(L) : CVector();
  Toy t{CostModel::build(geo, spec, targets, P, w, xref), {}};
  t.ref.N = N;
  t.ref.L = L;
  t.ref.P = std::min(P, L);
  for (std::size_t u = 0; u < grid.size(); ++u) {
    t.ref.grid.push_back(oracle::steer(N, 0.5, grid[u]));
    t.ref.gd.push_back(spec.desired_gain[u]);
  }
  for (double a : targets) t.ref.targets.push_back(oracle::steer(N, 0.5, a));
  t.ref.w_bp = w.bp;
  t.ref.w_ac = w.ac;
  t.ref.w_cc = w.cc;
  t.ref.w_sim = w.sim;
  if (with_sim) {
    t.ref.ref = CVector(L);
    for (int l = 0; l < L; ++l) t.ref.ref(l) = std::exp(cdouble(0.0, kPi * l * l / L));
  }
  return t;
}

CMatrix random_phases(int N, int L, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  CMatrix X(N, L);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = std::polar(1.0, u(rng));
  return X;
}

double rel_err(const CMatrix& a, const CMatrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST_CASE("diagonal majorizer dominates and rejects non-Hermitian input") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  CMatrix A(5, 5);
  for (Eigen::Index i = 0; i < A.size(); ++i) A(i) = cdouble(g(rng), g(rng));
  const CMatrix Q = A + A.adjoint();
  const RVector r = diagonal_majorizer(Q);
  const CMatrix gap = CMatrix(r.cast<cdouble>().asDiagonal()) - Q;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(gap);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  CHECK_THROWS_AS(diagonal_majorizer(A), std::domain_error);
  CHECK_THROWS_AS(diagonal_majorizer(CMatrix(3, 4)), std::domain_error);
}

TEST_CASE("objective matches the Kronecker reference") {
  const Toy t = make_toy(4, 6, 3, {1.0, 2.0, 3.0, 0.5}, true);
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const CMatrix X = random_phases(4, 6, s);
    const double g = design_objective(X, t.model);
    CHECK(g == doctest::Approx(t.ref.objective(vec(X))).epsilon(1e-10));
  }
}

TEST_CASE("E blocks equal mat(|Psi| 1)") {
  const Toy t = make_toy(3, 5, 3, {1.0, 1.5, 0.7, 0.0}, false);
  const MajorizerContext ctx(t.model, 5);
  const oracle::CM E = t.ref.e_matrix();
  for (int l = 0; l < 5; ++l)
    for (int lp = 0; lp < 5; ++lp)
      CHECK(rel_err(ctx.e_block(l - lp), E.block(l * 3, lp * 3, 3, 3)) < 1e-10);
}

TEST_CASE("Phi, row sums and linear term match the dense construction") {
  for (bool sim : {false, true}) {
    const Toy t = make_toy(4, 6, 3, {1.0, 2.0, 3.0, sim ? 0.8 : 0.0}, sim);
    const MajorizerContext ctx(t.model, 6);
    const CMatrix X = random_phases(4, 6, 11);
    const PhiOperator phi(ctx, X, MajorizerKind::proposed);
    const CMatrix Pd = phi.dense();
    const oracle::CM Po = t.ref.phi(vec(X));
    CHECK(rel_err(Pd, Po) < 1e-10);
    CHECK(rel_err(Pd, Pd.adjoint()) < 1e-12);
    const RVector r = phi.row_abs_sums();
    CHECK((r - Po.cwiseAbs().rowwise().sum()).norm() / r.norm() < 1e-10);
    const MajorizerLinear lin = majorize_to_linear(ctx, X);
    CHECK(rel_err(lin.d, t.ref.linear_term(vec(X))) < 1e-10);
  }
}

TEST_CASE("linear surrogate is tangent and majorizes on the unit-modulus set") {
  const Toy t = make_toy(4, 6, 3, {1.0, 2.0, 3.0, 0.5}, true);
  const MajorizerContext ctx(t.model, 6, true);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  for (auto kind : {MajorizerKind::proposed, MajorizerKind::lambda_max}) {
    const CMatrix X = random_phases(4, 6, 5);
    const MajorizerLinear lin = majorize_to_linear(ctx, X, kind);
    CHECK(lin.surrogate(vec(X)) == doctest::Approx(design_objective(X, t.model)).epsilon(1e-12));

    // Tangency along a phase perturbation.
    CVector theta(24);
    for (int i = 0; i < 24; ++i) theta(i) = g(rng);
    const double h = 1e-6;
    const auto moved = [&](double e) {
      CVector x = vec(X);
      for (int i = 0; i < 24; ++i) x(i) *= std::polar(1.0, e * theta(i).real());
      return x;
    };
    const double fd_g = (t.ref.objective(moved(h)) - t.ref.objective(moved(-h))) / (2 * h);
    const double fd_u = (lin.surrogate(moved(h)) - lin.surrogate(moved(-h))) / (2 * h);
    CHECK(fd_u == doctest::Approx(fd_g).epsilon(1e-5));

    // Dominance, near and far from the anchor.
    for (int trial = 0; trial < 50; ++trial) {
      const double scale = trial < 25 ? 0.05 : 3.0;
      CVector x = vec(X);
      for (int i = 0; i < 24; ++i) x(i) *= std::polar(1.0, scale * g(rng));
      CHECK(t.ref.objective(x) <= lin.surrogate(x) + 1e-9 * std::abs(lin.surrogate(x)));
    }
  }
}

TEST_CASE("lambda_max upper-bounds the spectrum of Phi") {
  const Toy t = make_toy(3, 5, 2, {1.0, 1.0, 1.0, 0.0}, false);
  const MajorizerContext ctx(t.model, 5, true);
  const CMatrix X = random_phases(3, 5, 2);
  const PhiOperator phi(ctx, X, MajorizerKind::lambda_max);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(phi.dense());
  const double top = es.eigenvalues().maxCoeff();
  const double lam = phi.lambda_max();
  CHECK(lam >= top - 1e-9 * std::abs(top));
  CHECK(lam <= top + 1e-6 * std::abs(top) + 1e-9);
  // lambda_psi bounds the largest eigenvalue of Psi.
  Eigen::SelfAdjointEigenSolver<CMatrix> ps(t.ref.psi(), Eigen::EigenvaluesOnly);
  CHECK(ctx.lambda_psi == doctest::Approx(ps.eigenvalues().maxCoeff()).epsilon(1e-8));
}
