// One PASS/FAIL line per numbered acceptance criterion.
// Exit status is 0 once every criterion has been evaluated; --strict makes any FAIL fatal.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cmwd/experiment.hpp"
#include "cmwd/majorizer.hpp"
#include "dense_oracle.hpp"

using namespace cmwd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char b[64];
  std::snprintf(b, sizeof b, f, v);
  return b;
}

CMatrix random_complex(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CMatrix X(r, c);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = cdouble(g(rng), g(rng));
  return X;
}

// Reference setting: N_T = 8, L = 32, K = 2, gamma = 6 dB, weights (1, 4, 4), P = 8.
ExperimentConfig reference_setting() {
  ExperimentConfig c = parse_config_text(R"({"schema_version": 1})");
  c.mm.max_iter = 10000;
  return c;
}

constexpr int kSeeds = 20;

struct SeedRuns {
  DesignProblem prob;
  WaveformBlock init;
  MmResult mm;
  MmResult lam;
  LadmmResult ladmm;
  MmResult radar;
  double mm_sec = 0.0;
};

std::vector<SeedRuns>& reference_runs() {
  static std::vector<SeedRuns> runs = [] {
    std::vector<SeedRuns> out(kSeeds);
    const ExperimentConfig cfg = reference_setting();
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < kSeeds; ++i) {
      const std::uint64_t seed = i + 1;
      auto& r = out[i];
      r.prob = build_problem(cfg, seed, true);
      r.init = initialize_waveform(r.prob.constraints, 8, cfg.block_len, seed).waveform;
      const auto t1 = std::chrono::steady_clock::now();
      r.mm = run_mm(r.init, r.prob.model, r.prob.constraints, cfg.mm);
      r.mm_sec = seconds_since(t1);
      MmOptions lam = cfg.mm;
      lam.majorizer = MajorizerKind::lambda_max;
      r.lam = run_mm(r.init, r.prob.model, r.prob.constraints, lam);
      r.ladmm = run_ladmm(r.init, r.prob.model, r.prob.constraints, cfg.ladmm);
      const DesignProblem radar = build_problem(cfg, seed, false);
      r.radar = run_mm(r.mm.waveform, radar.model, radar.constraints, cfg.mm);
      std::cerr << "seed " << seed << " done at " << fmt("%.1f", seconds_since(t0)) << " s\n";
    }
    std::cerr << "reference runs: " << fmt("%.1f", seconds_since(t0)) << " s\n";
    return out;
  }();
  return runs;
}

Outcome c1_majorizer_validity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(2, 16);
  double worst_probe = std::numeric_limits<double>::infinity(), worst_eig = worst_probe;
  int bad = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = dim(rng);
    const CMatrix A = random_complex(n, n, rng);
    const CMatrix Q = A + A.adjoint();
    const RVector r = diagonal_majorizer(Q);
    const CMatrix gap = CMatrix(r.cast<cdouble>().asDiagonal()) - Q;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(Q, Eigen::EigenvaluesOnly);
    const double qnorm = es.eigenvalues().cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<CMatrix> eg(gap, Eigen::EigenvaluesOnly);
    const double min_eig = eg.eigenvalues().minCoeff();
    worst_eig = std::min(worst_eig, min_eig);
    if (min_eig < -1e-9) ++bad;
    for (int p = 0; p < 4; ++p) {
      const CVector u = random_complex(n, 1, rng);
      const double v = u.dot(gap * u).real() / (u.squaredNorm() * qnorm);
      worst_probe = std::min(worst_probe, v);
      if (v < -1e-9) ++bad;
    }
  }
  const double sec = seconds_since(t0);
  return {bad == 0 && sec < 30.0, "10000 matrices, min normalized probe " + fmt("%.2e", worst_probe) +
                                      ", min eig " + fmt("%.2e", worst_eig) + ", " + fmt("%.1f", sec) + " s"};
}

Outcome c2_monotone() {
  const auto t0 = std::chrono::steady_clock::now();
  auto& runs = reference_runs();
  int viol = 0;
  double total = 0.0;
  int iters_min = 1 << 30, iters_max = 0;
  for (const auto& r : runs) {
    const auto& h = r.mm.state.objective_history;
    for (std::size_t i = 1; i < h.size(); ++i)
      if (h[i] > h[i - 1] + 1e-8) ++viol;
    total += r.mm_sec;
    iters_min = std::min(iters_min, r.mm.state.iterations);
    iters_max = std::max(iters_max, r.mm.state.iterations);
  }
  (void)t0;
  return {viol == 0 && total < 600.0, std::to_string(viol) + " increases over 20 runs (" +
                                          std::to_string(iters_min) + "-" + std::to_string(iters_max) +
                                          " iterations), MM time " + fmt("%.1f", total) + " s"};
}

Outcome c3_speedup() {
  int wins = 0, lam_converged = 0;
  std::ostringstream per;
  for (const auto& r : reference_runs()) {
    lam_converged += r.lam.state.converged;
    const double target = r.lam.state.objective_history.back();
    const int lam_iters = static_cast<int>(r.lam.state.objective_history.size()) - 1;
    const auto& h = r.mm.state.objective_history;
    int hit = -1;
    for (std::size_t i = 0; i < h.size(); ++i)
      if (h[i] <= target) {
        hit = static_cast<int>(i);
        break;
      }
    if (hit >= 0 && hit < lam_iters) ++wins;
    per << ' ' << (hit < 0 ? std::string("never") : std::to_string(hit)) << '/' << lam_iters;
  }
  return {wins >= 18, std::to_string(wins) + "/20 seeds faster; lambda_max met its stop rule on " +
                          std::to_string(lam_converged) + "/20, otherwise its value at the iteration cap is the target" +
                          " (proposed/lambda_max iterations:" + per.str() + ")"};
}

Outcome c4_operator_identities() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> nd(2, 4), ld(2, 8);
  double worst[4] = {0, 0, 0, 0};
  const auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); };
  for (int seed = 0; seed < 50; ++seed) {
    const int N = nd(rng), L = ld(rng);
    const int P = std::uniform_int_distribution<int>(1, L)(rng);
    const std::vector<double> targets{-25.0, 30.0};
    const auto grid = uniform_angle_grid(-90.0, 90.0, 10.0);
    const auto spec = desired_rect_beam_pattern(targets, 30.0, grid);
    const Weights w{1.0, 2.0, 3.0, 0.0};
    const CostModel model = CostModel::build(ArrayGeometry{N, N, 0.5}, spec, targets, P, w);
    const CMatrix X = random_complex(N, L, rng);
    const CVector x = vec(X);

    for (int q = 0; q < 2; ++q)
      for (int p = 0; p < 2; ++p)
        for (int tau = -(L - 1); tau <= L - 1; ++tau) {
          const CVector aq = model.target_steering.col(q), ap = model.target_steering.col(p);
          const CMatrix D = oracle::kron(oracle::shift(L, -tau), ap * aq.adjoint());
          worst[0] = std::max(worst[0], rel(space_time_correlation(X, aq, ap, tau), std::norm(x.dot(D * x))));
        }
    worst[1] = std::max(worst[1], rel(beam_pattern_mse(X, model, BpForm::direct), beam_pattern_mse(X, model, BpForm::bu)));

    oracle::Problem ref;
    ref.N = N;
    ref.L = L;
    ref.P = std::min(P, L);
    for (std::size_t u = 0; u < grid.size(); ++u) {
      ref.grid.push_back(oracle::steer(N, 0.5, grid[u]));
      ref.gd.push_back(spec.desired_gain[u]);
    }
    for (double a : targets) ref.targets.push_back(oracle::steer(N, 0.5, a));
    ref.w_bp = w.bp;
    ref.w_ac = w.ac;
    ref.w_cc = w.cc;
    const CMatrix Xu = phase_project(X);
    const MajorizerContext ctx(model, L);
    const PhiOperator phi(ctx, Xu, MajorizerKind::proposed);
    const CVector probe = random_complex(N * L, 1, rng);
    const CVector dense = ref.phi(vec(Xu)) * probe;
    worst[2] = std::max(worst[2], (phi.apply(probe) - dense).norm() / dense.norm());

    worst[3] = std::max(worst[3], rel(biconvex_cost(X, X, model), total_objective(X, model).total));
  }
  const double m = *std::max_element(worst, worst + 4);
  const double sec = seconds_since(t0);
  return {m < 1e-8 && sec < 60.0, "max rel diff chi " + fmt("%.1e", worst[0]) + ", bp " + fmt("%.1e", worst[1]) +
                                      ", Phi " + fmt("%.1e", worst[2]) + ", biconvex " + fmt("%.1e", worst[3]) +
                                      ", " + fmt("%.1f", sec) + " s"};
}

Outcome c5_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(505);
  double worst = 0.0, worst_plain = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const int N = 2 + inst % 3, L = 3 + inst % 5, K = 1 + inst % 2;
    const std::vector<double> targets{-25.0, 30.0};
    const auto grid = uniform_angle_grid(-90.0, 90.0, 15.0);
    const CostModel model = CostModel::build(ArrayGeometry{N, N, 0.5}, desired_rect_beam_pattern(targets, 30.0, grid),
                                             targets, std::min(3, L), {1.0, 2.0, 3.0, 0.0});
    CommsConfig c;
    c.n_users = K;
    c.channels = generate_rayleigh_channels(600 + inst, K, N);
    c.symbols = draw_psk_symbols(700 + inst, L, K, 4);
    c.snr_thresholds.assign(K, 4.0);
    const CiConstraintSet set = build_ci_set(c, 1.0, N);
    LadmmParams p;
    p.mu1 = 3.0;
    p.mu2 = 2.0;
    p.mu3 = 5.0;
    LadmmState st;
    st.x = vec(random_complex(N, L, rng));
    st.v = vec(random_complex(N, L, rng));
    st.u = phase_project(CVector(vec(random_complex(N, L, rng))));
    st.eta1 = 0.1 * vec(random_complex(N, L, rng));
    st.eta2 = 0.1 * vec(random_complex(N, L, rng));
    st.z = vec(random_complex(2 * K, L, rng));
    st.rho = 0.1 * vec(random_complex(2 * K, L, rng));
    const CVector gx = grad_x(st, p, model, set), gv = grad_v(st, p, model, set);
    const double h = 1e-6;
    for (auto [var, g] : {std::pair{&LadmmState::x, &gx}, std::pair{&LadmmState::v, &gv}}) {
      for (Eigen::Index i = 0; i < g->size(); ++i) {
        LadmmState s = st;
        const cdouble orig = (s.*var)(i);
        const auto at = [&](cdouble d) {
          (s.*var)(i) = orig + d;
          return augmented_lagrangian(s, p, model, set);
        };
        const cdouble fd((at(h) - at(-h)) / (2 * h), (at(cdouble(0, h)) - at(cdouble(0, -h))) / (2 * h));
        worst = std::max(worst, std::abs((*g)(i) - fd) / std::max(std::abs(fd), 1.0));
        worst_plain = std::max(worst_plain, std::abs((*g)(i) - fd) / std::abs(fd));
      }
    }
  }
  const double sec = seconds_since(t0);
  return {worst_plain < 1e-5 && sec < 120.0, "20 instances, max |g - fd| / |fd| = " + fmt("%.2e", worst_plain) +
                                                 " (with |fd| floored at 1: " + fmt("%.2e", worst) + "), " +
                                                 fmt("%.1f", sec) + " s"};
}

Outcome c6_kkt() {
  double worst_mod = 0.0, worst_viol = -1e300, worst_cs = 0.0;
  for (const auto& r : reference_runs()) {
    const auto& set = r.prob.constraints;
    const CMatrix& X = r.mm.waveform.X;
    worst_mod = std::max(worst_mod, r.mm.waveform.modulus_error());
    for (int l = 0; l < set.block_len; ++l) {
      const RVector h = set.thresholds - (set.rotated[l].adjoint() * X.col(l)).real();
      worst_viol = std::max(worst_viol, h.maxCoeff());
      worst_cs = std::max(worst_cs, r.mm.state.duals.col(l).cwiseProduct(h).cwiseAbs().maxCoeff());
    }
  }
  return {worst_mod <= 1e-12 && worst_viol <= 1e-4 && worst_cs <= 1e-3,
          "max ||x_n| - 1| " + fmt("%.1e", worst_mod) + ", max h " + fmt("%.2e", worst_viol) + ", max |nu h| " +
              fmt("%.2e", worst_cs)};
}

Outcome c7_ladmm() {
  int ok = 0;
  double worst_gap = -1e300, worst_viol = 0.0;
  for (const auto& r : reference_runs()) {
    const double viol = std::max(0.0, -r.ladmm.margins.min_margin);
    const double gap = db10(total_objective(r.ladmm.waveform.X, r.prob.model).total /
                            total_objective(r.mm.waveform.X, r.prob.model).total);
    worst_gap = std::max(worst_gap, gap);
    worst_viol = std::max(worst_viol, viol);
    if (viol < 1e-3 && gap <= 3.0) ++ok;
  }
  return {ok >= 18, std::to_string(ok) + "/20 seeds feasible and within 3 dB (worst gap " + fmt("%.2f", worst_gap) +
                        " dB, worst violation " + fmt("%.1e", worst_viol) + ")"};
}

Outcome c8_sidelobes() {
  int drop_ok = 0, dominance_ok = 0;
  double dmin = 1e300, dmax = -1e300, nmin = 1e300;
  for (const auto& r : reference_runs()) {
    const CMatrix& A = r.prob.model.target_steering;
    const double ac0 = autocorrelation_isl(r.init.X, A, 8), ac1 = autocorrelation_isl(r.mm.waveform.X, A, 8);
    const double drop = db10(ac0 / ac1);
    // same drop measured relative to each waveform's zero-lag peaks
    double pk0 = 0.0, pk1 = 0.0;
    for (int q = 0; q < A.cols(); ++q) {
      pk0 += std::pow(beam_gain(r.init.X, A.col(q)), 2);
      pk1 += std::pow(beam_gain(r.mm.waveform.X, A.col(q)), 2);
    }
    nmin = std::min(nmin, db10((ac0 / pk0) / (ac1 / pk1)));
    dmin = std::min(dmin, drop);
    dmax = std::max(dmax, drop);
    if (drop >= 15.0) ++drop_ok;
    const double g_dfrc = total_objective(r.mm.waveform.X, r.prob.model).total;
    const double g_radar = total_objective(r.radar.waveform.X, r.prob.model).total;
    if (g_radar <= g_dfrc) ++dominance_ok;
  }
  return {drop_ok == kSeeds && dominance_ok == kSeeds,
          "ac-ISL drop >= 15 dB on " + std::to_string(drop_ok) + "/20 seeds (range " + fmt("%.1f", dmin) + " to " +
              fmt("%.1f", dmax) + " dB; peak-normalized drop >= " + fmt("%.1f", nmin) +
              " dB); radar-only <= DFRC on " + std::to_string(dominance_ok) + "/20"};
}

Outcome c9_cfar() {
  const auto t0 = std::chrono::steady_clock::now();
  CfarConfig cfg;
  std::mt19937_64 rng(909);
  std::exponential_distribution<double> ex(1.0);
  long alarms = 0, cells = 0;
  std::vector<double> p(1000);
  for (int r = 0; r < 1000; ++r) {
    for (auto& x : p) x = ex(rng);
    for (bool d : cfar_detect(p, cfg)) alarms += d;
    cells += static_cast<long>(p.size());
  }
  const double rate = static_cast<double>(alarms) / cells;
  const double sigma = std::sqrt(cfg.p_fa * (1 - cfg.p_fa) / cells);
  const double sec = seconds_since(t0);
  return {std::abs(rate - cfg.p_fa) <= 3 * sigma && sec < 60.0,
          "empirical P_fa " + fmt("%.5f", rate) + " over 1e6 cells (3 sigma = " + fmt("%.5f", 3 * sigma) + "), " +
              fmt("%.1f", sec) + " s"};
}

Outcome c10_unmasking() {
  const ExperimentConfig cfg = reference_setting();
  const auto& r = reference_runs().front();
  std::vector<double> rcs;
  for (int k = 0; k <= 60; ++k) rcs.push_back(-10.0 + 0.25 * k);
  // well above the 500-trial minimum so that Pd near the 0.5 and 0.9 gates is resolved
  PdOptions po;
  po.n_trials = 4000;
  const auto init = detection_probability(r.init, cfg.scene, cfg.array, rcs, cfg.evaluation.cfar, 1010, po);
  const auto mm = detection_probability(r.mm.waveform, cfg.scene, cfg.array, rcs, cfg.evaluation.cfar, 1010, po);
  std::string hits;
  int n = 0;
  for (std::size_t i = 0; i < rcs.size(); ++i)
    if (mm[i].pd >= 0.9 && init[i].pd <= 0.5) {
      if (n++ < 3) hits += " " + fmt("%.2f", rcs[i]) + " dBsm (" + fmt("%.3f", mm[i].pd) + " vs " + fmt("%.3f", init[i].pd) + ")";
    }
  return {n > 0, std::to_string(n) + " RCS points with MM Pd >= 0.9 and initializer Pd <= 0.5, 4000 trials each:" +
                     (n ? hits : std::string(" none"))};
}

Outcome c11_scaling() {
  ExperimentConfig cfg = reference_setting();
  cfg.scaling.block_lens = {4, 8, 16, 32, 64, 128};
  cfg.scaling.solvers = {SolverKind::ladmm, SolverKind::mm};
  cfg.scaling.seed = 1;
  const auto rows = run_scaling_study(cfg);
  std::vector<double> lx, ly;
  double lad128 = 0.0, mm128 = 0.0;
  std::string table;
  for (const auto& r : rows) {
    table += " " + to_string(r.solver) + "@" + std::to_string(r.ln_t / 8) + "=" + fmt("%.2f", r.wall_sec) + "s";
    if (r.solver == SolverKind::ladmm) {
      lx.push_back(std::log(r.ln_t));
      ly.push_back(std::log(r.wall_sec));
      if (r.ln_t == 1024) lad128 = r.wall_sec;
    } else if (r.ln_t == 1024) {
      mm128 = r.wall_sec;
    }
  }
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const bool censored = std::any_of(rows.begin(), rows.end(), [](const ScalingRow& r) { return r.censored; });
  return {slope < 2.0 && lad128 < mm128 && !censored,
          "LADMM log-log slope " + fmt("%.2f", slope) + ", L=128: LADMM " + fmt("%.2f", lad128) + " s vs MM " +
              fmt("%.2f", mm128) + " s;" + table};
}

Outcome c12_determinism() {
  const fs::path root = fs::temp_directory_path() / "cmwd_acceptance_determinism";
  fs::remove_all(root);
  ExperimentConfig cfg = reference_setting();
  cfg.seeds = {2};
  cfg.threads = 2;
  for (const char* run : {"a", "b"}) {
    cfg.output_dir = root / run;
    run_experiment(cfg);
  }
  int compared = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(root / "a" / "seed_2")) {
    const std::string name = e.path().filename().string();
    if (e.path().extension() != ".csv" || name == "trace.csv" || name == "timing.csv") continue;
    std::ifstream fa(e.path(), std::ios::binary), fb(root / "b" / "seed_2" / name, std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    ++compared;
    if (sa.str() != sb.str() || sa.str().empty()) ++differ;
  }
  fs::remove_all(root);
  return {compared >= 7 && differ == 0,
          std::to_string(compared) + " result CSVs compared across two runs, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, c1_majorizer_validity}, {2, c2_monotone}, {3, c3_speedup},     {4, c4_operator_identities},
      {5, c5_gradients},          {6, c6_kkt},      {7, c7_ladmm},       {8, c8_sidelobes},
      {9, c9_cfar},               {10, c10_unmasking}, {11, c11_scaling}, {12, c12_determinism}};
  // ctest hides the output of passing tests; keep a copy next to the binary's working directory
  std::ofstream report("acceptance_report.txt");
  int passed = 0;
  for (const auto& [id, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    passed += o.pass;
    const std::string line = "criterion " + std::to_string(id) + ": " + (o.pass ? "PASS" : "FAIL") + " - " + o.detail;
    std::cout << line << std::endl;
    report << line << std::endl;
  }
  std::cout << passed << "/" << criteria.size() << " criteria passed" << std::endl;
  report << passed << "/" << criteria.size() << " criteria passed" << std::endl;
  return strict && passed != static_cast<int>(criteria.size()) ? 1 : 0;
}
