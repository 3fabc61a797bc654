#include "cmwd/radar_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include <omp.h>

namespace cmwd {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

// Beam-domain sequence a^H(theta) Xt as a length-L column.
CVector beam_sequence(const CMatrix& Xt, double spacing, double angle_deg) {
  const CVector a = steering_vector(static_cast<int>(Xt.rows()), spacing, angle_deg);
  return (a.adjoint() * Xt).transpose();
}

// sum_j y_j conj(s_tau[j]) with s_tau[j] = seq[j - tau].
cdouble matched(const CVector& y, const CVector& seq, int tau) {
  const int L = static_cast<int>(seq.size());
  cdouble acc = 0.0;
  for (int i = 0; i + tau < L; ++i) acc += y[i + tau] * std::conj(seq[i]);
  return acc;
}

double shifted_energy(const CVector& seq, int tau) {
  return seq.head(seq.size() - tau).squaredNorm();
}

void add_noise(CMatrix& Z, double var, std::mt19937_64& rng) {
  if (var <= 0.0) return;
  std::normal_distribution<double> g(0.0, std::sqrt(0.5 * var));
  for (Eigen::Index c = 0; c < Z.cols(); ++c)
    for (Eigen::Index r = 0; r < Z.rows(); ++r) {
      const double re = g(rng);
      const double im = g(rng);
      Z(r, c) += cdouble(re, im);
    }
}

CMatrix noiseless_echo(const CMatrix& Xt, const RadarScene& scene, const ArrayGeometry& geometry) {
  CMatrix Z = CMatrix::Zero(geometry.n_rx, Xt.cols());
  for (const auto& obj : scene.objects) {
    const CVector b = steering_vector(geometry, obj.angle_deg, ArraySide::receive);
    const CVector a = steering_vector(geometry, obj.angle_deg, ArraySide::transmit);
    const CMatrix row = a.adjoint() * shift_columns(Xt, obj.range_bin);
    Z.noalias() += obj.amplitude * (b * row);
  }
  return Z;
}

}  // namespace

void CfarConfig::validate() const {
  if (n_train < 1) throw std::invalid_argument("CFAR needs at least one training cell per side");
  if (n_guard < 0) throw std::invalid_argument("CFAR guard cells must be nonnegative");
  if (!(p_fa > 0.0 && p_fa < 1.0)) throw std::invalid_argument("CFAR p_fa must lie in (0, 1)");
}

double amplitude_from_rcs_dbsm(double rcs_dbsm) { return std::sqrt(std::pow(10.0, rcs_dbsm / 10.0)); }

EchoBlock synthesize_echo(const WaveformBlock& waveform, const RadarScene& scene,
                          const ArrayGeometry& geometry, std::uint64_t rng_seed) {
  geometry.validate();
  scene.validate(waveform.block_len());
  if (waveform.n_tx() != geometry.n_tx) throw std::invalid_argument("waveform rows must equal N_T");
  EchoBlock echo;
  echo.Z = noiseless_echo(waveform.transmit_matrix(), scene, geometry);
  std::mt19937_64 rng(rng_seed);
  add_noise(echo.Z, scene.noise_var, rng);
  echo.scene = scene;
  echo.noise_seed = rng_seed;
  return echo;
}

CaponImage capon_image(const std::vector<EchoBlock>& echoes, const WaveformBlock& waveform,
                       const ArrayGeometry& geometry, const std::vector<double>& angles_deg) {
  if (echoes.empty()) throw std::invalid_argument("Capon imaging needs at least one echo");
  const int NR = geometry.n_rx;
  const int L = waveform.block_len();
  const CMatrix Xt = waveform.transmit_matrix();

  CMatrix R = CMatrix::Zero(NR, NR);
  for (const auto& e : echoes) R.noalias() += e.Z * e.Z.adjoint();
  R /= static_cast<double>(echoes.size() * static_cast<std::size_t>(L));
  const double load = 1e-3 * R.trace().real() / NR;
  R += load * CMatrix::Identity(NR, NR);
  if (!(load > 0.0)) R += CMatrix::Identity(NR, NR);  // all-zero echoes
  const Eigen::LDLT<CMatrix> Rinv(R);

  const int U = static_cast<int>(angles_deg.size());
  RMatrix amp = RMatrix::Zero(U, L);
#pragma omp parallel for schedule(static)
  for (int u = 0; u < U; ++u) {
    const CVector b = steering_vector(geometry, angles_deg[u], ArraySide::receive);
    const CVector Rb = Rinv.solve(b);
    const CVector w = Rb / std::real(b.dot(Rb));
    const CVector seq = beam_sequence(Xt, geometry.spacing_wavelengths, angles_deg[u]);
    for (const auto& e : echoes) {
      const CVector y = (w.adjoint() * e.Z).transpose();
      for (int tau = 0; tau < L; ++tau) {
        const double energy = shifted_energy(seq, tau);
        if (energy > 0.0) amp(u, tau) += std::abs(matched(y, seq, tau)) / std::sqrt(energy);
      }
    }
  }
  amp /= static_cast<double>(echoes.size());

  CaponImage img;
  img.angles_deg = angles_deg;
  img.n_range_bins = L;
  const double peak = amp.maxCoeff();
  const double floor = std::numeric_limits<double>::min();
  img.amplitude_db = amp.unaryExpr([&](double v) {
    return peak > 0.0 ? 20.0 * std::log10(std::max(v, floor * peak) / peak) : 0.0;
  });
  return img;
}

CaponImage capon_image_seeded(const WaveformBlock& waveform, const RadarScene& scene,
                              const ArrayGeometry& geometry, const std::vector<double>& angles_deg,
                              int n_snapshots, std::uint64_t rng_seed) {
  if (n_snapshots < 1) throw std::invalid_argument("Capon imaging needs at least one snapshot");
  std::vector<EchoBlock> echoes;
  echoes.reserve(n_snapshots);
  for (int s = 0; s < n_snapshots; ++s)
    echoes.push_back(synthesize_echo(waveform, scene, geometry, trial_seed(rng_seed, 0, s)));
  return capon_image(echoes, waveform, geometry, angles_deg);
}

void CaponImage::write_csv(std::ostream& out) const {
  out << "angle_deg,range_bin,amplitude_db\n";
  char buf[96];
  for (std::size_t u = 0; u < angles_deg.size(); ++u)
    for (int t = 0; t < n_range_bins; ++t) {
      std::snprintf(buf, sizeof buf, "%.2f,%d,%.6f\n", angles_deg[u], t, amplitude_db(u, t));
      out << buf;
    }
}

double cfar_threshold_factor(const CfarConfig& cfg) {
  cfg.validate();
  const double n = cfg.total_train();
  return n * (std::pow(cfg.p_fa, -1.0 / n) - 1.0);
}

bool cfar_detect_cell(const std::vector<double>& p, int cell, const CfarConfig& cfg) {
  const int len = static_cast<int>(p.size());
  const int span = cfg.n_train + cfg.n_guard;
  if (len <= 2 * span + 1) throw std::invalid_argument("range profile too short for the CFAR window");
  int lo = cell - span;      // first left training cell
  int hi = cell + span;      // last right training cell
  // Slide the window inward when a side runs off the profile.
  int left = cfg.n_train;
  int right = cfg.n_train;
  if (lo < 0) {
    left = std::max(0, cfg.n_train + lo);
    right = cfg.total_train() - left;
  } else if (hi >= len) {
    right = std::max(0, cfg.n_train - (hi - len + 1));
    left = cfg.total_train() - right;
  }
  double sum = 0.0;
  for (int k = 0; k < left; ++k) sum += p[cell - cfg.n_guard - 1 - k];
  for (int k = 0; k < right; ++k) sum += p[cell + cfg.n_guard + 1 + k];
  const double mean = sum / cfg.total_train();
  return p[cell] > cfar_threshold_factor(cfg) * mean;
}

std::vector<bool> cfar_detect(const std::vector<double>& p, const CfarConfig& cfg) {
  std::vector<bool> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = cfar_detect_cell(p, static_cast<int>(i), cfg);
  return out;
}

std::vector<double> range_profile(const CMatrix& Z, const WaveformBlock& waveform,
                                  const ArrayGeometry& geometry, double angle_deg) {
  const int L = waveform.block_len();
  const CVector b = steering_vector(geometry, angle_deg, ArraySide::receive);
  const CVector y = (b.adjoint() * Z).transpose();
  const CVector seq = beam_sequence(waveform.transmit_matrix(), geometry.spacing_wavelengths, angle_deg);
  std::vector<double> profile(L, 0.0);
  for (int tau = 0; tau < L; ++tau) {
    const double energy = shifted_energy(seq, tau);
    if (energy > 0.0) profile[tau] = std::norm(matched(y, seq, tau)) / energy;
  }
  return profile;
}

std::pair<double, double> wilson_interval(int k, int n) {
  if (n <= 0) return {0.0, 1.0};
  const double z = 1.959963984540054;
  const double p = static_cast<double>(k) / n;
  const double d = 1.0 + z * z / n;
  const double c = (p + z * z / (2.0 * n)) / d;
  const double h = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / d;
  return {std::max(0.0, c - h), std::min(1.0, c + h)};
}

std::vector<PdPoint> detection_probability(const WaveformBlock& waveform, const RadarScene& scene,
                                           const ArrayGeometry& geometry,
                                           const std::vector<double>& rcs_dbsm,
                                           const CfarConfig& cfg, std::uint64_t rng_seed,
                                           const PdOptions& options) {
  if (scene.objects.empty()) throw std::invalid_argument("detection needs a target object");
  if (options.n_trials < 1) throw std::invalid_argument("detection needs at least one trial");
  cfg.validate();
  scene.validate(waveform.block_len());
  const SceneObject target = scene.objects.front();
  const CMatrix Xt = waveform.transmit_matrix();
  const int n_obj = static_cast<int>(scene.objects.size());

  // Unit-amplitude per-object echoes; each trial only rescales and rotates them.
  std::vector<CMatrix> unit(n_obj);
  for (int q = 0; q < n_obj; ++q) {
    RadarScene one;
    one.objects = {scene.objects[q]};
    one.objects[0].amplitude = 1.0;
    unit[q] = noiseless_echo(Xt, one, geometry);
  }

  std::vector<PdPoint> curve(rcs_dbsm.size());
  const int threads = options.num_threads > 0 ? options.num_threads : omp_get_max_threads();
  for (std::size_t r = 0; r < rcs_dbsm.size(); ++r) {
    std::vector<cdouble> amps(n_obj);
    for (int q = 0; q < n_obj; ++q) amps[q] = scene.objects[q].amplitude;
    amps[0] = amplitude_from_rcs_dbsm(rcs_dbsm[r]);
    int hits = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits) num_threads(threads)
    for (int t = 0; t < options.n_trials; ++t) {
      std::mt19937_64 rng(trial_seed(rng_seed, r, static_cast<std::uint64_t>(t)));
      std::uniform_real_distribution<double> phase(-kPi, kPi);
      CMatrix Z = CMatrix::Zero(geometry.n_rx, Xt.cols());
      for (int q = 0; q < n_obj; ++q) {
        const cdouble rot = options.random_phases ? std::polar(1.0, phase(rng)) : cdouble(1.0);
        Z.noalias() += (amps[q] * rot) * unit[q];
      }
      add_noise(Z, scene.noise_var, rng);
      const auto profile = range_profile(Z, waveform, geometry, target.angle_deg);
      if (cfar_detect_cell(profile, target.range_bin, cfg)) ++hits;
    }
    auto [lo, hi] = wilson_interval(hits, options.n_trials);
    curve[r] = {rcs_dbsm[r], static_cast<double>(hits) / options.n_trials, lo, hi, hits, options.n_trials};
  }
  return curve;
}

void write_pd_csv(std::ostream& out, const std::vector<PdPoint>& curve) {
  out << "rcs_dbsm,pd,ci_low,ci_high\n";
  char buf[128];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%.4f,%.6f,%.6f,%.6f\n", p.rcs_dbsm, p.pd, p.ci_low, p.ci_high);
    out << buf;
  }
}

double target_sinr_db(const WaveformBlock& waveform, const RadarScene& scene,
                      const ArrayGeometry& geometry) {
  if (scene.objects.empty()) throw std::invalid_argument("SINR needs a target object");
  scene.validate(waveform.block_len());
  const CMatrix Xt = waveform.transmit_matrix();
  const SceneObject& tgt = scene.objects.front();
  const CVector b1 = steering_vector(geometry, tgt.angle_deg, ArraySide::receive);
  const CVector seq1 = beam_sequence(Xt, geometry.spacing_wavelengths, tgt.angle_deg);
  const double e1 = shifted_energy(seq1, tgt.range_bin);
  const double signal = std::norm(tgt.amplitude) * std::pow(geometry.n_rx * e1, 2);

  double clutter = 0.0;
  for (std::size_t q = 1; q < scene.objects.size(); ++q) {
    const SceneObject& o = scene.objects[q];
    const CVector bq = steering_vector(geometry, o.angle_deg, ArraySide::receive);
    const CVector seq = beam_sequence(Xt, geometry.spacing_wavelengths, o.angle_deg);
    // <a_q^H Xt J_tau_q, a_1^H Xt J_tau_1>
    const int L = static_cast<int>(seq.size());
    cdouble cross = 0.0;
    for (int j = 0; j < L; ++j) {
      const int iq = j - o.range_bin;
      const int i1 = j - tgt.range_bin;
      if (iq >= 0 && i1 >= 0) cross += seq[iq] * std::conj(seq1[i1]);
    }
    clutter += std::norm(o.amplitude * b1.dot(bq) * cross);
  }
  const double noise = scene.noise_var * geometry.n_rx * e1;
  const double denom = clutter + noise;
  if (signal <= 0.0) return -std::numeric_limits<double>::infinity();
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return db10(signal / denom);
}

}  // namespace cmwd
