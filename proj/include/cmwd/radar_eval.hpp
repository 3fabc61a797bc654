#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cmwd/scenario.hpp"

namespace cmwd {

/// One receive block. Object delays are absolute range bins (J_tau with tau = range_bin).
struct EchoBlock {
  CMatrix Z;  // N_R x L
  RadarScene scene;
  std::uint64_t noise_seed = 0;
};

struct CaponImage {
  std::vector<double> angles_deg;
  int n_range_bins = 0;
  RMatrix amplitude_db;  // angles x range bins, max exactly 0 dB

  void write_csv(std::ostream& out) const;
};

struct CfarConfig {
  int n_train = 4;  // per side
  int n_guard = 2;  // per side
  double p_fa = 1e-2;

  int total_train() const { return 2 * n_train; }
  void validate() const;
};

struct PdPoint {
  double rcs_dbsm = 0.0;
  double pd = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int detections = 0;
  int trials = 0;
};

void write_pd_csv(std::ostream& out, const std::vector<PdPoint>& curve);

/// |kappa| for an RCS in dBsm; 0 dBsm maps to unit amplitude.
double amplitude_from_rcs_dbsm(double rcs_dbsm);

/// Z = sum_q kappa_q b(theta_q) a(theta_q)^H Xt J_tau_q + W, Xt = sqrt(P_T/N_T) X,
/// W i.i.d. CN(0, sigma_r^2) drawn from `rng_seed`.
EchoBlock synthesize_echo(const WaveformBlock& waveform, const RadarScene& scene,
                          const ArrayGeometry& geometry, std::uint64_t rng_seed);

/// Spatial Capon beamformer from the sample covariance over all echoes (diagonally
/// loaded by 1e-3 tr(R)/N_R), then a temporal matched filter per range bin; the cell
/// amplitude |w^H Z s^H| / ||s||^2, s = a^H(theta) Xt J_tau, is averaged over echoes.
CaponImage capon_image(const std::vector<EchoBlock>& echoes, const WaveformBlock& waveform,
                       const ArrayGeometry& geometry, const std::vector<double>& angles_deg);

/// `n_snapshots` seeded echoes followed by capon_image.
CaponImage capon_image_seeded(const WaveformBlock& waveform, const RadarScene& scene,
                              const ArrayGeometry& geometry, const std::vector<double>& angles_deg,
                              int n_snapshots, std::uint64_t rng_seed);

/// T = n (p_fa^(-1/n) - 1), n = total training cells.
double cfar_threshold_factor(const CfarConfig& cfg);

/// Cell i is detected iff power_i > T * mean(training cells). Windows that run off
/// either end are replaced by extra cells on the other side, so n stays fixed.
std::vector<bool> cfar_detect(const std::vector<double>& cell_powers, const CfarConfig& cfg);
bool cfar_detect_cell(const std::vector<double>& cell_powers, int cell, const CfarConfig& cfg);

/// Beamform with b(theta)^H, matched-filter against a^H(theta) Xt J_tau for every
/// range bin, normalized so noise-only cells have equal mean power.
std::vector<double> range_profile(const CMatrix& Z, const WaveformBlock& waveform,
                                  const ArrayGeometry& geometry, double angle_deg);

struct PdOptions {
  int n_trials = 500;
  bool random_phases = true;  // uniform object phases drawn per trial
  int num_threads = 0;        // 0: OpenMP default
};

/// Pd of object 0 (the target) as its RCS sweeps `rcs_dbsm`; other objects keep
/// their amplitudes. Each trial is seeded from (rng_seed, rcs index, trial).
std::vector<PdPoint> detection_probability(const WaveformBlock& waveform, const RadarScene& scene,
                                           const ArrayGeometry& geometry,
                                           const std::vector<double>& rcs_dbsm,
                                           const CfarConfig& cfg, std::uint64_t rng_seed,
                                           const PdOptions& options = {});

/// Expected SINR (dB) of object 0 after w = b(theta_1) and the matched filter
/// a^H(theta_1) Xt J_tau_1; clutter is every other object.
double target_sinr_db(const WaveformBlock& waveform, const RadarScene& scene,
                      const ArrayGeometry& geometry);

/// Wilson 95% interval for k successes in n trials.
std::pair<double, double> wilson_interval(int successes, int trials);

}  // namespace cmwd
