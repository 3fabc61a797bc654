#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmwd/ci_precoding.hpp"
#include "cmwd/costs.hpp"
#include "cmwd/ladmm_solver.hpp"
#include "cmwd/mm_solver.hpp"
#include "cmwd/radar_eval.hpp"

namespace cmwd {

inline constexpr int kConfigSchemaVersion = 1;

/// Thrown with every schema diagnostic collected from one config file.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

enum class SolverKind { mm, ladmm, radar_only };
SolverKind solver_from_string(const std::string& name);
std::string to_string(SolverKind kind);

struct EvaluationConfig {
  bool enabled = true;
  int capon_snapshots = 64;
  double capon_angle_step_deg = 0.5;
  int pd_trials = 500;
  std::vector<double> pd_rcs_dbsm;  // default -20..10 dBsm, 1 dB step
  CfarConfig cfar;
};

struct ScalingConfig {
  std::vector<int> block_lens{4, 8, 16, 32, 64, 128};
  std::vector<SolverKind> solvers{SolverKind::mm, SolverKind::ladmm};
  double timeout_sec = 600.0;
  std::uint64_t seed = 1;
};

struct ExperimentConfig {
  ArrayGeometry array;
  int block_len = 32;
  double total_power = 1.0;
  std::vector<double> target_angles_deg{-30.0, 40.0};
  double beam_width_deg = 20.0;
  double grid_step_deg = 0.5;
  int max_lag = 8;

  int n_users = 2;
  double snr_db = 6.0;
  double comms_noise_var = 0.01;
  int psk_order = 4;
  std::optional<std::uint64_t> comms_seed;  // fixes channels and symbols across run seeds

  Weights weights{1.0, 4.0, 4.0, 0.0};
  SolverKind solver = SolverKind::mm;
  MmOptions mm;
  LadmmParams ladmm;
  bool radar_only_warm_start = true;  // start radar-only MM from the DFRC MM solution

  RadarScene scene;
  EvaluationConfig evaluation;
  ScalingConfig scaling;

  std::filesystem::path output_dir = "out";
  std::vector<std::uint64_t> seeds{1};
  int threads = 0;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Inputs for one seeded design problem.
struct DesignProblem {
  CostModel model;
  CiConstraintSet constraints;  // empty for radar-only
  CommsConfig comms;
  BeamPatternSpec beam;
};

DesignProblem build_problem(const ExperimentConfig& cfg, std::uint64_t seed, bool with_comms);

struct DesignOutcome {
  WaveformBlock initial;
  WaveformBlock waveform;
  std::string status;
  int iterations = 0;
  bool converged = false;
  double wall_sec = 0.0;
  CostBreakdown cost;
  MarginReport margins;
  std::vector<MmTraceRow> mm_trace;
  std::vector<LadmmTraceRow> ladmm_trace;
};

DesignOutcome design_waveform(const ExperimentConfig& cfg, std::uint64_t seed);

/// Writes every evaluation artifact for `waveform` into `dir`; returns file names.
std::vector<std::string> write_evaluation(const ExperimentConfig& cfg, const WaveformBlock& waveform,
                                          std::uint64_t seed, const std::filesystem::path& dir);

/// One directory per seed under output_dir; returns 0, or 2 if any seed did not converge.
int run_experiment(const ExperimentConfig& cfg);

/// Evaluates a stored waveform against the scene of `cfg`.
int run_evaluation(const std::filesystem::path& waveform_bin, const ExperimentConfig& cfg,
                   const std::filesystem::path& out_dir);

struct ScalingRow {
  int ln_t = 0;
  SolverKind solver = SolverKind::mm;
  double wall_sec = 0.0;
  int iterations = 0;
  bool censored = false;
  std::string status;
};

std::vector<ScalingRow> run_scaling_study(const ExperimentConfig& cfg);
void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows);

/// complex64 interleaved, column-major N_T x L.
void write_waveform_bin(const std::filesystem::path& path, const WaveformBlock& waveform);
WaveformBlock read_waveform_bin(const std::filesystem::path& path, int n_tx, int block_len,
                                double total_power);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace cmwd
