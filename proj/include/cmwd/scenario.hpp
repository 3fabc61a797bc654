#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cmwd {

using cdouble = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

/// Transmit/receive uniform linear arrays sharing one element spacing.
struct ArrayGeometry {
  int n_tx = 8;
  int n_rx = 8;
  double spacing_wavelengths = 0.5;

  void validate() const;
};

enum class ArraySide { transmit, receive };

/// Space-time transmit block.
///
/// `X` holds the normalized waveform (unit-modulus entries for a
/// constant-modulus design); the radiated matrix is `sqrt(P_T / N_T) * X`.
/// vec(X) is column-major, i.e. subpulse columns x_1, ..., x_L stacked.
struct WaveformBlock {
  CMatrix X;
  double total_power = 1.0;

  int n_tx() const { return static_cast<int>(X.rows()); }
  int block_len() const { return static_cast<int>(X.cols()); }

  CVector vec() const;
  static WaveformBlock from_vec(const CVector& x, int n_tx, double total_power = 1.0);

  /// Radiated matrix sqrt(P_T / N_T) * X.
  CMatrix transmit_matrix() const;

  /// Largest deviation of |X_nl| from one.
  double modulus_error() const;
};

/// Point scatterer: direction, round-trip delay bin and complex reflectivity.
struct SceneObject {
  double angle_deg = 0.0;
  int range_bin = 0;
  cdouble amplitude{1.0, 0.0};
};

struct RadarScene {
  std::vector<SceneObject> objects;
  int max_lag = 8;          // P: lags |tau| < P are suppressed
  double noise_var = 1.0;   // sigma_r^2

  std::vector<double> angles_deg() const;
  void validate(int block_len) const;
};

struct BeamPatternSpec {
  std::vector<double> angle_grid_deg;
  std::vector<double> desired_gain;

  int size() const { return static_cast<int>(angle_grid_deg.size()); }
  double desired_energy() const;  // sum_u G_d,u^2
  void validate() const;
};

struct CommsConfig {
  int n_users = 0;
  std::vector<CVector> channels;  // h_k, length N_T each
  CMatrix symbols;                // L x K unit-modulus PSK symbols
  double noise_var = 0.01;        // sigma^2
  std::vector<double> snr_thresholds;  // gamma_k, linear
  int psk_order = 4;
  double ci_half_angle = kPi / 4;  // Lambda

  void validate(int n_tx, int block_len) const;
};

struct Weights {
  double bp = 1.0;
  double ac = 0.0;
  double cc = 0.0;
  double sim = 0.0;

  void validate() const;
};

/// a(theta)_n = exp(j 2 pi d n sin(theta)), n = 0..N-1, theta in [-90, 90] deg.
CVector steering_vector(const ArrayGeometry& geometry, double angle_deg, ArraySide side);
CVector steering_vector(int n_elements, double spacing_wavelengths, double angle_deg);

/// N x (#angles) matrix whose columns are transmit steering vectors.
CMatrix steering_matrix(int n_elements, double spacing_wavelengths,
                        std::span<const double> angles_deg);

/// Maps an angle on the [0, 180] deg grid convention onto broadside [-90, 90].
double broadside_from_endfire_deg(double phi_deg);

/// X * J_tau without forming J_tau: column j of the result is column j - tau
/// of X, or zero when that index falls outside the block. |tau| >= L yields 0.
CMatrix shift_columns(const CMatrix& X, int lag);

/// K channels with i.i.d. CN(0, 1) entries.
std::vector<CVector> generate_rayleigh_channels(std::uint64_t seed, int n_users, int n_tx);

/// L x K symbols drawn uniformly from {exp(j(2 pi m / M + pi / M))}.
CMatrix draw_psk_symbols(std::uint64_t seed, int block_len, int n_users, int psk_order);

/// Uniform grid [min, max] with the given step (endpoints included).
std::vector<double> uniform_angle_grid(double min_deg, double max_deg, double step_deg);

/// Rectangular pattern: 1 within beam_width/2 of any target angle, else 0.
BeamPatternSpec desired_rect_beam_pattern(std::span<const double> target_angles_deg,
                                          double beam_width_deg,
                                          std::span<const double> grid_deg);

/// Column-major reshape helpers.
CVector vec(const CMatrix& X);
CMatrix mat(const CVector& x, int rows);

/// Entrywise exp(j angle(z)); zero maps to one.
CVector phase_project(const CVector& z);
CMatrix phase_project(const CMatrix& Z);

double db10(double power_ratio);

}  // namespace cmwd
