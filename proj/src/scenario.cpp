#include "cmwd/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace cmwd {

void ArrayGeometry::validate() const {
  if (n_tx < 1) throw std::invalid_argument("ArrayGeometry: n_tx must be >= 1");
  if (n_rx < 1) throw std::invalid_argument("ArrayGeometry: n_rx must be >= 1");
  if (!(spacing_wavelengths > 0.0))
    throw std::invalid_argument("ArrayGeometry: spacing_wavelengths must be > 0");
}

CVector WaveformBlock::vec() const { return cmwd::vec(X); }

WaveformBlock WaveformBlock::from_vec(const CVector& x, int n_tx, double total_power) {
  return WaveformBlock{mat(x, n_tx), total_power};
}

CMatrix WaveformBlock::transmit_matrix() const {
  return std::sqrt(total_power / static_cast<double>(n_tx())) * X;
}

double WaveformBlock::modulus_error() const {
  double err = 0.0;
  for (Eigen::Index i = 0; i < X.size(); ++i) err = std::max(err, std::abs(std::abs(X(i)) - 1.0));
  return err;
}

std::vector<double> RadarScene::angles_deg() const {
  std::vector<double> out;
  out.reserve(objects.size());
  for (const auto& o : objects) out.push_back(o.angle_deg);
  return out;
}

void RadarScene::validate(int block_len) const {
  if (max_lag < 1 || max_lag > block_len)
    throw std::invalid_argument("RadarScene: max_lag must lie in [1, L]");
  if (noise_var < 0.0) throw std::invalid_argument("RadarScene: noise_var must be >= 0");
  for (const auto& o : objects) {
    if (o.range_bin < 0 || o.range_bin > block_len - 1)
      throw std::invalid_argument("RadarScene: range_bin outside [0, L-1]");
    if (o.angle_deg < -90.0 || o.angle_deg > 90.0)
      throw std::domain_error("RadarScene: angle outside [-90, 90] deg");
  }
}

double BeamPatternSpec::desired_energy() const {
  double s = 0.0;
  for (double g : desired_gain) s += g * g;
  return s;
}

void BeamPatternSpec::validate() const {
  if (angle_grid_deg.empty()) throw std::invalid_argument("BeamPatternSpec: empty grid");
  if (angle_grid_deg.size() != desired_gain.size())
    throw std::invalid_argument("BeamPatternSpec: grid/gain size mismatch");
  for (std::size_t i = 1; i < angle_grid_deg.size(); ++i)
    if (!(angle_grid_deg[i] > angle_grid_deg[i - 1]))
      throw std::invalid_argument("BeamPatternSpec: grid must be strictly increasing");
  for (double g : desired_gain)
    if (g < 0.0) throw std::invalid_argument("BeamPatternSpec: negative desired gain");
  if (!(desired_energy() > 0.0))
    throw std::domain_error("BeamPatternSpec: desired pattern is identically zero");
}

void CommsConfig::validate(int n_tx, int block_len) const {
  if (n_users < 0) throw std::invalid_argument("CommsConfig: n_users must be >= 0");
  if (static_cast<int>(channels.size()) != n_users)
    throw std::invalid_argument("CommsConfig: expected one channel per user");
  for (const auto& h : channels)
    if (h.size() != n_tx) throw std::invalid_argument("CommsConfig: channel length != N_T");
  if (n_users == 0) return;
  if (symbols.rows() != block_len || symbols.cols() != n_users)
    throw std::invalid_argument("CommsConfig: symbols must be L x K");
  for (Eigen::Index i = 0; i < symbols.size(); ++i)
    if (std::abs(std::abs(symbols(i)) - 1.0) > 1e-9)
      throw std::invalid_argument("CommsConfig: symbols must be unit modulus");
  if (static_cast<int>(snr_thresholds.size()) != n_users)
    throw std::invalid_argument("CommsConfig: expected one SNR threshold per user");
  for (double g : snr_thresholds)
    if (!(g > 0.0)) throw std::invalid_argument("CommsConfig: SNR thresholds must be > 0");
  if (!(ci_half_angle > 0.0 && ci_half_angle < kPi / 2))
    throw std::invalid_argument("CommsConfig: ci_half_angle must lie in (0, pi/2)");
  if (!(noise_var >= 0.0)) throw std::invalid_argument("CommsConfig: noise_var must be >= 0");
}

void Weights::validate() const {
  if (bp < 0.0 || ac < 0.0 || cc < 0.0 || sim < 0.0)
    throw std::invalid_argument("Weights: all weights must be >= 0");
}

CVector steering_vector(int n_elements, double spacing_wavelengths, double angle_deg) {
  if (angle_deg < -90.0 || angle_deg > 90.0)
    throw std::domain_error("steering_vector: angle " + std::to_string(angle_deg) +
                            " outside [-90, 90] deg");
  const double phase_step = 2.0 * kPi * spacing_wavelengths * std::sin(angle_deg * kPi / 180.0);
  CVector a(n_elements);
  for (int n = 0; n < n_elements; ++n) a(n) = std::polar(1.0, phase_step * n);
  return a;
}

CVector steering_vector(const ArrayGeometry& geometry, double angle_deg, ArraySide side) {
  geometry.validate();
  const int n = side == ArraySide::transmit ? geometry.n_tx : geometry.n_rx;
  return steering_vector(n, geometry.spacing_wavelengths, angle_deg);
}

CMatrix steering_matrix(int n_elements, double spacing_wavelengths,
                        std::span<const double> angles_deg) {
  CMatrix A(n_elements, static_cast<Eigen::Index>(angles_deg.size()));
  for (std::size_t u = 0; u < angles_deg.size(); ++u)
    A.col(static_cast<Eigen::Index>(u)) =
        steering_vector(n_elements, spacing_wavelengths, angles_deg[u]);
  return A;
}

double broadside_from_endfire_deg(double phi_deg) { return phi_deg - 90.0; }

CMatrix shift_columns(const CMatrix& X, int lag) {
  const Eigen::Index L = X.cols();
  CMatrix out = CMatrix::Zero(X.rows(), L);
  if (lag >= L || -lag >= L) return out;
  if (lag >= 0)
    out.rightCols(L - lag) = X.leftCols(L - lag);
  else
    out.leftCols(L + lag) = X.rightCols(L + lag);
  return out;
}

std::vector<CVector> generate_rayleigh_channels(std::uint64_t seed, int n_users, int n_tx) {
  if (n_users < 0 || n_tx < 1)
    throw std::invalid_argument("generate_rayleigh_channels: bad dimensions");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  std::vector<CVector> out;
  out.reserve(static_cast<std::size_t>(n_users));
  for (int k = 0; k < n_users; ++k) {
    CVector h(n_tx);
    for (int n = 0; n < n_tx; ++n) {
      const double re = normal(rng);
      const double im = normal(rng);
      h(n) = cdouble(re, im);
    }
    out.push_back(std::move(h));
  }
  return out;
}

CMatrix draw_psk_symbols(std::uint64_t seed, int block_len, int n_users, int psk_order) {
  if (psk_order < 2) throw std::invalid_argument("draw_psk_symbols: M must be >= 2");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, psk_order - 1);
  CMatrix S(block_len, n_users);
  for (int k = 0; k < n_users; ++k)
    for (int l = 0; l < block_len; ++l) {
      const int m = pick(rng);
      S(l, k) = std::polar(1.0, 2.0 * kPi * m / psk_order + kPi / psk_order);
    }
  return S;
}

std::vector<double> uniform_angle_grid(double min_deg, double max_deg, double step_deg) {
  if (!(step_deg > 0.0) || max_deg < min_deg)
    throw std::invalid_argument("uniform_angle_grid: bad range");
  const auto count = static_cast<int>(std::floor((max_deg - min_deg) / step_deg + 1e-9)) + 1;
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = min_deg + i * step_deg;
  return grid;
}

BeamPatternSpec desired_rect_beam_pattern(std::span<const double> target_angles_deg,
                                          double beam_width_deg,
                                          std::span<const double> grid_deg) {
  if (grid_deg.empty()) throw std::invalid_argument("desired_rect_beam_pattern: empty grid");
  const double half = beam_width_deg / 2.0;
  BeamPatternSpec spec;
  spec.angle_grid_deg.assign(grid_deg.begin(), grid_deg.end());
  spec.desired_gain.assign(grid_deg.size(), 0.0);
  // Small slack so that grid points exactly on a beam edge count as inside.
  constexpr double edge_tol = 1e-9;
  for (std::size_t u = 0; u < grid_deg.size(); ++u)
    for (double t : target_angles_deg)
      if (grid_deg[u] >= t - half - edge_tol && grid_deg[u] <= t + half + edge_tol)
        spec.desired_gain[u] = 1.0;
  return spec;
}

CVector vec(const CMatrix& X) {
  return Eigen::Map<const CVector>(X.data(), X.size());
}

CMatrix mat(const CVector& x, int rows) {
  if (rows <= 0 || x.size() % rows != 0)
    throw std::invalid_argument("mat: vector length not divisible by row count");
  return Eigen::Map<const CMatrix>(x.data(), rows, x.size() / rows);
}

CVector phase_project(const CVector& z) {
  CVector out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    out(i) = z(i) == cdouble(0.0, 0.0) ? cdouble(1.0, 0.0) : std::polar(1.0, std::arg(z(i)));
  return out;
}

CMatrix phase_project(const CMatrix& Z) {
  return mat(phase_project(vec(Z)), static_cast<int>(Z.rows()));
}

double db10(double power_ratio) { return 10.0 * std::log10(power_ratio); }

}  // namespace cmwd
