#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>

#include "arraysel/common.hpp"
#include "arraysel/geometry.hpp"

namespace arraysel {

// Source bearing in degrees: elevation theta in [0, 180], azimuth phi in [0, 360).
class SourceDirection {
 public:
  SourceDirection(double theta_deg, double phi_deg);

  double theta_deg() const { return theta_deg_; }
  double phi_deg() const { return phi_deg_; }
  double theta_rad() const { return deg2rad(theta_deg_); }
  double phi_rad() const { return deg2rad(phi_deg_); }

  friend bool operator==(const SourceDirection&, const SourceDirection&) = default;

 private:
  double theta_deg_;
  double phi_deg_;
};

// Far-field response a_m = exp(-j 2 pi p_m . r(theta, phi)).
CVector steering_vector(std::span<const Vec3> positions, const SourceDirection& dir);
CVector steering_vector(const SensorArray& array, const SourceDirection& dir);

struct SteeringDerivatives {
  CVector d_theta;  // per radian
  CVector d_phi;    // per radian
};

SteeringDerivatives steering_derivatives(std::span<const Vec3> positions, const SourceDirection& dir);
SteeringDerivatives steering_derivatives(const SensorArray& array, const SourceDirection& dir);

// Mutual coupling coefficients c_1 = 1, c_l = gamma * 0.6 (1 - (l-2)/(L-1)) e^{j phi_l},
// L = M/2 + 1, with phases phi_l ~ U[-pi, pi] fixed by phase_seed.
struct MutualCouplingModel {
  CVector coefficients;
  double gamma = 1.0;
  std::uint64_t phase_seed = 0;
  int elements = 0;

  // Hermitian Toeplitz matrix whose first row is [c_1 .. c_L, c_{L-1} .. c_2].
  CMatrix matrix() const;
};

MutualCouplingModel make_coupling_model(int m, double gamma, std::uint64_t phase_seed);
CMatrix coupling_matrix(int m, double gamma, std::uint64_t phase_seed);

// M x T complex snapshot block.
class SnapshotMatrix {
 public:
  explicit SnapshotMatrix(CMatrix data);

  const CMatrix& data() const { return data_; }
  Eigen::Index sensors() const { return data_.rows(); }
  Eigen::Index snapshot_count() const { return data_.cols(); }

 private:
  CMatrix data_;
};

struct SimulationParams {
  int snapshots = 100;
  double signal_power = 1.0;
  double noise_power = 0.01;
  const CMatrix* coupling = nullptr;
  std::uint64_t seed = 0;
  // Replaces the random source waveform with a constant (noiseless oracle checks).
  std::optional<Complex> fixed_signal;
};

// y(t) = C a(Theta) s(t) + n(t), s ~ CN(0, signal_power), n ~ CN(0, noise_power I).
SnapshotMatrix simulate_snapshots(const SensorArray& array, const SourceDirection& dir, const SimulationParams& params);

// Hermitian positive semidefinite covariance estimate.
class CovarianceMatrix {
 public:
  // Checks squareness and Hermitian symmetry (relative 1e-9), then mirrors the
  // upper triangle so the stored matrix is exactly Hermitian.
  explicit CovarianceMatrix(CMatrix data);

  const CMatrix& matrix() const { return data_; }
  Eigen::Index size() const { return data_.rows(); }

  // Rows/columns restricted to the listed sensors.
  CovarianceMatrix principal(std::span<const int> indices) const;
  CovarianceMatrix scaled(double factor) const;

 private:
  CMatrix data_;
};

CovarianceMatrix sample_covariance(const SnapshotMatrix& snapshots);

// sigma_s^2 (C a)(C a)^H + sigma_n^2 I.
CovarianceMatrix asymptotic_covariance(const CVector& response, double signal_power, double noise_power);

// SNR = 10 log10(signal_power / noise_power).
inline double noise_power_from_snr_db(double snr_db, double signal_power = 1.0) {
  return signal_power * std::pow(10.0, -snr_db / 10.0);
}

}  // namespace arraysel
