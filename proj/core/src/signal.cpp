#include "arraysel/signal.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace arraysel {

namespace {

struct DirectionVectors {
  double r[3];
  double dr_theta[3];
  double dr_phi[3];
};

DirectionVectors direction_vectors(const SourceDirection& dir) {
  const double th = dir.theta_rad();
  const double ph = dir.phi_rad();
  const double st = std::sin(th), ct = std::cos(th), sp = std::sin(ph), cp = std::cos(ph);
  return {{cp * st, sp * st, ct}, {cp * ct, sp * ct, -st}, {-sp * st, cp * st, 0.0}};
}

double dot(const Vec3& p, const double (&v)[3]) { return p.x * v[0] + p.y * v[1] + p.z * v[2]; }

}  // namespace

SourceDirection::SourceDirection(double theta_deg, double phi_deg) {
  if (!std::isfinite(theta_deg) || !std::isfinite(phi_deg)) throw std::invalid_argument("direction angles must be finite");
  if (theta_deg < 0.0 || theta_deg > 180.0) throw std::invalid_argument("elevation must lie in [0, 180] degrees");
  phi_deg = std::fmod(phi_deg, 360.0);
  if (phi_deg < 0.0) phi_deg += 360.0;
  if (phi_deg >= 360.0) phi_deg = 0.0;
  theta_deg_ = theta_deg;
  phi_deg_ = phi_deg;
}

CVector steering_vector(std::span<const Vec3> positions, const SourceDirection& dir) {
  const auto v = direction_vectors(dir);
  CVector a(static_cast<Eigen::Index>(positions.size()));
  for (std::size_t m = 0; m < positions.size(); ++m) {
    const double phase = -2.0 * kPi * dot(positions[m], v.r);
    a(static_cast<Eigen::Index>(m)) = Complex(std::cos(phase), std::sin(phase));
  }
  return a;
}

CVector steering_vector(const SensorArray& array, const SourceDirection& dir) {
  return steering_vector(array.positions(), dir);
}

SteeringDerivatives steering_derivatives(std::span<const Vec3> positions, const SourceDirection& dir) {
  const auto v = direction_vectors(dir);
  const auto n = static_cast<Eigen::Index>(positions.size());
  SteeringDerivatives d{CVector(n), CVector(n)};
  const Complex minus_j2pi(0.0, -2.0 * kPi);
  for (Eigen::Index m = 0; m < n; ++m) {
    const Vec3& p = positions[static_cast<std::size_t>(m)];
    const double phase = -2.0 * kPi * dot(p, v.r);
    const Complex a(std::cos(phase), std::sin(phase));
    d.d_theta(m) = minus_j2pi * dot(p, v.dr_theta) * a;
    d.d_phi(m) = minus_j2pi * dot(p, v.dr_phi) * a;
  }
  return d;
}

SteeringDerivatives steering_derivatives(const SensorArray& array, const SourceDirection& dir) {
  return steering_derivatives(array.positions(), dir);
}

MutualCouplingModel make_coupling_model(int m, double gamma, std::uint64_t phase_seed) {
  if (m < 2 || m % 2 != 0) throw UnsupportedConfiguration("mutual coupling model requires an even element count");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("coupling gamma must lie in [0, 1]");
  const int L = m / 2 + 1;
  MutualCouplingModel model;
  model.gamma = gamma;
  model.phase_seed = phase_seed;
  model.elements = m;
  model.coefficients.resize(L);
  model.coefficients(0) = Complex(1.0, 0.0);
  // Phases depend only on the seed so a gamma sweep reuses one coupling realization.
  std::mt19937_64 rng(phase_seed);
  std::uniform_real_distribution<double> phase(-kPi, kPi);
  for (int l = 2; l <= L; ++l) {
    const double mag = 0.6 * (1.0 - static_cast<double>(l - 2) / (L - 1));
    model.coefficients(l - 1) = gamma * std::polar(mag, phase(rng));
  }
  return model;
}

CMatrix MutualCouplingModel::matrix() const {
  const int m = elements;
  const auto L = coefficients.size();
  CVector row(m);
  for (Eigen::Index i = 0; i < L; ++i) row(i) = coefficients(i);
  for (Eigen::Index i = L; i < m; ++i) row(i) = coefficients(m - i);
  CMatrix c(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) c(i, j) = j >= i ? row(j - i) : std::conj(row(i - j));
  return c;
}

CMatrix coupling_matrix(int m, double gamma, std::uint64_t phase_seed) {
  return make_coupling_model(m, gamma, phase_seed).matrix();
}

SnapshotMatrix::SnapshotMatrix(CMatrix data) : data_(std::move(data)) {
  if (data_.cols() < 1) throw std::invalid_argument("snapshot matrix needs at least one snapshot");
  if (!data_.allFinite()) throw std::invalid_argument("snapshot matrix has non-finite entries");
}

SnapshotMatrix simulate_snapshots(const SensorArray& array, const SourceDirection& dir, const SimulationParams& params) {
  if (params.snapshots < 1) throw std::invalid_argument("snapshot count must be >= 1");
  if (!(params.signal_power >= 0.0) || !(params.noise_power >= 0.0))
    throw std::invalid_argument("signal and noise powers must be >= 0");
  const auto m = static_cast<Eigen::Index>(array.size());
  CVector response = steering_vector(array, dir);
  if (params.coupling != nullptr) {
    if (params.coupling->rows() != m || params.coupling->cols() != m)
      throw std::invalid_argument("coupling matrix dimension does not match the array");
    response = (*params.coupling) * response;
  }
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double s_scale = std::sqrt(params.signal_power / 2.0);
  const double n_scale = std::sqrt(params.noise_power / 2.0);
  CMatrix y(m, params.snapshots);
  for (int t = 0; t < params.snapshots; ++t) {
    Complex s;
    if (params.fixed_signal) {
      s = *params.fixed_signal;
    } else {
      const double re = n01(rng);
      const double im = n01(rng);
      s = Complex(s_scale * re, s_scale * im);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      const double re = n01(rng);
      const double im = n01(rng);
      y(i, t) = response(i) * s + Complex(n_scale * re, n_scale * im);
    }
  }
  return SnapshotMatrix(std::move(y));
}

CovarianceMatrix::CovarianceMatrix(CMatrix data) : data_(std::move(data)) {
  if (data_.rows() != data_.cols() || data_.rows() < 1) throw std::invalid_argument("covariance must be square");
  const double scale = std::max(1.0, data_.cwiseAbs().maxCoeff());
  const double asym = (data_ - data_.adjoint()).cwiseAbs().maxCoeff();
  if (!(asym <= 1e-9 * scale)) throw std::invalid_argument("covariance matrix is not Hermitian");
  const auto n = data_.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    data_(i, i) = Complex(data_(i, i).real(), 0.0);
    for (Eigen::Index j = i + 1; j < n; ++j) data_(j, i) = std::conj(data_(i, j));
  }
}

CovarianceMatrix CovarianceMatrix::principal(std::span<const int> indices) const {
  const auto k = static_cast<Eigen::Index>(indices.size());
  CMatrix sub(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) sub(i, j) = data_(indices[static_cast<std::size_t>(i)], indices[static_cast<std::size_t>(j)]);
  return CovarianceMatrix(std::move(sub));
}

CovarianceMatrix CovarianceMatrix::scaled(double factor) const { return CovarianceMatrix(data_ * factor); }

CovarianceMatrix sample_covariance(const SnapshotMatrix& snapshots) {
  const CMatrix& y = snapshots.data();
  CMatrix r = (y * y.adjoint()) / static_cast<double>(y.cols());
  return CovarianceMatrix(std::move(r));
}

CovarianceMatrix asymptotic_covariance(const CVector& response, double signal_power, double noise_power) {
  CMatrix r = signal_power * response * response.adjoint();
  r.diagonal().array() += noise_power;
  return CovarianceMatrix(std::move(r));
}

}  // namespace arraysel
