#include "arraysel/doa.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace arraysel {

namespace {

void check_increasing(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string(what) + " grid is empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw std::invalid_argument(std::string(what) + " grid has a non-finite value");
    if (i > 0 && !(v[i] > v[i - 1])) throw std::invalid_argument(std::string(what) + " grid must be strictly increasing");
  }
}

std::vector<double> steps(double lo, double hi_exclusive, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
  std::vector<double> out;
  const auto n = static_cast<long long>(std::ceil((hi_exclusive - lo) / step - 1e-9));
  for (long long i = 0; i < n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

CMatrix noise_subspace(const CovarianceMatrix& r, int num_sources) {
  const Eigen::Index k = r.size();
  if (num_sources < 1) throw std::invalid_argument("num_sources must be >= 1");
  if (k <= num_sources) throw std::invalid_argument("MUSIC needs more sensors than sources");
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(r.matrix());
  if (eig.info() != Eigen::Success) throw NumericalDegeneracy("eigendecomposition failed");
  // Eigenvalues ascend, so the noise subspace is the leading block of columns.
  return eig.eigenvectors().leftCols(k - num_sources);
}

double null_projection(const CMatrix& en, const CVector& a) { return (en.adjoint() * a).squaredNorm(); }

}  // namespace

AngularGrid::AngularGrid(std::vector<double> theta_deg, std::vector<double> phi_deg)
    : theta_(std::move(theta_deg)), phi_(std::move(phi_deg)) {
  check_increasing(theta_, "theta");
  check_increasing(phi_, "phi");
  if (theta_.front() < 0.0 || theta_.back() > 180.0) throw std::invalid_argument("theta grid outside [0, 180]");
  if (phi_.front() < 0.0 || phi_.back() >= 360.0) throw std::invalid_argument("phi grid outside [0, 360)");
}

AngularGrid AngularGrid::azimuth_scan(double theta_deg, double phi_step) {
  return AngularGrid({theta_deg}, steps(0.0, 360.0, phi_step));
}

AngularGrid AngularGrid::joint_scan(double theta_lo, double theta_hi, double theta_step, double phi_step) {
  if (!(theta_hi >= theta_lo)) throw std::invalid_argument("theta range is reversed");
  return AngularGrid(steps(theta_lo, theta_hi + theta_step * 0.5, theta_step), steps(0.0, 360.0, phi_step));
}

double music_spectrum(const SensorArray& sub_array, const CovarianceMatrix& r_sub, const SourceDirection& dir,
                      int num_sources) {
  if (r_sub.size() != static_cast<Eigen::Index>(sub_array.size()))
    throw std::invalid_argument("covariance does not match the sub-array");
  const CMatrix en = noise_subspace(r_sub, num_sources);
  return 1.0 / null_projection(en, steering_vector(sub_array, dir));
}

DoaEstimate music_estimate(const SensorArray& sub_array, const CovarianceMatrix& r_sub, const AngularGrid& grid,
                           int num_sources) {
  if (r_sub.size() != static_cast<Eigen::Index>(sub_array.size()))
    throw std::invalid_argument("covariance does not match the sub-array");
  const CMatrix en = noise_subspace(r_sub, num_sources);
  const auto pos = sub_array.positions();
  const Eigen::Index k = r_sub.size();

  CVector a(k);
  double best = -1.0;
  DoaEstimate out;
  for (double theta : grid.theta()) {
    const double st = std::sin(deg2rad(theta));
    const double ct = std::cos(deg2rad(theta));
    for (double phi : grid.phi()) {
      const double cp = std::cos(deg2rad(phi));
      const double sp = std::sin(deg2rad(phi));
      for (Eigen::Index m = 0; m < k; ++m) {
        const Vec3& p = pos[static_cast<std::size_t>(m)];
        const double phase = -2.0 * kPi * (p.x * cp * st + p.y * sp * st + p.z * ct);
        a(m) = Complex(std::cos(phase), std::sin(phase));
      }
      const double denom = null_projection(en, a);
      const double value = denom > 0.0 ? 1.0 / denom : std::numeric_limits<double>::infinity();
      if (value > best) {
        best = value;
        out = {theta, phi, value};
      }
    }
  }
  return out;
}

double wrap_degrees(double diff) {
  double w = std::fmod(diff, 360.0);
  if (w <= -180.0) w += 360.0;
  if (w > 180.0) w -= 360.0;
  return w;
}

double rmse(std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw std::invalid_argument("rmse needs at least one estimate");
  double acc = 0.0;
  for (double e : estimates) {
    const double d = wrap_degrees(e - truth);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(estimates.size()));
}

double rmse(std::span<const double> estimates, std::span<const double> truth) {
  if (estimates.empty()) throw std::invalid_argument("rmse needs at least one estimate");
  if (estimates.size() != truth.size()) throw std::invalid_argument("estimate and truth lengths differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double d = wrap_degrees(estimates[i] - truth[i]);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(estimates.size()));
}

double rmse_joint(std::span<const DoaEstimate> estimates, std::span<const SourceDirection> truth) {
  if (estimates.empty()) throw std::invalid_argument("rmse needs at least one estimate");
  if (estimates.size() != truth.size()) throw std::invalid_argument("estimate and truth lengths differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double dt = estimates[i].theta_deg - truth[i].theta_deg();
    const double dp = wrap_degrees(estimates[i].phi_deg - truth[i].phi_deg());
    acc += dt * dt + dp * dp;
  }
  return std::sqrt(acc / (2.0 * static_cast<double>(estimates.size())));
}

}  // namespace arraysel
