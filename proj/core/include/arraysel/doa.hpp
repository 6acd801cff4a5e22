#pragma once

#include <span>
#include <vector>

#include "arraysel/geometry.hpp"
#include "arraysel/signal.hpp"

namespace arraysel {

// Search grid in degrees. A single theta value gives an azimuth-only scan.
class AngularGrid {
 public:
  AngularGrid(std::vector<double> theta_deg, std::vector<double> phi_deg);

  // phi in [0, 360) with the given step at a fixed elevation.
  static AngularGrid azimuth_scan(double theta_deg, double phi_step = 0.1);
  // theta over [theta_lo, theta_hi] (inclusive) x phi over [0, 360).
  static AngularGrid joint_scan(double theta_lo, double theta_hi, double theta_step = 0.5, double phi_step = 1.0);

  const std::vector<double>& theta() const { return theta_; }
  const std::vector<double>& phi() const { return phi_; }
  std::size_t size() const { return theta_.size() * phi_.size(); }
  bool is_one_dimensional() const { return theta_.size() == 1; }

 private:
  std::vector<double> theta_;
  std::vector<double> phi_;
};

struct DoaEstimate {
  double theta_deg = 0.0;
  double phi_deg = 0.0;
  double spectrum_peak = 0.0;
};

// MUSIC pseudospectrum peak over the grid; ties go to the lowest grid index
// (theta-major, then phi).
DoaEstimate music_estimate(const SensorArray& sub_array, const CovarianceMatrix& r_sub, const AngularGrid& grid,
                           int num_sources = 1);

// 1 / (a^H E_n E_n^H a) at one direction.
double music_spectrum(const SensorArray& sub_array, const CovarianceMatrix& r_sub, const SourceDirection& dir,
                      int num_sources = 1);

// Angle difference folded into (-180, 180].
double wrap_degrees(double diff);

// Azimuth RMSE with wrapped differences.
double rmse(std::span<const double> estimates, double truth);
double rmse(std::span<const double> estimates, std::span<const double> truth);

// Joint RMSE: sqrt of the mean over trials and both angles of the squared error
// (azimuth wrapped).
double rmse_joint(std::span<const DoaEstimate> estimates, std::span<const SourceDirection> truth);

}  // namespace arraysel
