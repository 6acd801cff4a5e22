#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "arraysel/crb.hpp"
#include "arraysel/geometry.hpp"
#include "arraysel/signal.hpp"

namespace arraysel {

// 3 x M x M real tensor (channel-major, then row-major): Re R, Im R, arg R.
class InputTensor {
 public:
  explicit InputTensor(int side);
  InputTensor(int side, std::vector<double> values);

  int side() const { return side_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double at(int channel, int row, int col) const { return values_[index(channel, row, col)]; }
  double& at(int channel, int row, int col) { return values_[index(channel, row, col)]; }

 private:
  std::size_t index(int channel, int row, int col) const {
    return (static_cast<std::size_t>(channel) * side_ + row) * side_ + col;
  }
  int side_;
  std::vector<double> values_;
};

InputTensor build_input_tensor(const CovarianceMatrix& r);

// Per-channel zero-mean / unit-variance rescaling of a single tensor. Channels
// with zero spread are only centred.
void standardize_channels(std::span<double> values, int side);

struct SampleMeta {
  float theta_deg = 0.0f;
  float phi_deg = 0.0f;
  float snr_db = 0.0f;
  std::uint32_t realization = 0;

  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

struct TrainingSample {
  std::vector<float> input;  // 3*M*M, channel-major
  std::uint32_t label = 0;
  SampleMeta meta;

  friend bool operator==(const TrainingSample&, const TrainingSample&) = default;
};

enum class Split : std::uint8_t { train, validation };

struct GenerationConfig {
  int k = 3;
  int directions = 36;          // P (azimuth points)
  int realizations = 50;        // L
  int snapshots = 100;          // T
  std::vector<double> snr_db{20.0};
  std::uint64_t seed = 1;
  double elevation_deg = 90.0;  // used when elevation_points == 0
  // Joint elevation/azimuth data: elevation_points cell centres over [theta_min, theta_max).
  int elevation_points = 0;
  double theta_min_deg = 80.0;
  double theta_max_deg = 90.0;
  double perturb_sigma = 0.0;   // fresh position perturbation per (direction, realization)
  bool standardize = false;
  LabelCovariance label_covariance = LabelCovariance::sampled;
  CrbForm crb_form = CrbForm::self_terms;
  unsigned threads = 1;
};

// Training directions: P azimuths equally spaced over [0, 359] degrees at the
// configured elevation, or the elevation x azimuth product in joint mode.
std::vector<SourceDirection> training_directions(const GenerationConfig& config);

class Dataset {
 public:
  int sensors = 0;
  std::vector<TrainingSample> samples;
  BestSubarraySet class_map;
  GenerationConfig config;
  std::vector<Split> split;  // empty until split_dataset

  std::vector<std::size_t> indices(Split which) const;
};

Dataset generate_training_data(const SensorArray& array, const GenerationConfig& config);

// One-time stratified random partition; falls back to an unstratified split
// (with a warning) when some class has fewer than two samples.
Dataset split_dataset(Dataset d, double train_fraction, std::uint64_t seed);

void write_dataset(std::ostream& out, const Dataset& d);
Dataset read_dataset(std::istream& in);
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace arraysel
