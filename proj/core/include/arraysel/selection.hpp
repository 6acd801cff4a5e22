#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "arraysel/crb.hpp"
#include "arraysel/nn.hpp"

namespace arraysel {

enum class SelectionMethod { cnn, cnn_tl, gas, ras, best_exhaustive };

std::string to_string(SelectionMethod method);

struct SelectionResult {
  SubarrayClass subset;
  SelectionMethod method = SelectionMethod::cnn;
  // Softmax probability (CNN), absolute CRB in deg^2 (GAS, exhaustive) or empty (RAS).
  std::optional<double> score;
  std::uint64_t crb_evaluations = 0;
};

// Argmax class of the network on the covariance tensor (lowest class id on ties).
// `standardize` must match how the training tensors were prepared.
SelectionResult select_cnn(const NetworkModel& model, const CovarianceMatrix& r, const BestSubarraySet& class_map,
                           bool standardize = false, SelectionMethod tag = SelectionMethod::cnn);

// Backward elimination from the full array: each pass drops the sensor whose
// removal gives the smallest absolute CRB for the remaining set. A pass where
// every candidate is degenerate drops the sensor that keeps the largest
// aperture instead.
SelectionResult select_greedy(const SensorArray& array, int k, const SourceDirection& dir_estimate,
                              const CovarianceMatrix& r_full, double sigma_n2, int snapshots,
                              const CrbOptions& options = {});

SelectionResult select_random(int m, int k, std::uint64_t seed);

// Exhaustive CRB argmin (oracle selector; needs the true direction).
SelectionResult select_best(const SensorArray& array, int k, const SourceDirection& dir, const CovarianceMatrix& r_full,
                            double sigma_n2, int snapshots, const CrbOptions& options = {});

// 100 * matches / total.
double selection_accuracy(std::span<const int> predicted, std::span<const int> truth);

}  // namespace arraysel
