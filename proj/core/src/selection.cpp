#include "arraysel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "arraysel/dataset.hpp"

namespace arraysel {

namespace {

double aperture(const SensorArray& array, const std::vector<int>& set) {
  double widest = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = i + 1; j < set.size(); ++j)
      widest = std::max(widest, distance(array.position(static_cast<std::size_t>(set[i])),
                                         array.position(static_cast<std::size_t>(set[j]))));
  return widest;
}

}  // namespace

std::string to_string(SelectionMethod method) {
  switch (method) {
    case SelectionMethod::cnn: return "CNN";
    case SelectionMethod::cnn_tl: return "CNN_TL";
    case SelectionMethod::gas: return "GAS";
    case SelectionMethod::ras: return "RAS";
    case SelectionMethod::best_exhaustive: return "BestExhaustive";
  }
  return "?";
}

SelectionResult select_cnn(const NetworkModel& model, const CovarianceMatrix& r, const BestSubarraySet& class_map,
                           bool standardize, SelectionMethod tag) {
  if (model.num_classes() != static_cast<int>(class_map.reduced_count()))
    throw std::invalid_argument("model output width does not match the class map");
  InputTensor x = build_input_tensor(r);
  if (standardize) standardize_channels(x.values(), x.side());
  const std::vector<double> p = forward(model, x.values());
  const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  SelectionResult out;
  out.subset = class_map.classes[best];
  out.method = tag;
  out.score = p[best];
  return out;
}

SelectionResult select_greedy(const SensorArray& array, int k, const SourceDirection& dir_estimate,
                              const CovarianceMatrix& r_full, double sigma_n2, int snapshots,
                              const CrbOptions& options) {
  const int m = static_cast<int>(array.size());
  if (k < 2) throw InsufficientSubarray("greedy selection needs k >= 2");
  if (k > m) throw std::invalid_argument("k exceeds the array size");
  if (r_full.size() != m) throw std::invalid_argument("covariance does not match the array size");

  std::vector<int> current(static_cast<std::size_t>(m));
  std::iota(current.begin(), current.end(), 0);
  SelectionResult out;
  out.method = SelectionMethod::gas;
  double last_value = std::numeric_limits<double>::quiet_NaN();

  while (static_cast<int>(current.size()) > k) {
    double best_value = std::numeric_limits<double>::infinity();
    std::size_t best_drop = current.size();
    std::vector<int> trial;
    for (std::size_t drop = 0; drop < current.size(); ++drop) {
      trial.clear();
      for (std::size_t i = 0; i < current.size(); ++i)
        if (i != drop) trial.push_back(current[i]);
      ++out.crb_evaluations;
      try {
        const SubarrayClass cand(trial, -1, array.size());
        const double v =
            crb_pair(array, cand, dir_estimate, r_full.principal(trial), sigma_n2, snapshots, options).kappa_abs;
        if (best_drop == current.size() || v < best_value * (1.0 - kCrbTieTolerance)) {
          best_value = v;
          best_drop = drop;
        }
      } catch (const NumericalDegeneracy&) {
      }
    }
    if (best_drop == current.size()) {
      log_warning("greedy selection hit a degenerate CRB step; dropping by residual aperture");
      double widest = -1.0;
      for (std::size_t drop = 0; drop < current.size(); ++drop) {
        trial.clear();
        for (std::size_t i = 0; i < current.size(); ++i)
          if (i != drop) trial.push_back(current[i]);
        const double ap = aperture(array, trial);
        if (ap > widest) {
          widest = ap;
          best_drop = drop;
        }
      }
      best_value = std::numeric_limits<double>::quiet_NaN();
    }
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(best_drop));
    last_value = best_value;
  }
  if (std::isnan(last_value) && static_cast<int>(current.size()) == m) {
    // k == m: nothing removed; score the full array when possible.
    try {
      last_value = crb_pair(array, SubarrayClass(current, -1, array.size()), dir_estimate, r_full, sigma_n2, snapshots,
                            options)
                       .kappa_abs;
    } catch (const NumericalDegeneracy&) {
    }
  }
  out.subset = SubarrayClass(current, -1, array.size());
  if (!std::isnan(last_value)) out.score = last_value;
  return out;
}

SelectionResult select_random(int m, int k, std::uint64_t seed) {
  if (k < 1 || m < 1) throw std::invalid_argument("sizes must be positive");
  if (k > m) throw std::invalid_argument("k exceeds m");
  std::vector<int> pool(static_cast<std::size_t>(m));
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  std::mt19937_64 rng(mix_seed({seed, 0x4a5}));
  // Selection sampling over a sorted pool keeps the output sorted.
  std::sample(pool.begin(), pool.end(), std::back_inserter(chosen), k, rng);
  SelectionResult out;
  out.subset = SubarrayClass(std::move(chosen), -1, static_cast<std::size_t>(m));
  out.method = SelectionMethod::ras;
  return out;
}

SelectionResult select_best(const SensorArray& array, int k, const SourceDirection& dir, const CovarianceMatrix& r_full,
                            double sigma_n2, int snapshots, const CrbOptions& options) {
  const BestSubarrayChoice choice = best_subarray(array, dir, r_full, k, sigma_n2, snapshots, options);
  SelectionResult out;
  out.subset = choice.subset;
  out.method = SelectionMethod::best_exhaustive;
  out.score = choice.kappa_abs;
  out.crb_evaluations = choice.evaluated;
  return out;
}

double selection_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.empty() || truth.empty()) throw std::invalid_argument("accuracy needs at least one sample");
  if (predicted.size() != truth.size()) throw std::invalid_argument("prediction and truth lengths differ");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace arraysel
