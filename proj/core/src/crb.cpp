#include "arraysel/crb.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

namespace arraysel {

SubarrayClass::SubarrayClass(std::vector<int> indices, int class_id, std::size_t parent_size)
    : indices_(std::move(indices)), class_id_(class_id) {
  if (indices_.empty()) throw std::invalid_argument("subarray must contain at least one sensor");
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] < 0 || static_cast<std::size_t>(indices_[i]) >= parent_size)
      throw std::invalid_argument("subarray index out of range");
    if (i > 0 && indices_[i] <= indices_[i - 1]) throw std::invalid_argument("subarray indices must be strictly increasing");
  }
}

SubarrayClass SubarrayClass::with_id(int id) const {
  SubarrayClass copy = *this;
  copy.class_id_ = id;
  return copy;
}

CrbForm parse_crb_form(const std::string& text) {
  if (text == "self") return CrbForm::self_terms;
  if (text == "paper" || text == "cross") return CrbForm::cross_terms;
  throw std::invalid_argument("unknown CRB form '" + text + "' (expected self|paper)");
}

std::string to_string(CrbForm form) { return form == CrbForm::self_terms ? "self" : "paper"; }

double absolute_crb(double kappa_theta, double kappa_phi) {
  return std::sqrt(kappa_theta * kappa_theta + kappa_phi * kappa_phi) / std::sqrt(2.0);
}

double absolute_crb(const CrbComponents& c) { return absolute_crb(c.kappa_theta, c.kappa_phi); }

namespace {

// Solves r x = a; regularizes r when it is numerically singular.
CVector solve_hermitian(const CMatrix& r, const CVector& a) {
  const auto k = r.rows();
  Eigen::LLT<CMatrix> llt(r);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) return llt.solve(a);
  const double trace = r.diagonal().real().sum();
  CMatrix reg = r;
  reg.diagonal().array() += 1e-10 * std::max(trace, 0.0) / static_cast<double>(k);
  Eigen::LLT<CMatrix> llt_reg(reg);
  if (llt_reg.info() != Eigen::Success || !(llt_reg.rcond() > 0.0))
    throw NumericalDegeneracy("subarray covariance is singular beyond regularization");
  return llt_reg.solve(a);
}

}  // namespace

CrbComponents crb_from_response(const CVector& a, const CVector& da_theta, const CVector& da_phi, const CMatrix& r_sub,
                                double sigma_n2, int snapshots, const CrbOptions& options) {
  const auto k = a.size();
  if (k < 2) throw InsufficientSubarray("CRB needs at least 2 sensors (projection annihilates K = 1)");
  if (r_sub.rows() != k || r_sub.cols() != k) throw std::invalid_argument("subarray covariance size mismatch");
  if (snapshots < 1) throw std::invalid_argument("snapshot count must be >= 1");
  if (!(sigma_n2 > 0.0)) throw std::invalid_argument("noise power must be positive");

  const CVector x = solve_hermitian(r_sub, a);
  const double s2 = options.signal_power;
  const Complex q = s2 * s2 * a.dot(x);  // a^H R^{-1} a, scaled by sigma_s^4

  const double kd = static_cast<double>(k);
  const CVector p_theta = da_theta - a * (a.dot(da_theta) / kd);
  const CVector p_phi = da_phi - a * (a.dot(da_phi) / kd);

  CrbComponents out;
  if (options.form == CrbForm::self_terms) {
    out.pi_theta = da_theta.dot(p_theta);
    out.pi_phi = da_phi.dot(p_phi);
  } else {
    out.pi_theta = da_theta.dot(p_phi);
    out.pi_phi = da_phi.dot(p_theta);
  }

  const double scale = std::max(da_theta.squaredNorm(), da_phi.squaredNorm());
  const double two_t = 2.0 * snapshots;
  const auto bound = [&](Complex pi, const char* name) {
    const double den = two_t * (pi * q).real();
    if (!std::isfinite(den) || !(den > 0.0) || !(std::abs(pi) > 1e-12 * scale))
      throw NumericalDegeneracy(std::string("CRB denominator for ") + name + " is not positive");
    return sigma_n2 / den * kDegPerRad * kDegPerRad;
  };
  out.kappa_theta = options.known_elevation ? 0.0 : bound(out.pi_theta, "theta");
  out.kappa_phi = bound(out.pi_phi, "phi");
  out.kappa_abs = absolute_crb(out.kappa_theta, out.kappa_phi);
  return out;
}

CrbComponents crb_pair(const SensorArray& array, const SubarrayClass& subset, const SourceDirection& dir,
                       const CovarianceMatrix& r_sub, double sigma_n2, int snapshots, const CrbOptions& options) {
  if (subset.size() < 2) throw InsufficientSubarray("CRB needs at least 2 sensors (projection annihilates K = 1)");
  const SensorArray sub = array.subset(subset.indices());
  const CVector a = steering_vector(sub, dir);
  const auto d = steering_derivatives(sub, dir);
  return crb_from_response(a, d.d_theta, d.d_phi, r_sub.matrix(), sigma_n2, snapshots, options);
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

SubsetRange::iterator::iterator(int m, int k) : m_(m), k_(k), current_(static_cast<std::size_t>(k)), done_(false) {
  for (int i = 0; i < k; ++i) current_[static_cast<std::size_t>(i)] = i;
}

SubarrayClass SubsetRange::iterator::operator*() const {
  return SubarrayClass(current_, static_cast<int>(rank_), static_cast<std::size_t>(m_));
}

SubsetRange::iterator& SubsetRange::iterator::operator++() {
  int i = k_ - 1;
  while (i >= 0 && current_[static_cast<std::size_t>(i)] == m_ - k_ + i) --i;
  if (i < 0) {
    done_ = true;
    return *this;
  }
  ++current_[static_cast<std::size_t>(i)];
  for (int j = i + 1; j < k_; ++j) current_[static_cast<std::size_t>(j)] = current_[static_cast<std::size_t>(j - 1)] + 1;
  ++rank_;
  return *this;
}

SubsetRange::SubsetRange(int m, int k) : m_(m), k_(k) {
  if (k < 1 || m < 1) throw std::invalid_argument("subset enumeration needs 1 <= k <= m");
  if (k > m) throw std::invalid_argument("subset size k exceeds element count m");
}

SubsetRange enumerate_subarrays(int m, int k) { return SubsetRange(m, k); }

BestSubarrayChoice best_subarray(const SensorArray& array, const SourceDirection& dir, const CovarianceMatrix& r_full,
                                 int k, double sigma_n2, int snapshots, const CrbOptions& options) {
  const int m = static_cast<int>(array.size());
  if (r_full.size() != m) throw std::invalid_argument("full covariance does not match the array size");
  if (k < 2) throw InsufficientSubarray("subarray size must be >= 2");
  const CVector a = steering_vector(array, dir);
  const auto d = steering_derivatives(array, dir);
  const CMatrix& r = r_full.matrix();

  CVector a_sub(k), dt_sub(k), dp_sub(k);
  CMatrix r_sub(k, k);
  BestSubarrayChoice best;
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<int> best_indices;
  std::uint64_t best_rank = 0;

  const SubsetRange range(m, k);
  for (auto it = range.begin(); it != range.end(); ++it) {
    const auto& idx = it.indices();
    for (int i = 0; i < k; ++i) {
      const int si = idx[static_cast<std::size_t>(i)];
      a_sub(i) = a(si);
      dt_sub(i) = d.d_theta(si);
      dp_sub(i) = d.d_phi(si);
      for (int j = 0; j < k; ++j) r_sub(i, j) = r(si, idx[static_cast<std::size_t>(j)]);
    }
    ++best.evaluated;
    double value = 0.0;
    try {
      value = crb_from_response(a_sub, dt_sub, dp_sub, r_sub, sigma_n2, snapshots, options).kappa_abs;
    } catch (const NumericalDegeneracy&) {
      ++best.degenerate;
      continue;
    }
    // Strictly better beyond the tie tolerance; enumeration order keeps the
    // lexicographically smallest member of a tie.
    if (best_indices.empty() || value < best_value * (1.0 - kCrbTieTolerance)) {
      best_value = value;
      best_indices = idx;
      best_rank = it.rank();
    }
  }
  if (best_indices.empty()) throw LabelingFailed("every candidate subarray is numerically degenerate");
  best.subset = SubarrayClass(std::move(best_indices), static_cast<int>(best_rank), array.size());
  best.kappa_abs = best_value;
  return best;
}

SubarrayClass label_best_subarray(const SensorArray& array, const SourceDirection& dir, const SnapshotMatrix& snapshots,
                                  int k, double sigma_n2, const CrbOptions& options) {
  if (snapshots.sensors() != static_cast<Eigen::Index>(array.size()))
    throw std::invalid_argument("snapshots must come from the full array");
  const auto r = sample_covariance(snapshots);
  return best_subarray(array, dir, r, k, sigma_n2, static_cast<int>(snapshots.snapshot_count()), options).subset;
}

std::optional<int> BestSubarraySet::find(std::span<const int> indices) const {
  for (const auto& c : classes) {
    if (std::equal(c.indices().begin(), c.indices().end(), indices.begin(), indices.end())) return c.class_id();
  }
  return std::nullopt;
}

BestSubarraySet BestSubarraySet::from_winners(std::vector<std::vector<int>> winners, int m, int k) {
  std::set<std::vector<int>> distinct(std::make_move_iterator(winners.begin()), std::make_move_iterator(winners.end()));
  BestSubarraySet set;
  set.total_candidates = binomial(m, k);
  int id = 0;
  for (const auto& w : distinct) {
    if (static_cast<int>(w.size()) != k) throw std::invalid_argument("winner has the wrong subset size");
    set.classes.emplace_back(w, id++, static_cast<std::size_t>(m));
  }
  return set;
}

BestSubarraySet reduce_classes(const SensorArray& array, int k, std::span<const SourceDirection> grid,
                               const ReduceConfig& config) {
  if (grid.empty()) throw std::invalid_argument("direction grid must not be empty");
  if (config.realizations < 1) throw std::invalid_argument("realization count must be >= 1");
  const int m = static_cast<int>(array.size());
  const std::size_t reps = config.covariance == LabelCovariance::asymptotic ? 1 : static_cast<std::size_t>(config.realizations);
  const std::size_t tasks = grid.size() * reps;
  std::vector<std::optional<std::vector<int>>> winners(tasks);

  parallel_for(tasks, config.threads, [&](std::size_t task) {
    const std::size_t p = task / reps;
    const std::size_t l = task % reps;
    try {
      CovarianceMatrix r = [&] {
        if (config.covariance == LabelCovariance::asymptotic)
          return asymptotic_covariance(steering_vector(array, grid[p]), config.signal_power, config.noise_power);
        SimulationParams sim;
        sim.snapshots = config.snapshots;
        sim.signal_power = config.signal_power;
        sim.noise_power = config.noise_power;
        sim.seed = mix_seed({config.seed, p, l});
        return sample_covariance(simulate_snapshots(array, grid[p], sim));
      }();
      auto choice = best_subarray(array, grid[p], r, k, config.noise_power, config.snapshots, config.crb);
      winners[task] = std::vector<int>(choice.subset.indices().begin(), choice.subset.indices().end());
    } catch (const LabelingFailed&) {
    }
  });

  std::vector<std::vector<int>> found;
  std::size_t failures = 0;
  for (auto& w : winners) {
    if (w) found.push_back(std::move(*w));
    else ++failures;
  }
  if (failures * 10 > tasks)
    throw LabelingFailed("labeling failed on " + std::to_string(failures) + " of " + std::to_string(tasks) + " grid points");
  if (failures > 0) log_warning("labeling failed on " + std::to_string(failures) + " grid points; skipped");
  auto set = BestSubarraySet::from_winners(std::move(found), m, k);
  if (set.reduced_count() > static_cast<std::size_t>(m))
    log_warning("reduced class count " + std::to_string(set.reduced_count()) + " exceeds the element count");
  return set;
}

void write_class_map(std::ostream& out, const BestSubarraySet& set) {
  for (const auto& c : set.classes) {
    out << c.class_id() << ':';
    for (int i : c.indices()) out << ' ' << i;
    out << '\n';
  }
}

BestSubarraySet read_class_map(std::istream& in, int parent_size) {
  std::vector<std::pair<int, std::vector<int>>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw FormatError("class map line without ':'");
    const int id = static_cast<int>(parse_int(line.substr(0, colon), "class id"));
    std::istringstream rest(line.substr(colon + 1));
    std::vector<int> idx;
    std::string tok;
    while (rest >> tok) idx.push_back(static_cast<int>(parse_int(tok, "sensor index")));
    rows.emplace_back(id, std::move(idx));
  }
  BestSubarraySet set;
  const std::size_t k = rows.empty() ? 0 : rows.front().second.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<int>(i)) throw FormatError("class ids must be consecutive from 0");
    if (rows[i].second.size() != k) throw FormatError("class map mixes subset sizes");
    set.classes.emplace_back(std::move(rows[i].second), rows[i].first, static_cast<std::size_t>(parent_size));
  }
  set.total_candidates = set.classes.empty() ? 0 : binomial(parent_size, set.subset_size());
  return set;
}

}  // namespace arraysel
