#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "arraysel/common.hpp"
#include "arraysel/geometry.hpp"
#include "arraysel/signal.hpp"

namespace arraysel {

// A K-subset of sensor indices (strictly increasing, within [0, M)).
class SubarrayClass {
 public:
  SubarrayClass() = default;
  SubarrayClass(std::vector<int> indices, int class_id, std::size_t parent_size);

  std::span<const int> indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  int class_id() const { return class_id_; }
  SubarrayClass with_id(int id) const;

  bool same_subset(const SubarrayClass& other) const { return indices_ == other.indices_; }
  friend bool operator==(const SubarrayClass&, const SubarrayClass&) = default;

 private:
  std::vector<int> indices_;
  int class_id_ = -1;
};

// Quadratic form used in the CRB denominator.
//  self_terms  : Pi_theta = da_theta^H P da_theta (standard single-source bound)
//  cross_terms : Pi_theta = da_theta^H P da_phi, Pi_phi = da_phi^H P da_theta
// where P = I - a a^H / K.
enum class CrbForm { self_terms, cross_terms };

CrbForm parse_crb_form(const std::string& text);  // "self" | "paper"
std::string to_string(CrbForm form);

struct CrbOptions {
  CrbForm form = CrbForm::self_terms;
  double signal_power = 1.0;
  // Elevation treated as a known parameter: its bound is zero and only the
  // azimuth term drives the absolute CRB (fixed-elevation experiments).
  bool known_elevation = false;
};

// Bounds in squared degrees.
struct CrbComponents {
  double kappa_theta = 0.0;
  double kappa_phi = 0.0;
  double kappa_abs = 0.0;
  Complex pi_theta;
  Complex pi_phi;
};

// (1/sqrt 2) (kt^2 + kp^2)^(1/2)
double absolute_crb(double kappa_theta, double kappa_phi);
double absolute_crb(const CrbComponents& c);

// CRB of the subarray given its sample (or model) covariance r_sub (K x K).
// Throws InsufficientSubarray for K < 2 and NumericalDegeneracy when the bound
// is not finite and positive.
CrbComponents crb_pair(const SensorArray& array, const SubarrayClass& subset, const SourceDirection& dir,
                       const CovarianceMatrix& r_sub, double sigma_n2, int snapshots, const CrbOptions& options = {});

// Same evaluation from pre-computed subarray response and derivatives.
CrbComponents crb_from_response(const CVector& a, const CVector& da_theta, const CVector& da_phi, const CMatrix& r_sub,
                                double sigma_n2, int snapshots, const CrbOptions& options = {});

std::uint64_t binomial(int n, int k);

// Lexicographic K-subsets of {0..M-1}; class_id is the lexicographic rank.
class SubsetRange {
 public:
  class iterator {
   public:
    using value_type = SubarrayClass;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    iterator(int m, int k);

    const std::vector<int>& indices() const { return current_; }
    std::uint64_t rank() const { return rank_; }
    SubarrayClass operator*() const;
    iterator& operator++();
    bool operator==(const iterator& other) const { return done_ == other.done_ && (done_ || rank_ == other.rank_); }

   private:
    int m_ = 0;
    int k_ = 0;
    std::vector<int> current_;
    std::uint64_t rank_ = 0;
    bool done_ = true;
  };

  SubsetRange(int m, int k);
  iterator begin() const { return iterator(m_, k_); }
  iterator end() const { return iterator(); }
  std::uint64_t size() const { return binomial(m_, k_); }

 private:
  int m_;
  int k_;
};

SubsetRange enumerate_subarrays(int m, int k);

struct BestSubarrayChoice {
  SubarrayClass subset;  // class_id = lexicographic rank among all C subsets
  double kappa_abs = 0.0;
  std::uint64_t evaluated = 0;
  std::uint64_t degenerate = 0;
};

// Relative tolerance under which two CRB values count as a tie.
inline constexpr double kCrbTieTolerance = 1e-9;

// Exhaustive argmin of the absolute CRB over all K-subsets; ties go to the
// lexicographically smallest index set. Throws LabelingFailed when every
// candidate is degenerate.
BestSubarrayChoice best_subarray(const SensorArray& array, const SourceDirection& dir, const CovarianceMatrix& r_full,
                                 int k, double sigma_n2, int snapshots, const CrbOptions& options = {});

SubarrayClass label_best_subarray(const SensorArray& array, const SourceDirection& dir, const SnapshotMatrix& snapshots,
                                  int k, double sigma_n2, const CrbOptions& options = {});

// The reduced label set: distinct winners, sorted lexicographically, class_id = position.
struct BestSubarraySet {
  std::vector<SubarrayClass> classes;
  std::uint64_t total_candidates = 0;
  double tolerance = kCrbTieTolerance;

  std::size_t reduced_count() const { return classes.size(); }
  int subset_size() const { return classes.empty() ? 0 : static_cast<int>(classes.front().size()); }
  std::optional<int> find(std::span<const int> indices) const;

  // Builds the set from arbitrary winners (duplicates collapse).
  static BestSubarraySet from_winners(std::vector<std::vector<int>> winners, int m, int k);
};

enum class LabelCovariance { sampled, asymptotic };

struct ReduceConfig {
  int realizations = 1;
  int snapshots = 100;
  double signal_power = 1.0;
  double noise_power = 0.01;
  LabelCovariance covariance = LabelCovariance::sampled;
  std::uint64_t seed = 1;
  CrbOptions crb;
  unsigned threads = 1;
};

BestSubarraySet reduce_classes(const SensorArray& array, int k, std::span<const SourceDirection> grid,
                               const ReduceConfig& config);

// "class_id: i1 i2 ... iK" per line.
void write_class_map(std::ostream& out, const BestSubarraySet& set);
BestSubarraySet read_class_map(std::istream& in, int parent_size);

}  // namespace arraysel
