#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "arraysel/crb.hpp"
#include "arraysel/dataset.hpp"
#include "arraysel/geometry.hpp"
#include "arraysel/nn.hpp"

namespace arraysel {

enum class Scenario { source_doa, tl_accuracy_sweep, tl_doa, perturbed_tl, coupling_sweep, two_d };
enum class Scale { desk, paper };

// CLI names: source-doa, tl-sweep, tl-doa, perturbed-tl, coupling, two-d.
std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& text);
Scale parse_scale(const std::string& text);
std::string to_string(Scale s);

// "ura:4x4", "uca:16", "file:<path>"; spacing in wavelengths.
struct GeometrySpec {
  ArrayKind kind = ArrayKind::uca;
  int m1 = 8;
  int m2 = 1;
  double spacing = 0.5;
  std::string file;

  SensorArray build() const;
  std::string describe() const;
  int sensors() const;
};

GeometrySpec parse_geometry_spec(const std::string& text);

struct ExperimentConfig {
  Scenario scenario = Scenario::tl_doa;
  Scale scale = Scale::desk;

  GeometrySpec source{ArrayKind::ura, 2, 4, 0.5, {}};
  GeometrySpec target{ArrayKind::uca, 8, 1, 0.5, {}};
  int k_source = 3;
  int k_target = 3;
  int p_source = 36;
  int l_source = 50;
  int p_target = 10;
  int l_target = 10;
  int snapshots = 100;
  std::vector<double> train_snr_db{20.0};
  std::vector<double> test_snr_db{0.0, 5.0, 10.0, 15.0, 20.0};
  std::vector<int> sweep_p_source{9, 18, 36};
  std::vector<double> gammas{0.01, 0.25, 0.5, 0.75, 1.0};
  double coupling_snr_db = 10.0;
  std::uint64_t coupling_seed = 7;
  int trials = 100;  // Monte Carlo trials per point
  int test_realizations = 10;  // held-out target realizations per direction
  std::uint64_t seed = 1;

  CrbForm crb_form = CrbForm::self_terms;
  LabelCovariance label_covariance = LabelCovariance::sampled;
  bool standardize = false;
  double train_fraction = 0.8;
  double perturb_sigma = 0.25;
  bool gas_true_direction = false;

  // Elevation handling: 1-D scenarios sit at a fixed elevation; the 2-D scenario
  // samples cell centres of [theta_min, theta_max].
  double elevation_deg = 90.0;
  double theta_min_deg = 80.0;
  double theta_max_deg = 90.0;
  int theta_points_source = 3;
  int theta_points_target = 3;
  double phi_step_1d = 0.1;
  double phi_step_2d = 1.0;
  double theta_step_2d = 0.5;

  int conv_filters = 32;
  int fc_units = 128;
  TrainConfig train{.learning_rate = 0.01, .momentum = 0.9, .batch_size = 32, .lr_decay = 0.9,
                    .lr_decay_every = 10, .patience = 3, .max_epochs = 60, .seed = 1, .threads = 1};
  unsigned threads = 0;  // data generation and Monte Carlo workers (0 = all cores)
};

// Scenario defaults at the requested scale.
ExperimentConfig default_config(Scenario scenario, Scale scale);

// Applies one key=value assignment; unknown keys throw std::invalid_argument.
void apply_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
// Flat key=value text; '#' comments and blank lines ignored.
void apply_config_text(ExperimentConfig& cfg, std::istream& in);
void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path);

// Every key in a fixed order; parsing the output reproduces the config.
std::string canonical_config_text(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);
// Documented key list (one "key  description" line each).
std::string config_key_help();

struct ResultRow {
  double x = 0.0;
  std::string series;
  double value = 0.0;
  double stderr_value = 0.0;
  int n = 0;
};

struct ExperimentResult {
  std::string name;
  std::string x_label;
  std::string metric;
  std::vector<ResultRow> rows;
  std::uint64_t config_hash = 0;
  std::string version;
  double wall_time_s = 0.0;
  std::vector<std::string> notes;  // run-dependent details, kept out of the CSV

  const ResultRow* find(double x, const std::string& series) const;
  // Deterministic table: x,series,value,stderr,n,config_hash.
  void write_csv(std::ostream& out) const;
  // Run metadata (version, wall time, notes).
  void write_meta(std::ostream& out) const;
  void save(const std::filesystem::path& dir) const;  // <dir>/<name>.csv and <name>.meta
};

std::string library_version();

// Pipeline pieces shared by the scenarios and the CLI.
enum class Domain { source, target };

// Independent seed streams derived from cfg.seed.
enum class SeedStream : std::uint64_t {
  source_data = 1,
  target_data,
  heldout,
  train_source,
  train_target,
  transfer,
  monte_carlo,
  fixed_perturbation,
};
std::uint64_t stream_seed(const ExperimentConfig& cfg, SeedStream stream);

GenerationConfig generation_config(const ExperimentConfig& cfg, Domain domain, bool two_d, std::uint64_t seed);
Dataset make_domain_dataset(const ExperimentConfig& cfg, Domain domain, bool two_d, std::uint64_t seed);
// The train/validation partition make_domain_dataset applies (files store no split).
Dataset split_domain_dataset(const ExperimentConfig& cfg, Dataset d, std::uint64_t seed);

// Trains the configured CNN on a split dataset. Requires at least two classes.
NetworkModel train_domain_model(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed,
                                TrainReport* report = nullptr);

// Transfer: frozen convolutions, head rebuilt whenever the
// target class map differs from the source one, then fine-tuned on target data.
NetworkModel transfer_domain_model(const ExperimentConfig& cfg, const NetworkModel& source,
                                   const BestSubarraySet& source_map, const Dataset& target_data, std::uint64_t seed,
                                   TrainReport* report = nullptr);

// A trained network together with the subsets its outputs stand for. Single
// class maps need no network.
struct CnnSelector {
  std::optional<NetworkModel> model;
  BestSubarraySet class_map;
  bool standardize = false;

  SubarrayClass choose(const CovarianceMatrix& r) const;
};

CnnSelector fit_selector(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed,
                         TrainReport* report = nullptr);
CnnSelector transfer_selector(const ExperimentConfig& cfg, const CnnSelector& source, const Dataset& target_data,
                              std::uint64_t seed, TrainReport* report = nullptr);

// Fresh labelled covariances for held-out accuracy: realizations x directions
// of `data.config`, new noise, truth = exhaustive best subset of each draw.
struct LabelledCovariance {
  CovarianceMatrix r;
  SubarrayClass truth;
};
std::vector<LabelledCovariance> heldout_set(const SensorArray& array, const GenerationConfig& gen, int realizations,
                                            std::uint64_t seed);
// Percentage of draws where the selector returns exactly the true subset.
double heldout_accuracy(const CnnSelector& selector, const std::vector<LabelledCovariance>& set);

// Source model, target-only model and transferred model for one seed, plus the
// held-out target draws used to score them.
struct TlPipeline {
  SensorArray source_array;
  SensorArray target_array;
  Dataset source_data;
  Dataset target_data;
  CnnSelector cnn_s;
  CnnSelector cnn_t;
  CnnSelector cnn_tr;
  TrainReport report_s;
  TrainReport report_t;
  TrainReport report_tr;
  std::vector<LabelledCovariance> heldout;
  double accuracy_t = 0.0;
  double accuracy_tr = 0.0;
};

TlPipeline build_tl_pipeline(const ExperimentConfig& cfg, bool two_d = false);

// Scenarios. The DoA scenarios accept a pre-built pipeline so several sweeps
// can share one set of trained models.
ExperimentResult run_source_domain(const ExperimentConfig& cfg);
ExperimentResult run_tl_sweep(const ExperimentConfig& cfg);
ExperimentResult run_tl_doa(const ExperimentConfig& cfg, const TlPipeline* pipeline = nullptr);
ExperimentResult run_perturbed_tl(const ExperimentConfig& cfg);
ExperimentResult run_coupling_sweep(const ExperimentConfig& cfg, const TlPipeline* pipeline = nullptr);
ExperimentResult run_two_d(const ExperimentConfig& cfg, const TlPipeline* pipeline = nullptr);
ExperimentResult run_scenario(const ExperimentConfig& cfg);

}  // namespace arraysel
