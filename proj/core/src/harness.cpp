#include "arraysel/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>

#include "arraysel/doa.hpp"
#include "arraysel/selection.hpp"

#ifndef ARRAYSEL_VERSION
#define ARRAYSEL_VERSION "0.0.0"
#endif

namespace arraysel {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

CrbOptions crb_options(const ExperimentConfig& cfg, bool two_d) {
  CrbOptions o;
  o.form = cfg.crb_form;
  o.known_elevation = !two_d;
  return o;
}

ExperimentResult start_result(const ExperimentConfig& cfg, std::string name, std::string x_label, std::string metric) {
  ExperimentResult r;
  r.name = std::move(name);
  r.x_label = std::move(x_label);
  r.metric = std::move(metric);
  r.config_hash = config_hash(cfg);
  r.version = library_version();
  return r;
}

void add_accuracy_row(ExperimentResult& res, double x, const std::string& series, double pct, std::size_t n) {
  const double p = pct / 100.0;
  const double se = n > 0 ? 100.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0;
  res.rows.push_back({x, series, pct, se, static_cast<int>(n)});
}

std::string report_note(const std::string& what, const TrainReport& r) {
  return what + ": epochs=" + std::to_string(r.epochs.size()) + " best_epoch=" + std::to_string(r.best_epoch) +
         " best_validation=" + num(r.best_validation_accuracy) + " stop=" + to_string(r.stop_reason) +
         " wall_s=" + num(r.wall_time_s);
}

// One Monte Carlo draw as seen by every selector.
struct Trial {
  SourceDirection truth;
  CovarianceMatrix r;
  DoaEstimate full;
  std::uint64_t seed;
};

struct Method {
  std::string name;
  // Returns the chosen subset; an empty function means "all sensors".
  std::function<SubarrayClass(const Trial&)> select;
};

struct McSetup {
  const SensorArray* array = nullptr;  // nominal geometry for selection and estimation
  int k = 2;
  double snr_db = 0.0;
  const CMatrix* coupling = nullptr;
  bool two_d = false;
};

AngularGrid scan_grid(const ExperimentConfig& cfg, bool two_d) {
  return two_d ? AngularGrid::joint_scan(cfg.theta_min_deg, cfg.theta_max_deg, cfg.theta_step_2d, cfg.phi_step_2d)
               : AngularGrid::azimuth_scan(cfg.elevation_deg, cfg.phi_step_1d);
}

// RMSE per method over cfg.trials draws sharing snapshots across methods.
void monte_carlo_point(const ExperimentConfig& cfg, const McSetup& setup, const std::vector<Method>& methods, double x,
                       std::uint64_t seed, ExperimentResult& out) {
  const SensorArray& array = *setup.array;
  const AngularGrid grid = scan_grid(cfg, setup.two_d);
  const double noise = noise_power_from_snr_db(setup.snr_db);
  const std::size_t trials = static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<double>> sq(methods.size(), std::vector<double>(trials, 0.0));

  parallel_for(trials, cfg.threads, [&](std::size_t j) {
    const std::uint64_t tseed = mix_seed({seed, j});
    std::mt19937_64 rng(tseed);
    std::uniform_real_distribution<double> az(0.0, 359.0);
    std::uniform_real_distribution<double> el(cfg.theta_min_deg, cfg.theta_max_deg);
    const double phi = az(rng);
    const double theta = setup.two_d ? el(rng) : cfg.elevation_deg;
    const SourceDirection truth(theta, phi);

    SimulationParams sim;
    sim.snapshots = cfg.snapshots;
    sim.noise_power = noise;
    sim.coupling = setup.coupling;
    sim.seed = mix_seed({tseed, 0x51});
    const CovarianceMatrix r = sample_covariance(simulate_snapshots(array, truth, sim));
    Trial trial{truth, r, music_estimate(array, r, grid), tseed};

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      DoaEstimate est = trial.full;
      if (methods[mi].select) {
        const SubarrayClass subset = methods[mi].select(trial);
        est = music_estimate(array.subset(subset.indices()), r.principal(subset.indices()), grid);
      }
      const double dp = wrap_degrees(est.phi_deg - truth.phi_deg());
      const double dt = est.theta_deg - truth.theta_deg();
      sq[mi][j] = setup.two_d ? 0.5 * (dt * dt + dp * dp) : dp * dp;
    }
  });

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const auto& v = sq[mi];
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double var = 0.0;
    for (double e : v) var += (e - mean) * (e - mean);
    var = v.size() > 1 ? var / (n - 1.0) : 0.0;
    const double rmse_value = std::sqrt(mean);
    // Delta method: se(sqrt(m)) = se(m) / (2 sqrt(m)).
    const double se = rmse_value > 0.0 ? std::sqrt(var / n) / (2.0 * rmse_value) : 0.0;
    out.rows.push_back({x, methods[mi].name, rmse_value, se, static_cast<int>(v.size())});
  }
}

// BestExhaustive and GAS are bound per sweep point by bind_crb_methods.
std::vector<Method> target_methods(const TlPipeline& p, int k) {
  const SensorArray* array = &p.target_array;
  std::vector<Method> methods;
  methods.push_back({"BestExhaustive", nullptr});
  methods.push_back({"CNN_TR", [&p](const Trial& t) { return p.cnn_tr.choose(t.r); }});
  methods.push_back({"CNN_T", [&p](const Trial& t) { return p.cnn_t.choose(t.r); }});
  methods.push_back({"GAS", nullptr});
  methods.push_back({"RAS", [array, k](const Trial& t) {
                       return select_random(static_cast<int>(array->size()), k, t.seed).subset;
                     }});
  methods.push_back({"Full", nullptr});
  return methods;
}

// CRB-driven selectors need the noise level of the current sweep point.
void bind_crb_methods(std::vector<Method>& methods, const ExperimentConfig& cfg, const SensorArray* array, int k,
                      double snr_db, bool two_d) {
  const CrbOptions crb = crb_options(cfg, two_d);
  const double noise = noise_power_from_snr_db(snr_db);
  const int snapshots = cfg.snapshots;
  const bool oracle_dir = cfg.gas_true_direction;
  for (Method& m : methods) {
    if (m.name == "BestExhaustive") {
      m.select = [=](const Trial& t) { return select_best(*array, k, t.truth, t.r, noise, snapshots, crb).subset; };
    } else if (m.name == "GAS") {
      m.select = [=](const Trial& t) {
        const SourceDirection dir = oracle_dir ? t.truth : SourceDirection(t.full.theta_deg, t.full.phi_deg);
        return select_greedy(*array, k, dir, t.r, noise, snapshots, crb).subset;
      };
    }
  }
}

TrainConfig train_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainConfig t = cfg.train;
  t.seed = seed;
  return t;
}

}  // namespace

std::string library_version() { return ARRAYSEL_VERSION; }

std::uint64_t stream_seed(const ExperimentConfig& cfg, SeedStream stream) {
  return mix_seed({cfg.seed, static_cast<std::uint64_t>(stream)});
}

const ResultRow* ExperimentResult::find(double x, const std::string& series) const {
  for (const auto& r : rows)
    if (r.series == series && std::abs(r.x - x) <= 1e-12 * std::max(1.0, std::abs(x))) return &r;
  return nullptr;
}

void ExperimentResult::write_csv(std::ostream& out) const {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
  out << "x,series,value,stderr,n,config_hash\n";
  for (const auto& r : rows)
    out << num(r.x) << ',' << r.series << ',' << num(r.value) << ',' << num(r.stderr_value) << ',' << r.n << ','
        << hash << '\n';
}

void ExperimentResult::write_meta(std::ostream& out) const {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
  out << "name=" << name << '\n'
      << "x=" << x_label << '\n'
      << "metric=" << metric << '\n'
      << "config_hash=" << hash << '\n'
      << "version=" << version << '\n'
      << "wall_time_s=" << num(wall_time_s) << '\n';
  for (const auto& n : notes) out << "note=" << n << '\n';
}

void ExperimentResult::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / (name + ".csv"), std::ios::binary | std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (dir / (name + ".csv")).string());
    write_csv(csv);
  }
  std::ofstream meta(dir / (name + ".meta"), std::ios::binary | std::ios::trunc);
  if (!meta) throw IoError("cannot write " + (dir / (name + ".meta")).string());
  write_meta(meta);
}

GenerationConfig generation_config(const ExperimentConfig& cfg, Domain domain, bool two_d, std::uint64_t seed) {
  GenerationConfig g;
  const bool src = domain == Domain::source;
  g.k = src ? cfg.k_source : cfg.k_target;
  g.directions = src ? cfg.p_source : cfg.p_target;
  g.realizations = src ? cfg.l_source : cfg.l_target;
  g.snapshots = cfg.snapshots;
  g.snr_db = cfg.train_snr_db;
  g.seed = seed;
  g.elevation_deg = cfg.elevation_deg;
  g.elevation_points = two_d ? (src ? cfg.theta_points_source : cfg.theta_points_target) : 0;
  g.theta_min_deg = cfg.theta_min_deg;
  g.theta_max_deg = cfg.theta_max_deg;
  g.standardize = cfg.standardize;
  g.label_covariance = cfg.label_covariance;
  g.crb_form = cfg.crb_form;
  g.threads = cfg.threads;
  return g;
}

Dataset make_domain_dataset(const ExperimentConfig& cfg, Domain domain, bool two_d, std::uint64_t seed) {
  const SensorArray array = (domain == Domain::source ? cfg.source : cfg.target).build();
  return split_domain_dataset(cfg, generate_training_data(array, generation_config(cfg, domain, two_d, seed)), seed);
}

Dataset split_domain_dataset(const ExperimentConfig& cfg, Dataset d, std::uint64_t seed) {
  return split_dataset(std::move(d), cfg.train_fraction, mix_seed({seed, 0x5b1}));
}

NetworkModel train_domain_model(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed,
                                TrainReport* report) {
  const int classes = static_cast<int>(data.class_map.reduced_count());
  NetworkModel model = build_paper_cnn(data.sensors, classes, cfg.conv_filters, cfg.fc_units, seed);
  TrainReport r = train(model, data, train_config(cfg, mix_seed({seed, 0x7a})));
  if (report) *report = std::move(r);
  return model;
}

NetworkModel transfer_domain_model(const ExperimentConfig& cfg, const NetworkModel& source,
                                   const BestSubarraySet& source_map, const Dataset& target_data, std::uint64_t seed,
                                   TrainReport* report) {
  const auto& tmap = target_data.class_map;
  bool same_map = tmap.reduced_count() == source_map.reduced_count();
  for (std::size_t i = 0; same_map && i < tmap.classes.size(); ++i)
    same_map = tmap.classes[i].same_subset(source_map.classes[i]);
  TransferOptions opts;
  opts.reinit_head = !same_map;
  opts.seed = seed;
  NetworkModel model = make_transfer_model(source, static_cast<int>(tmap.reduced_count()), opts);
  TrainReport r = train(model, target_data, train_config(cfg, mix_seed({seed, 0x7b})));
  if (report) *report = std::move(r);
  return model;
}

SubarrayClass CnnSelector::choose(const CovarianceMatrix& r) const {
  if (class_map.classes.empty()) throw std::logic_error("selector has no classes");
  if (!model) return class_map.classes.front();
  return select_cnn(*model, r, class_map, standardize).subset;
}

CnnSelector fit_selector(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed, TrainReport* report) {
  CnnSelector s;
  s.class_map = data.class_map;
  s.standardize = cfg.standardize;
  if (data.class_map.reduced_count() < 2) {
    log_info("single-class label set; selector returns it without a network");
    if (report) *report = TrainReport{};
    return s;
  }
  s.model = train_domain_model(cfg, data, seed, report);
  return s;
}

CnnSelector transfer_selector(const ExperimentConfig& cfg, const CnnSelector& source, const Dataset& target_data,
                              std::uint64_t seed, TrainReport* report) {
  if (target_data.class_map.reduced_count() < 2 || !source.model) {
    if (!source.model) log_warning("source selector has no network to transfer; training the target from scratch");
    return fit_selector(cfg, target_data, seed, report);
  }
  if (source.model->input_shape() != Shape{3, target_data.sensors, target_data.sensors})
    throw UnsupportedConfiguration("source and target arrays must have the same element count for transfer");
  CnnSelector s;
  s.class_map = target_data.class_map;
  s.standardize = cfg.standardize;
  s.model = transfer_domain_model(cfg, *source.model, source.class_map, target_data, seed, report);
  return s;
}

std::vector<LabelledCovariance> heldout_set(const SensorArray& array, const GenerationConfig& gen, int realizations,
                                            std::uint64_t seed) {
  const auto dirs = training_directions(gen);
  const std::size_t n_snr = gen.snr_db.size();
  const auto n_l = static_cast<std::size_t>(realizations);
  const std::size_t total = dirs.size() * n_l * n_snr;
  CrbOptions crb;
  crb.form = gen.crb_form;
  crb.known_elevation = gen.elevation_points <= 0;
  std::vector<std::optional<LabelledCovariance>> slots(total);
  parallel_for(total, gen.threads, [&](std::size_t task) {
    const std::size_t s = task % n_snr;
    const std::size_t l = (task / n_snr) % n_l;
    const std::size_t p = task / (n_snr * n_l);
    const double noise = noise_power_from_snr_db(gen.snr_db[s]);
    SimulationParams sim;
    sim.snapshots = gen.snapshots;
    sim.noise_power = noise;
    sim.seed = mix_seed({seed, p, l, s});
    CovarianceMatrix r = sample_covariance(simulate_snapshots(array, dirs[p], sim));
    const auto label_cov = gen.label_covariance == LabelCovariance::asymptotic
                               ? asymptotic_covariance(steering_vector(array, dirs[p]), 1.0, noise)
                               : r;
    auto best = best_subarray(array, dirs[p], label_cov, gen.k, noise, gen.snapshots, crb);
    slots[task] = LabelledCovariance{std::move(r), std::move(best.subset)};
  });
  std::vector<LabelledCovariance> out;
  out.reserve(total);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

double heldout_accuracy(const CnnSelector& selector, const std::vector<LabelledCovariance>& set) {
  if (set.empty()) throw std::invalid_argument("held-out set is empty");
  std::size_t hits = 0;
  for (const auto& item : set) hits += selector.choose(item.r).same_subset(item.truth) ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(set.size());
}

TlPipeline build_tl_pipeline(const ExperimentConfig& cfg, bool two_d) {
  const SensorArray source_array = cfg.source.build();
  const SensorArray target_array = cfg.target.build();
  if (source_array.size() != target_array.size())
    throw UnsupportedConfiguration("transfer needs source and target arrays with the same element count");
  if (cfg.p_source * cfg.l_source < 10 * cfg.p_target * cfg.l_target)
    log_warning("source/target data ratio is below 10; transfer gains may not show");

  Dataset source_data = make_domain_dataset(cfg, Domain::source, two_d, stream_seed(cfg, SeedStream::source_data));
  Dataset target_data = make_domain_dataset(cfg, Domain::target, two_d, stream_seed(cfg, SeedStream::target_data));
  TlPipeline p{source_array, target_array, std::move(source_data), std::move(target_data), {}, {}, {}, {}, {}, {},
               {}, 0.0, 0.0};
  p.cnn_s = fit_selector(cfg, p.source_data, stream_seed(cfg, SeedStream::train_source), &p.report_s);
  p.cnn_t = fit_selector(cfg, p.target_data, stream_seed(cfg, SeedStream::train_target), &p.report_t);
  p.cnn_tr = transfer_selector(cfg, p.cnn_s, p.target_data, stream_seed(cfg, SeedStream::transfer), &p.report_tr);
  p.heldout = heldout_set(target_array, p.target_data.config, cfg.test_realizations, stream_seed(cfg, SeedStream::heldout));
  p.accuracy_t = heldout_accuracy(p.cnn_t, p.heldout);
  p.accuracy_tr = heldout_accuracy(p.cnn_tr, p.heldout);
  return p;
}

ExperimentResult run_source_domain(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  ExperimentResult res = start_result(cfg, "source_doa", "snr_db", "rmse_deg");
  const SensorArray array = cfg.source.build();
  const Dataset data = make_domain_dataset(cfg, Domain::source, false, stream_seed(cfg, SeedStream::source_data));
  TrainReport report;
  const CnnSelector cnn = fit_selector(cfg, data, stream_seed(cfg, SeedStream::train_source), &report);
  res.notes.push_back(report_note("CNN_S", report));
  res.notes.push_back("classes=" + std::to_string(data.class_map.reduced_count()) +
                      " of " + std::to_string(data.class_map.total_candidates));

  const int k = cfg.k_source;
  const SensorArray* ap = &array;
  for (std::size_t si = 0; si < cfg.test_snr_db.size(); ++si) {
    std::vector<Method> methods;
    methods.push_back({"BestExhaustive", nullptr});
    methods.push_back({"CNN_S", [&cnn](const Trial& t) { return cnn.choose(t.r); }});
    methods.push_back({"RAS", [ap, k](const Trial& t) {
                         return select_random(static_cast<int>(ap->size()), k, t.seed).subset;
                       }});
    methods.push_back({"Full", nullptr});
    bind_crb_methods(methods, cfg, ap, k, cfg.test_snr_db[si], false);
    McSetup setup{ap, k, cfg.test_snr_db[si], nullptr, false};
    monte_carlo_point(cfg, setup, methods, cfg.test_snr_db[si], mix_seed({stream_seed(cfg, SeedStream::monte_carlo), si}), res);
  }
  res.wall_time_s = seconds_since(t0);
  return res;
}

ExperimentResult run_tl_sweep(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  ExperimentResult res = start_result(cfg, "tl_sweep", "p_source", "accuracy_pct");
  const SensorArray source_array = cfg.source.build();
  const SensorArray target_array = cfg.target.build();
  if (source_array.size() != target_array.size())
    throw UnsupportedConfiguration("transfer needs source and target arrays with the same element count");

  const Dataset target_data = make_domain_dataset(cfg, Domain::target, false, stream_seed(cfg, SeedStream::target_data));
  const auto heldout =
      heldout_set(target_array, target_data.config, cfg.test_realizations, stream_seed(cfg, SeedStream::heldout));
  TrainReport rt;
  const CnnSelector cnn_t = fit_selector(cfg, target_data, stream_seed(cfg, SeedStream::train_target), &rt);
  res.notes.push_back(report_note("CNN_T", rt));
  const double acc_t = heldout_accuracy(cnn_t, heldout);

  for (int ps : cfg.sweep_p_source) {
    ExperimentConfig c = cfg;
    c.p_source = ps;
    const Dataset source_data = make_domain_dataset(c, Domain::source, false, stream_seed(cfg, SeedStream::source_data));
    TrainReport rs, rtr;
    const CnnSelector cnn_s = fit_selector(c, source_data, stream_seed(cfg, SeedStream::train_source), &rs);
    const CnnSelector cnn_tr = transfer_selector(c, cnn_s, target_data, stream_seed(cfg, SeedStream::transfer), &rtr);
    res.notes.push_back(report_note("CNN_S@" + std::to_string(ps), rs));
    res.notes.push_back(report_note("CNN_TR@" + std::to_string(ps), rtr));
    const auto source_heldout = heldout_set(source_array, source_data.config, 1, mix_seed({stream_seed(cfg, SeedStream::heldout), 1}));
    add_accuracy_row(res, ps, "CNN_S", heldout_accuracy(cnn_s, source_heldout), source_heldout.size());
    add_accuracy_row(res, ps, "CNN_T", acc_t, heldout.size());
    add_accuracy_row(res, ps, "CNN_TR", heldout_accuracy(cnn_tr, heldout), heldout.size());
  }
  res.wall_time_s = seconds_since(t0);
  return res;
}

ExperimentResult run_tl_doa(const ExperimentConfig& cfg, const TlPipeline* pipeline) {
  const auto t0 = Clock::now();
  ExperimentResult res = start_result(cfg, "tl_doa", "snr_db", "rmse_deg");
  std::optional<TlPipeline> own;
  if (!pipeline) {
    own.emplace(build_tl_pipeline(cfg, false));
    pipeline = &*own;
  }
  const TlPipeline& p = *pipeline;
  res.notes.push_back(report_note("CNN_S", p.report_s));
  res.notes.push_back(report_note("CNN_T", p.report_t));
  res.notes.push_back(report_note("CNN_TR", p.report_tr));
  res.notes.push_back("heldout_accuracy CNN_T=" + num(p.accuracy_t) + " CNN_TR=" + num(p.accuracy_tr));
  for (std::size_t si = 0; si < cfg.test_snr_db.size(); ++si) {
    auto methods = target_methods(p, cfg.k_target);
    bind_crb_methods(methods, cfg, &p.target_array, cfg.k_target, cfg.test_snr_db[si], false);
    McSetup setup{&p.target_array, cfg.k_target, cfg.test_snr_db[si], nullptr, false};
    monte_carlo_point(cfg, setup, methods, cfg.test_snr_db[si], mix_seed({stream_seed(cfg, SeedStream::monte_carlo), si}), res);
  }
  res.wall_time_s = seconds_since(t0);
  return res;
}

ExperimentResult run_perturbed_tl(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  ExperimentResult res = start_result(cfg, "perturbed_tl", "perturb_sigma", "accuracy_pct");
  const SensorArray source_array = cfg.source.build();
  const SensorArray target_nominal = cfg.target.build();
  if (source_array.size() != target_nominal.size())
    throw UnsupportedConfiguration("transfer needs source and target arrays with the same element count");

  const Dataset source_data = make_domain_dataset(cfg, Domain::source, false, stream_seed(cfg, SeedStream::source_data));
  GenerationConfig tgen = generation_config(cfg, Domain::target, false, stream_seed(cfg, SeedStream::target_data));
  tgen.perturb_sigma = cfg.perturb_sigma;
  const Dataset target_data =
      split_dataset(generate_training_data(target_nominal, tgen), cfg.train_fraction, mix_seed({tgen.seed, 0x5b1}));

  // One fixed perturbation for the whole test set.
  const SensorArray target_test =
      perturb_positions(target_nominal, cfg.perturb_sigma, stream_seed(cfg, SeedStream::fixed_perturbation));
  GenerationConfig test_gen = tgen;
  test_gen.perturb_sigma = 0.0;
  const auto heldout = heldout_set(target_test, test_gen, cfg.test_realizations, stream_seed(cfg, SeedStream::heldout));

  TrainReport rs, rt, rtr;
  const CnnSelector cnn_s = fit_selector(cfg, source_data, stream_seed(cfg, SeedStream::train_source), &rs);
  const CnnSelector cnn_t = fit_selector(cfg, target_data, stream_seed(cfg, SeedStream::train_target), &rt);
  const CnnSelector cnn_tr = transfer_selector(cfg, cnn_s, target_data, stream_seed(cfg, SeedStream::transfer), &rtr);
  res.notes.push_back(report_note("CNN_S", rs));
  res.notes.push_back(report_note("CNN_T", rt));
  res.notes.push_back(report_note("CNN_TR", rtr));
  add_accuracy_row(res, cfg.perturb_sigma, "CNN_T", heldout_accuracy(cnn_t, heldout), heldout.size());
  add_accuracy_row(res, cfg.perturb_sigma, "CNN_TR", heldout_accuracy(cnn_tr, heldout), heldout.size());
  res.wall_time_s = seconds_since(t0);
  return res;
}

ExperimentResult run_coupling_sweep(const ExperimentConfig& cfg, const TlPipeline* pipeline) {
  const auto t0 = Clock::now();
  ExperimentResult res = start_result(cfg, "coupling", "gamma", "rmse_deg");
  std::optional<TlPipeline> own;
  if (!pipeline) {
    own.emplace(build_tl_pipeline(cfg, false));
    pipeline = &*own;
  }
  const TlPipeline& p = *pipeline;
  const int m = static_cast<int>(p.target_array.size());
  for (std::size_t gi = 0; gi < cfg.gammas.size(); ++gi) {
    const CMatrix c = coupling_matrix(m, cfg.gammas[gi], cfg.coupling_seed);
    auto methods = target_methods(p, cfg.k_target);
    bind_crb_methods(methods, cfg, &p.target_array, cfg.k_target, cfg.coupling_snr_db, false);
    McSetup setup{&p.target_array, cfg.k_target, cfg.coupling_snr_db, &c, false};
    // Same trial seeds at every gamma so the sweep isolates the coupling effect.
    monte_carlo_point(cfg, setup, methods, cfg.gammas[gi], mix_seed({stream_seed(cfg, SeedStream::monte_carlo), 0xc0}), res);
  }
  res.wall_time_s = seconds_since(t0);
  return res;
}

ExperimentResult run_two_d(const ExperimentConfig& cfg, const TlPipeline* pipeline) {
  const auto t0 = Clock::now();
  ExperimentResult res = start_result(cfg, "two_d", "snr_db", "rmse_deg");
  std::optional<TlPipeline> own;
  if (!pipeline) {
    own.emplace(build_tl_pipeline(cfg, true));
    pipeline = &*own;
  }
  const TlPipeline& p = *pipeline;
  res.notes.push_back(report_note("CNN_S", p.report_s));
  res.notes.push_back(report_note("CNN_T", p.report_t));
  res.notes.push_back(report_note("CNN_TR", p.report_tr));
  res.notes.push_back("heldout_accuracy CNN_T=" + num(p.accuracy_t) + " CNN_TR=" + num(p.accuracy_tr));
  for (std::size_t si = 0; si < cfg.test_snr_db.size(); ++si) {
    auto methods = target_methods(p, cfg.k_target);
    bind_crb_methods(methods, cfg, &p.target_array, cfg.k_target, cfg.test_snr_db[si], true);
    McSetup setup{&p.target_array, cfg.k_target, cfg.test_snr_db[si], nullptr, true};
    monte_carlo_point(cfg, setup, methods, cfg.test_snr_db[si], mix_seed({stream_seed(cfg, SeedStream::monte_carlo), si}), res);
  }
  res.wall_time_s = seconds_since(t0);
  return res;
}

ExperimentResult run_scenario(const ExperimentConfig& cfg) {
  switch (cfg.scenario) {
    case Scenario::source_doa: return run_source_domain(cfg);
    case Scenario::tl_accuracy_sweep: return run_tl_sweep(cfg);
    case Scenario::tl_doa: return run_tl_doa(cfg);
    case Scenario::perturbed_tl: return run_perturbed_tl(cfg);
    case Scenario::coupling_sweep: return run_coupling_sweep(cfg);
    case Scenario::two_d: return run_two_d(cfg);
  }
  throw std::invalid_argument("unknown scenario");
}

}  // namespace arraysel
