// arraysel: data generation, training, transfer and evaluation driver.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "arraysel/crb.hpp"
#include "arraysel/dataset.hpp"
#include "arraysel/harness.hpp"
#include "arraysel/nn.hpp"

namespace fs = std::filesystem;
using namespace arraysel;

namespace {

struct GlobalOptions {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::string out = "results";
  std::string scale;
  std::string crb_form;
  std::vector<std::string> overrides;
  std::optional<unsigned> threads;
  std::string log_level = "info";
};

// Defaults for the scenario and scale, then the config file, then flags.
ExperimentConfig resolve_config(const GlobalOptions& g, Scenario scenario) {
  std::string file_text;
  if (!g.config_file.empty()) {
    std::ifstream in(g.config_file);
    if (!in) throw IoError("cannot read config " + g.config_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    file_text = ss.str();
  }
  Scale scale = Scale::desk;
  if (!file_text.empty()) {
    ExperimentConfig probe = default_config(scenario, Scale::desk);
    std::istringstream in(file_text);
    apply_config_text(probe, in);
    scale = probe.scale;
  }
  if (!g.scale.empty()) scale = parse_scale(g.scale);

  ExperimentConfig cfg = default_config(scenario, scale);
  if (!file_text.empty()) {
    std::istringstream in(file_text);
    apply_config_text(cfg, in);
  }
  cfg.scenario = scenario;
  cfg.scale = scale;
  if (g.seed) cfg.seed = *g.seed;
  if (!g.crb_form.empty()) apply_config_value(cfg, "crb_form", g.crb_form);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.threads) {
    cfg.threads = *g.threads;
    cfg.train.threads = *g.threads;
  }
  return cfg;
}

fs::path out_dir(const GlobalOptions& g) {
  fs::create_directories(g.out);
  return g.out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void save_config(const fs::path& dir, const ExperimentConfig& cfg) {
  write_text(dir / "config.txt", canonical_config_text(cfg));
}

void save_result(const fs::path& dir, const ExperimentResult& res) {
  res.save(dir);
  std::cout << (dir / (res.name + ".csv")).string() << '\n';
}

std::string join_indices(std::span<const int> idx) {
  std::string s;
  for (std::size_t i = 0; i < idx.size(); ++i) s += (i ? " " : "") + std::to_string(idx[i]);
  return s;
}

Domain parse_domain(const std::string& text) {
  if (text == "source") return Domain::source;
  if (text == "target") return Domain::target;
  throw std::invalid_argument("domain must be source or target");
}

// A selector on disk: <prefix>.classes always, <prefix>.sann when trained.
void save_selector(const fs::path& prefix, const CnnSelector& sel) {
  {
    std::ofstream out(prefix.string() + ".classes", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + prefix.string() + ".classes");
    write_class_map(out, sel.class_map);
  }
  if (sel.model) save_model(*sel.model, prefix.string() + ".sann");
}

CnnSelector load_selector(const fs::path& prefix, int parent_size, bool standardize) {
  CnnSelector sel;
  std::ifstream in(prefix.string() + ".classes", std::ios::binary);
  if (!in) throw IoError("missing class map " + prefix.string() + ".classes");
  sel.class_map = read_class_map(in, parent_size);
  sel.standardize = standardize;
  const fs::path model = prefix.string() + ".sann";
  if (fs::exists(model)) sel.model = load_model(model);
  return sel;
}

void write_training_csv(const fs::path& path, const TrainReport& r) {
  std::ostringstream out;
  out << "epoch,train_loss,validation_accuracy,learning_rate\n";
  char line[160];
  for (const auto& e : r.epochs) {
    std::snprintf(line, sizeof line, "%d,%.10g,%.10g,%.10g\n", e.epoch, e.train_loss, e.validation_accuracy,
                  e.learning_rate);
    out << line;
  }
  write_text(path, out.str());
}

Dataset dataset_for(const ExperimentConfig& cfg, Domain domain, bool two_d, const std::string& file) {
  const auto stream = domain == Domain::source ? SeedStream::source_data : SeedStream::target_data;
  if (!file.empty()) return split_domain_dataset(cfg, load_dataset(file), stream_seed(cfg, stream));
  return make_domain_dataset(cfg, domain, two_d, stream_seed(cfg, stream));
}

void run_train(const GlobalOptions& g, Domain domain, bool two_d, const std::string& data_file) {
  const ExperimentConfig cfg = resolve_config(g, Scenario::tl_doa);
  const fs::path dir = out_dir(g);
  const Dataset data = dataset_for(cfg, domain, two_d, data_file);
  const std::string name = domain == Domain::source ? "cnn_s" : "cnn_t";
  TrainReport report;
  const auto stream = domain == Domain::source ? SeedStream::train_source : SeedStream::train_target;
  const CnnSelector sel = fit_selector(cfg, data, stream_seed(cfg, stream), &report);
  save_selector(dir / name, sel);
  write_training_csv(dir / (name + "_training.csv"), report);
  save_config(dir, cfg);
  std::cout << name << ": classes=" << sel.class_map.reduced_count() << " best_validation="
            << report.best_validation_accuracy << " epochs=" << report.epochs.size() << '\n';
}

void run_transfer(const GlobalOptions& g, bool two_d, const std::string& source_prefix, const std::string& data_file) {
  const ExperimentConfig cfg = resolve_config(g, Scenario::tl_doa);
  const fs::path dir = out_dir(g);
  const fs::path prefix = source_prefix.empty() ? dir / "cnn_s" : fs::path(source_prefix);
  const CnnSelector source = load_selector(prefix, cfg.source.sensors(), cfg.standardize);
  const Dataset data = dataset_for(cfg, Domain::target, two_d, data_file);
  TrainReport report;
  const CnnSelector sel = transfer_selector(cfg, source, data, stream_seed(cfg, SeedStream::transfer), &report);
  save_selector(dir / "cnn_tr", sel);
  write_training_csv(dir / "cnn_tr_training.csv", report);
  save_config(dir, cfg);
  std::cout << "cnn_tr: classes=" << sel.class_map.reduced_count()
            << " best_validation=" << report.best_validation_accuracy << " epochs=" << report.epochs.size() << '\n';
}

void run_eval_selection(const GlobalOptions& g, bool two_d, const std::string& models_dir) {
  const ExperimentConfig cfg = resolve_config(g, Scenario::tl_doa);
  const fs::path dir = out_dir(g);
  const fs::path models = models_dir.empty() ? dir : fs::path(models_dir);
  ExperimentResult res;
  res.name = "selection";
  res.x_label = "domain";
  res.metric = "accuracy_pct";
  res.config_hash = config_hash(cfg);
  res.version = library_version();

  struct Entry {
    const char* name;
    Domain domain;
    double x;
  };
  const Entry entries[] = {{"cnn_s", Domain::source, 0.0}, {"cnn_t", Domain::target, 1.0},
                           {"cnn_tr", Domain::target, 1.0}};
  std::map<int, std::vector<LabelledCovariance>> sets;
  for (const auto& e : entries) {
    const fs::path prefix = models / e.name;
    if (!fs::exists(prefix.string() + ".classes")) continue;
    const GeometrySpec& spec = e.domain == Domain::source ? cfg.source : cfg.target;
    const CnnSelector sel = load_selector(prefix, spec.sensors(), cfg.standardize);
    auto& set = sets[static_cast<int>(e.domain)];
    if (set.empty()) {
      const auto stream = e.domain == Domain::source ? SeedStream::source_data : SeedStream::target_data;
      const GenerationConfig gen = generation_config(cfg, e.domain, two_d, stream_seed(cfg, stream));
      set = heldout_set(spec.build(), gen, cfg.test_realizations, stream_seed(cfg, SeedStream::heldout));
    }
    const double acc = heldout_accuracy(sel, set);
    const double p = acc / 100.0;
    res.rows.push_back({e.x, e.name, acc, 100.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(set.size())),
                        static_cast<int>(set.size())});
  }
  if (res.rows.empty()) throw IoError("no cnn_s/cnn_t/cnn_tr selectors found in " + models.string());
  save_result(dir, res);
}

void run_eval_doa(const GlobalOptions& g, const std::string& models_dir) {
  const ExperimentConfig cfg = resolve_config(g, Scenario::tl_doa);
  const fs::path dir = out_dir(g);
  if (models_dir.empty()) {
    save_result(dir, run_tl_doa(cfg));
  } else {
    const int m = cfg.target.sensors();
    TlPipeline p{cfg.source.build(), cfg.target.build(), {}, {}, {}, {}, {}, {}, {}, {}, {}, 0.0, 0.0};
    p.cnn_t = load_selector(fs::path(models_dir) / "cnn_t", m, cfg.standardize);
    p.cnn_tr = load_selector(fs::path(models_dir) / "cnn_tr", m, cfg.standardize);
    save_result(dir, run_tl_doa(cfg, &p));
  }
  save_config(dir, cfg);
}

void run_gen_data(const GlobalOptions& g, Domain domain, bool two_d) {
  const ExperimentConfig cfg = resolve_config(g, two_d ? Scenario::two_d : Scenario::tl_doa);
  const fs::path dir = out_dir(g);
  const auto stream = domain == Domain::source ? SeedStream::source_data : SeedStream::target_data;
  const Dataset d = make_domain_dataset(cfg, domain, two_d, stream_seed(cfg, stream));
  const std::string name = domain == Domain::source ? "source" : "target";
  save_dataset(d, dir / (name + ".dataset"));

  std::vector<int> counts(d.class_map.reduced_count(), 0);
  for (const auto& s : d.samples) ++counts[static_cast<std::size_t>(s.label)];
  std::ostringstream csv;
  csv << "class_id,sensors,count\n";
  for (std::size_t c = 0; c < counts.size(); ++c)
    csv << c << ',' << join_indices(d.class_map.classes[c].indices()) << ',' << counts[c] << '\n';
  write_text(dir / (name + "_classes.csv"), csv.str());
  save_config(dir, cfg);
  std::cout << name << ": samples=" << d.samples.size() << " classes=" << d.class_map.reduced_count() << " of "
            << d.class_map.total_candidates << '\n';
}

void run_reproduce(const GlobalOptions& g, Scenario scenario) {
  const ExperimentConfig cfg = resolve_config(g, scenario);
  const fs::path dir = out_dir(g);
  save_result(dir, run_scenario(cfg));
  save_config(dir, cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CRB-optimal sparse subarray selection with CNN transfer learning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", library_version());

  GlobalOptions g;
  app.add_option("--config", g.config_file, "flat key=value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "experiment seed (u64)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--scale", g.scale, "desk | paper")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--crb-form", g.crb_form, "self | paper")->check(CLI::IsMember({"self", "paper"}));
  app.add_option("--set", g.overrides, "extra key=value override (repeatable)");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)");
  app.add_option("--log", g.log_level, "quiet | warn | info")->check(CLI::IsMember({"quiet", "warn", "info"}));

  std::string domain = "source";
  bool two_d = false;
  auto* gen = app.add_subcommand("gen-data", "generate a labelled covariance dataset");
  gen->add_option("--domain", domain, "source | target")->check(CLI::IsMember({"source", "target"}));
  gen->add_flag("--two-d", two_d, "joint elevation/azimuth grid");

  std::string data_file;
  auto* train_s = app.add_subcommand("train-source", "train the source-domain selector");
  train_s->add_option("--data", data_file, "dataset written by gen-data");
  train_s->add_flag("--two-d", two_d, "joint elevation/azimuth grid");
  auto* train_t = app.add_subcommand("train-target", "train a selector on target data only");
  train_t->add_option("--data", data_file, "dataset written by gen-data");
  train_t->add_flag("--two-d", two_d, "joint elevation/azimuth grid");

  std::string source_prefix;
  auto* transfer = app.add_subcommand("transfer", "freeze convolutions of cnn_s and fine-tune on target data");
  transfer->add_option("--source-model", source_prefix, "model prefix (default <out>/cnn_s)");
  transfer->add_option("--data", data_file, "target dataset written by gen-data");
  transfer->add_flag("--two-d", two_d, "joint elevation/azimuth grid");

  std::string models_dir;
  auto* eval_sel = app.add_subcommand("eval-selection", "held-out selection accuracy of saved selectors");
  eval_sel->add_option("--models", models_dir, "directory holding cnn_s/cnn_t/cnn_tr (default --out)");
  eval_sel->add_flag("--two-d", two_d, "joint elevation/azimuth grid");

  auto* eval_doa = app.add_subcommand("eval-doa", "MUSIC RMSE versus SNR on the target array");
  eval_doa->add_option("--models", models_dir, "directory holding cnn_t and cnn_tr (trains them when omitted)");

  std::string sweep_kind;
  auto* sweep = app.add_subcommand("sweep", "parameter sweeps");
  sweep->add_option("kind", sweep_kind, "snr | coupling | tl")->required()->check(CLI::IsMember({"snr", "coupling", "tl"}));

  std::string scenario_name;
  auto* reproduce = app.add_subcommand("reproduce", "run one experiment scenario");
  reproduce->add_option("scenario", scenario_name, "source-doa | tl-sweep | tl-doa | perturbed-tl | coupling | two-d")
      ->required();

  auto* keys = app.add_subcommand("keys", "list config keys");

  CLI11_PARSE(app, argc, argv);

  try {
    set_log_level(g.log_level);
    if (gen->parsed()) {
      run_gen_data(g, parse_domain(domain), two_d);
    } else if (train_s->parsed()) {
      run_train(g, Domain::source, two_d, data_file);
    } else if (train_t->parsed()) {
      run_train(g, Domain::target, two_d, data_file);
    } else if (transfer->parsed()) {
      run_transfer(g, two_d, source_prefix, data_file);
    } else if (eval_sel->parsed()) {
      run_eval_selection(g, two_d, models_dir);
    } else if (eval_doa->parsed()) {
      run_eval_doa(g, models_dir);
    } else if (sweep->parsed()) {
      const Scenario s = sweep_kind == "snr"        ? Scenario::tl_doa
                         : sweep_kind == "coupling" ? Scenario::coupling_sweep
                                                    : Scenario::tl_accuracy_sweep;
      run_reproduce(g, s);
    } else if (reproduce->parsed()) {
      run_reproduce(g, parse_scenario(scenario_name));
    } else if (keys->parsed()) {
      std::cout << config_key_help();
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
