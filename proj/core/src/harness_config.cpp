#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "arraysel/harness.hpp"

namespace arraysel {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += f(v[i]);
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw std::invalid_argument("empty list value");
  return out;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& key) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) out.push_back(parse_double(s, key));
  return out;
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  throw std::invalid_argument("invalid boolean for " + key + ": " + text);
}

int parse_count(const std::string& text, const std::string& key, int min_value = 1) {
  const long long v = parse_int(text, key);
  if (v < min_value || v > 1'000'000'000) throw std::invalid_argument(key + " out of range: " + text);
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& text, const std::string& key) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(text, &used, 0);
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid unsigned value for " + key + ": " + text);
  }
  if (used != text.size()) throw std::invalid_argument("invalid unsigned value for " + key + ": " + text);
  return v;
}

struct KeyInfo {
  const char* name;
  const char* help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
  bool affects_results = true;
};

const std::vector<KeyInfo>& keys() {
  static const std::vector<KeyInfo> table = {
      {"scenario", "source-doa | tl-sweep | tl-doa | perturbed-tl | coupling | two-d",
       [](auto& c, auto& v) { c.scenario = parse_scenario(v); }, [](auto& c) { return to_string(c.scenario); }},
      {"scale", "desk | paper (label only; defaults are applied by the CLI)",
       [](auto& c, auto& v) { c.scale = parse_scale(v); }, [](auto& c) { return to_string(c.scale); }},
      {"source", "source geometry: ura:<m1>x<m2>[@spacing] | uca:<m>[@spacing] | file:<path>",
       [](auto& c, auto& v) { c.source = parse_geometry_spec(v); }, [](auto& c) { return c.source.describe(); }},
      {"target", "target geometry, same syntax as source",
       [](auto& c, auto& v) { c.target = parse_geometry_spec(v); }, [](auto& c) { return c.target.describe(); }},
      {"k_source", "subarray size in the source domain",
       [](auto& c, auto& v) { c.k_source = parse_count(v, "k_source", 2); },
       [](auto& c) { return std::to_string(c.k_source); }},
      {"k_target", "subarray size in the target domain",
       [](auto& c, auto& v) { c.k_target = parse_count(v, "k_target", 2); },
       [](auto& c) { return std::to_string(c.k_target); }},
      {"p_source", "source training azimuths", [](auto& c, auto& v) { c.p_source = parse_count(v, "p_source"); },
       [](auto& c) { return std::to_string(c.p_source); }},
      {"l_source", "source noise realizations per direction",
       [](auto& c, auto& v) { c.l_source = parse_count(v, "l_source"); },
       [](auto& c) { return std::to_string(c.l_source); }},
      {"p_target", "target training azimuths", [](auto& c, auto& v) { c.p_target = parse_count(v, "p_target"); },
       [](auto& c) { return std::to_string(c.p_target); }},
      {"l_target", "target noise realizations per direction",
       [](auto& c, auto& v) { c.l_target = parse_count(v, "l_target"); },
       [](auto& c) { return std::to_string(c.l_target); }},
      {"snapshots", "snapshots T per covariance", [](auto& c, auto& v) { c.snapshots = parse_count(v, "snapshots"); },
       [](auto& c) { return std::to_string(c.snapshots); }},
      {"train_snr", "comma list of training SNRs (dB)",
       [](auto& c, auto& v) { c.train_snr_db = parse_doubles(v, "train_snr"); },
       [](auto& c) { return join(c.train_snr_db, fmt_double); }},
      {"test_snr", "comma list of test SNRs (dB)",
       [](auto& c, auto& v) { c.test_snr_db = parse_doubles(v, "test_snr"); },
       [](auto& c) { return join(c.test_snr_db, fmt_double); }},
      {"sweep_p_source", "comma list of source azimuth counts for the TL sweep",
       [](auto& c, auto& v) {
         c.sweep_p_source.clear();
         for (const auto& s : split_list(v)) c.sweep_p_source.push_back(parse_count(s, "sweep_p_source"));
       },
       [](auto& c) { return join(c.sweep_p_source, [](int x) { return std::to_string(x); }); }},
      {"gammas", "comma list of coupling strengths in [0, 1]",
       [](auto& c, auto& v) { c.gammas = parse_doubles(v, "gammas"); },
       [](auto& c) { return join(c.gammas, fmt_double); }},
      {"coupling_snr", "test SNR (dB) for the coupling sweep",
       [](auto& c, auto& v) { c.coupling_snr_db = parse_double(v, "coupling_snr"); },
       [](auto& c) { return fmt_double(c.coupling_snr_db); }},
      {"coupling_seed", "phase seed of the coupling coefficients",
       [](auto& c, auto& v) { c.coupling_seed = parse_u64(v, "coupling_seed"); },
       [](auto& c) { return std::to_string(c.coupling_seed); }},
      {"trials", "Monte Carlo trials per sweep point", [](auto& c, auto& v) { c.trials = parse_count(v, "trials"); },
       [](auto& c) { return std::to_string(c.trials); }},
      {"test_realizations", "held-out realizations per target direction",
       [](auto& c, auto& v) { c.test_realizations = parse_count(v, "test_realizations"); },
       [](auto& c) { return std::to_string(c.test_realizations); }},
      {"seed", "master seed", [](auto& c, auto& v) { c.seed = parse_u64(v, "seed"); },
       [](auto& c) { return std::to_string(c.seed); }},
      {"crb_form", "self | paper", [](auto& c, auto& v) { c.crb_form = parse_crb_form(v); },
       [](auto& c) { return to_string(c.crb_form); }},
      {"label_covariance", "sampled | asymptotic",
       [](auto& c, auto& v) {
         if (v == "sampled") c.label_covariance = LabelCovariance::sampled;
         else if (v == "asymptotic") c.label_covariance = LabelCovariance::asymptotic;
         else throw std::invalid_argument("label_covariance must be sampled or asymptotic");
       },
       [](auto& c) { return std::string(c.label_covariance == LabelCovariance::sampled ? "sampled" : "asymptotic"); }},
      {"standardize", "per-channel input standardization (true/false)",
       [](auto& c, auto& v) { c.standardize = parse_bool(v, "standardize"); },
       [](auto& c) { return std::string(c.standardize ? "true" : "false"); }},
      {"train_fraction", "training share of each dataset",
       [](auto& c, auto& v) { c.train_fraction = parse_double(v, "train_fraction"); },
       [](auto& c) { return fmt_double(c.train_fraction); }},
      {"perturb_sigma", "position perturbation std-dev (wavelengths) for perturbed-tl",
       [](auto& c, auto& v) { c.perturb_sigma = parse_double(v, "perturb_sigma"); },
       [](auto& c) { return fmt_double(c.perturb_sigma); }},
      {"gas_true_direction", "greedy selector sees the true direction instead of a MUSIC estimate",
       [](auto& c, auto& v) { c.gas_true_direction = parse_bool(v, "gas_true_direction"); },
       [](auto& c) { return std::string(c.gas_true_direction ? "true" : "false"); }},
      {"elevation", "fixed elevation (deg) of 1-D scenarios",
       [](auto& c, auto& v) { c.elevation_deg = parse_double(v, "elevation"); },
       [](auto& c) { return fmt_double(c.elevation_deg); }},
      {"theta_min", "lower elevation (deg) of the 2-D sector",
       [](auto& c, auto& v) { c.theta_min_deg = parse_double(v, "theta_min"); },
       [](auto& c) { return fmt_double(c.theta_min_deg); }},
      {"theta_max", "upper elevation (deg) of the 2-D sector",
       [](auto& c, auto& v) { c.theta_max_deg = parse_double(v, "theta_max"); },
       [](auto& c) { return fmt_double(c.theta_max_deg); }},
      {"theta_points_source", "elevation cells in 2-D source data",
       [](auto& c, auto& v) { c.theta_points_source = parse_count(v, "theta_points_source"); },
       [](auto& c) { return std::to_string(c.theta_points_source); }},
      {"theta_points_target", "elevation cells in 2-D target data",
       [](auto& c, auto& v) { c.theta_points_target = parse_count(v, "theta_points_target"); },
       [](auto& c) { return std::to_string(c.theta_points_target); }},
      {"phi_step_1d", "azimuth scan step (deg) for 1-D MUSIC",
       [](auto& c, auto& v) { c.phi_step_1d = parse_double(v, "phi_step_1d"); },
       [](auto& c) { return fmt_double(c.phi_step_1d); }},
      {"phi_step_2d", "azimuth scan step (deg) for 2-D MUSIC",
       [](auto& c, auto& v) { c.phi_step_2d = parse_double(v, "phi_step_2d"); },
       [](auto& c) { return fmt_double(c.phi_step_2d); }},
      {"theta_step_2d", "elevation scan step (deg) for 2-D MUSIC",
       [](auto& c, auto& v) { c.theta_step_2d = parse_double(v, "theta_step_2d"); },
       [](auto& c) { return fmt_double(c.theta_step_2d); }},
      {"conv_filters", "filters per convolution layer",
       [](auto& c, auto& v) { c.conv_filters = parse_count(v, "conv_filters"); },
       [](auto& c) { return std::to_string(c.conv_filters); }},
      {"fc_units", "units per fully connected layer", [](auto& c, auto& v) { c.fc_units = parse_count(v, "fc_units"); },
       [](auto& c) { return std::to_string(c.fc_units); }},
      {"learning_rate", "initial SGD step",
       [](auto& c, auto& v) { c.train.learning_rate = parse_double(v, "learning_rate"); },
       [](auto& c) { return fmt_double(c.train.learning_rate); }},
      {"momentum", "SGD momentum", [](auto& c, auto& v) { c.train.momentum = parse_double(v, "momentum"); },
       [](auto& c) { return fmt_double(c.train.momentum); }},
      {"batch_size", "mini-batch size", [](auto& c, auto& v) { c.train.batch_size = parse_count(v, "batch_size"); },
       [](auto& c) { return std::to_string(c.train.batch_size); }},
      {"lr_decay", "learning-rate factor per decay period",
       [](auto& c, auto& v) { c.train.lr_decay = parse_double(v, "lr_decay"); },
       [](auto& c) { return fmt_double(c.train.lr_decay); }},
      {"lr_decay_every", "epochs per decay period",
       [](auto& c, auto& v) { c.train.lr_decay_every = parse_count(v, "lr_decay_every"); },
       [](auto& c) { return std::to_string(c.train.lr_decay_every); }},
      {"patience", "epochs without validation gain before stopping",
       [](auto& c, auto& v) { c.train.patience = parse_count(v, "patience"); },
       [](auto& c) { return std::to_string(c.train.patience); }},
      {"max_epochs", "epoch cap", [](auto& c, auto& v) { c.train.max_epochs = parse_count(v, "max_epochs"); },
       [](auto& c) { return std::to_string(c.train.max_epochs); }},
      {"train_threads", "training workers (results do not depend on it)",
       [](auto& c, auto& v) { c.train.threads = static_cast<unsigned>(parse_count(v, "train_threads", 0)); },
       [](auto& c) { return std::to_string(c.train.threads); }, false},
      {"threads", "data generation / Monte Carlo workers, 0 = all cores",
       [](auto& c, auto& v) { c.threads = static_cast<unsigned>(parse_count(v, "threads", 0)); },
       [](auto& c) { return std::to_string(c.threads); }, false},
  };
  return table;
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::source_doa: return "source-doa";
    case Scenario::tl_accuracy_sweep: return "tl-sweep";
    case Scenario::tl_doa: return "tl-doa";
    case Scenario::perturbed_tl: return "perturbed-tl";
    case Scenario::coupling_sweep: return "coupling";
    case Scenario::two_d: return "two-d";
  }
  return "?";
}

Scenario parse_scenario(const std::string& text) {
  for (Scenario s : {Scenario::source_doa, Scenario::tl_accuracy_sweep, Scenario::tl_doa, Scenario::perturbed_tl,
                     Scenario::coupling_sweep, Scenario::two_d})
    if (text == to_string(s)) return s;
  throw std::invalid_argument("unknown scenario: " + text);
}

Scale parse_scale(const std::string& text) {
  if (text == "desk") return Scale::desk;
  if (text == "paper") return Scale::paper;
  throw std::invalid_argument("scale must be desk or paper");
}

std::string to_string(Scale s) { return s == Scale::desk ? "desk" : "paper"; }

SensorArray GeometrySpec::build() const {
  switch (kind) {
    case ArrayKind::ura: return build_ura(m1, m2, spacing);
    case ArrayKind::uca: return build_uca(m1, spacing);
    case ArrayKind::custom: return load_geometry(file);
  }
  throw std::invalid_argument("unknown geometry kind");
}

std::string GeometrySpec::describe() const {
  const std::string sp = spacing == 0.5 ? "" : "@" + fmt_double(spacing);
  switch (kind) {
    case ArrayKind::ura: return "ura:" + std::to_string(m1) + "x" + std::to_string(m2) + sp;
    case ArrayKind::uca: return "uca:" + std::to_string(m1) + sp;
    case ArrayKind::custom: return "file:" + file;
  }
  return "?";
}

int GeometrySpec::sensors() const {
  switch (kind) {
    case ArrayKind::ura: return m1 * m2;
    case ArrayKind::uca: return m1;
    case ArrayKind::custom: return static_cast<int>(build().size());
  }
  return 0;
}

GeometrySpec parse_geometry_spec(const std::string& text) {
  GeometrySpec g;
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("geometry must look like ura:4x4, uca:16 or file:<path>");
  const std::string kind = text.substr(0, colon);
  std::string rest = text.substr(colon + 1);
  if (kind == "file") {
    if (rest.empty()) throw std::invalid_argument("file geometry needs a path");
    g.kind = ArrayKind::custom;
    g.file = rest;
    return g;
  }
  const auto at = rest.find('@');
  if (at != std::string::npos) {
    g.spacing = parse_double(rest.substr(at + 1), "geometry spacing");
    rest = rest.substr(0, at);
  }
  if (kind == "ura") {
    const auto x = rest.find('x');
    if (x == std::string::npos) throw std::invalid_argument("URA geometry needs <m1>x<m2>");
    g.kind = ArrayKind::ura;
    g.m1 = parse_count(rest.substr(0, x), "URA rows");
    g.m2 = parse_count(rest.substr(x + 1), "URA columns");
  } else if (kind == "uca") {
    g.kind = ArrayKind::uca;
    g.m1 = parse_count(rest, "UCA elements");
    g.m2 = 1;
  } else {
    throw std::invalid_argument("unknown geometry kind: " + kind);
  }
  return g;
}

ExperimentConfig default_config(Scenario scenario, Scale scale) {
  ExperimentConfig c;
  c.scenario = scenario;
  c.scale = scale;
  if (scale == Scale::paper) {
    c.source = parse_geometry_spec("ura:4x4");
    c.target = parse_geometry_spec("uca:16");
    c.k_source = c.k_target = 6;
    c.p_source = 100;
    c.l_source = 100;
    c.train_snr_db = {15.0, 20.0, 25.0};
    c.sweep_p_source = {5, 25, 50, 100, 150};
    c.conv_filters = 256;
    c.fc_units = 1024;
    c.train.batch_size = 512;
    c.train.max_epochs = 100;
    c.coupling_snr_db = 20.0;
  }
  switch (scenario) {
    case Scenario::source_doa:
      c.source = parse_geometry_spec(scale == Scale::paper ? "uca:16" : "uca:8");
      break;
    case Scenario::perturbed_tl:
      c.source = c.target;
      break;
    case Scenario::two_d:
      c.snapshots = 10;
      if (scale == Scale::paper) {
        c.k_source = 6;
        c.k_target = 8;
        c.theta_points_source = c.theta_points_target = 11;
      } else {
        c.k_target = 4;
        c.p_source = 12;
        c.p_target = 6;
      }
      break;
    default:
      break;
  }
  return c;
}

void apply_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (key == k.name) {
      k.set(cfg, value);
      return;
    }
  }
  throw std::invalid_argument("unknown config key: " + key);
}

void apply_config_text(ExperimentConfig& cfg, std::istream& in) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + " is not key=value: " + t);
    try {
      apply_config_value(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  apply_config_text(cfg, in);
}

std::string canonical_config_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += std::string(k.name) + "=" + k.get(cfg) + "\n";
  return out;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& k : keys()) {
    if (!k.affects_results) continue;
    const std::string line = std::string(k.name) + "=" + k.get(cfg) + "\n";
    for (unsigned char ch : line) h = (h ^ ch) * 0x100000001b3ULL;
  }
  return h;
}

std::string config_key_help() {
  std::string out;
  for (const auto& k : keys()) {
    std::string name = k.name;
    name.resize(std::max<std::size_t>(name.size() + 2, 22), ' ');
    out += name + k.help + "\n";
  }
  return out;
}

}  // namespace arraysel
