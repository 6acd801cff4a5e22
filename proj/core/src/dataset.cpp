#include "arraysel/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

#include "binary_io.hpp"

namespace arraysel {

InputTensor::InputTensor(int side) : side_(side), values_(static_cast<std::size_t>(3 * side * side), 0.0) {
  if (side < 1) throw std::invalid_argument("tensor side must be positive");
}

InputTensor::InputTensor(int side, std::vector<double> values) : side_(side), values_(std::move(values)) {
  if (side < 1 || values_.size() != static_cast<std::size_t>(3 * side * side))
    throw std::invalid_argument("tensor data does not match 3 x side x side");
}

InputTensor build_input_tensor(const CovarianceMatrix& r) {
  const int m = static_cast<int>(r.size());
  InputTensor x(m);
  const CMatrix& c = r.matrix();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double re = c(i, j).real();
      const double im = c(i, j).imag();
      x.at(0, i, j) = re;
      x.at(1, i, j) = im;
      double phase = std::atan2(im, re);
      if (phase <= -kPi) phase = kPi;  // keep the half-open range (-pi, pi]
      x.at(2, i, j) = phase;
    }
  }
  return x;
}

void standardize_channels(std::span<double> values, int side) {
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  if (values.size() % plane != 0) throw std::invalid_argument("tensor size is not a multiple of the channel plane");
  for (std::size_t off = 0; off < values.size(); off += plane) {
    auto ch = values.subspan(off, plane);
    const double mean = std::accumulate(ch.begin(), ch.end(), 0.0) / static_cast<double>(plane);
    double var = 0.0;
    for (double v : ch) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(plane));
    for (double& v : ch) v = sd > 1e-300 ? (v - mean) / sd : v - mean;
  }
}

std::vector<SourceDirection> training_directions(const GenerationConfig& config) {
  if (config.directions < 1) throw std::invalid_argument("direction count must be >= 1");
  std::vector<double> azimuths(static_cast<std::size_t>(config.directions));
  for (int p = 0; p < config.directions; ++p)
    azimuths[static_cast<std::size_t>(p)] = config.directions == 1 ? 0.0 : 359.0 * p / (config.directions - 1);
  std::vector<SourceDirection> dirs;
  if (config.elevation_points <= 0) {
    for (double phi : azimuths) dirs.emplace_back(config.elevation_deg, phi);
    return dirs;
  }
  const double span = config.theta_max_deg - config.theta_min_deg;
  if (!(span > 0.0)) throw std::invalid_argument("elevation sector must have positive width");
  for (int e = 0; e < config.elevation_points; ++e) {
    const double theta = config.theta_min_deg + span * (e + 0.5) / config.elevation_points;
    for (double phi : azimuths) dirs.emplace_back(theta, phi);
  }
  return dirs;
}

std::vector<std::size_t> Dataset::indices(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == which) out.push_back(i);
  return out;
}

Dataset generate_training_data(const SensorArray& array, const GenerationConfig& config) {
  const auto dirs = training_directions(config);
  if (config.realizations < 1 || config.snr_db.empty() || config.snapshots < 1)
    throw std::invalid_argument("generation needs P*L*|SNR| >= 1 and T >= 1");
  const int m = static_cast<int>(array.size());
  if (config.k < 2 || config.k > m) throw std::invalid_argument("subarray size must satisfy 2 <= K <= M");
  if (array.kind() == ArrayKind::ura && config.k < min_sensors_for_retrieval(array.rows(), array.cols()))
    log_warning("K = " + std::to_string(config.k) + " is below the unique-retrieval count " +
                std::to_string(min_sensors_for_retrieval(array.rows(), array.cols())) + " for this URA");

  CrbOptions crb;
  crb.form = config.crb_form;
  crb.known_elevation = config.elevation_points <= 0;

  const std::size_t n_snr = config.snr_db.size();
  const std::size_t n_l = static_cast<std::size_t>(config.realizations);
  const std::size_t total = dirs.size() * n_l * n_snr;
  struct Pending {
    std::vector<float> input;
    std::vector<int> winner;
    SampleMeta meta;
  };
  std::vector<Pending> pending(total);

  parallel_for(total, config.threads, [&](std::size_t task) {
    const std::size_t s = task % n_snr;
    const std::size_t l = (task / n_snr) % n_l;
    const std::size_t p = task / (n_snr * n_l);
    const SensorArray instance = config.perturb_sigma > 0.0
                                     ? perturb_positions(array, config.perturb_sigma, mix_seed({config.seed, p, l, 0x9e0ULL}))
                                     : array;
    const double noise = noise_power_from_snr_db(config.snr_db[s]);
    SimulationParams sim;
    sim.snapshots = config.snapshots;
    sim.noise_power = noise;
    sim.seed = mix_seed({config.seed, p, l, s});
    const auto r = sample_covariance(simulate_snapshots(instance, dirs[p], sim));
    const auto label_cov = config.label_covariance == LabelCovariance::asymptotic
                               ? asymptotic_covariance(steering_vector(instance, dirs[p]), 1.0, noise)
                               : r;
    const auto best = best_subarray(instance, dirs[p], label_cov, config.k, noise, config.snapshots, crb);

    InputTensor x = build_input_tensor(r);
    if (config.standardize) standardize_channels(x.values(), m);
    Pending& out = pending[task];
    out.input.assign(x.values().begin(), x.values().end());
    out.winner.assign(best.subset.indices().begin(), best.subset.indices().end());
    out.meta = {static_cast<float>(dirs[p].theta_deg()), static_cast<float>(dirs[p].phi_deg()),
                static_cast<float>(config.snr_db[s]), static_cast<std::uint32_t>(l)};
  });

  Dataset d;
  d.sensors = m;
  d.config = config;
  std::vector<std::vector<int>> winners;
  winners.reserve(total);
  for (const auto& p : pending) winners.push_back(p.winner);
  d.class_map = BestSubarraySet::from_winners(std::move(winners), m, config.k);
  if (d.class_map.classes.empty()) throw LabelingFailed("no labeled samples were produced");
  d.samples.reserve(total);
  for (auto& p : pending) {
    TrainingSample sample;
    sample.input = std::move(p.input);
    sample.label = static_cast<std::uint32_t>(*d.class_map.find(p.winner));
    sample.meta = p.meta;
    d.samples.push_back(std::move(sample));
  }
  return d;
}

Dataset split_dataset(Dataset d, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train fraction must lie in (0, 1)");
  const std::size_t n = d.samples.size();
  d.split.assign(n, Split::validation);
  if (n == 0) return d;
  std::mt19937_64 rng(seed);

  std::map<std::uint32_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[d.samples[i].label].push_back(i);
  const bool stratify = std::all_of(by_class.begin(), by_class.end(), [](const auto& kv) { return kv.second.size() >= 2; });
  const auto target_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));

  if (!stratify) {
    log_warning("some class has fewer than 2 samples; using an unstratified split");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < target_train; ++i) d.split[order[i]] = Split::train;
    return d;
  }

  // Largest-remainder allocation keeps each class within one sample of the
  // ratio while the total matches round(fraction * n).
  struct Quota {
    std::uint32_t label;
    std::size_t take;
    double remainder;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (const auto& [label, members] : by_class) {
    const double exact = train_fraction * static_cast<double>(members.size());
    const auto base = static_cast<std::size_t>(std::floor(exact));
    quotas.push_back({label, base, exact - static_cast<double>(base)});
    assigned += base;
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return quotas[a].remainder > quotas[b].remainder; });
  for (std::size_t i = 0; assigned < target_train && i < order.size(); ++i, ++assigned) ++quotas[order[i]].take;

  for (const auto& q : quotas) {
    auto members = by_class[q.label];
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < q.take; ++i) d.split[members[i]] = Split::train;
  }
  return d;
}

namespace {
constexpr char kDatasetMagic[5] = "SALD";
constexpr std::uint16_t kDatasetVersion = 1;
}  // namespace

void write_dataset(std::ostream& out, const Dataset& d) {
  using detail::write_le;
  out.write(kDatasetMagic, 4);
  write_le<std::uint16_t>(out, kDatasetVersion);
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(d.sensors));
  write_le<std::uint16_t>(out, 3);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.samples.size()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.class_map.reduced_count()));
  for (const auto& c : d.class_map.classes) {
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(c.size()));
    for (int i : c.indices()) write_le<std::uint16_t>(out, static_cast<std::uint16_t>(i));
  }
  const std::size_t tensor = static_cast<std::size_t>(3 * d.sensors * d.sensors);
  for (const auto& s : d.samples) {
    if (s.input.size() != tensor) throw std::invalid_argument("sample tensor size does not match the dataset");
    for (float v : s.input) write_le<float>(out, v);
    write_le<std::uint32_t>(out, s.label);
    write_le<float>(out, s.meta.theta_deg);
    write_le<float>(out, s.meta.phi_deg);
    write_le<float>(out, s.meta.snr_db);
    write_le<std::uint32_t>(out, s.meta.realization);
  }
  if (!out) throw IoError("failed to write dataset");
}

Dataset read_dataset(std::istream& in) {
  using detail::read_le;
  detail::expect_magic(in, kDatasetMagic);
  const auto version = read_le<std::uint16_t>(in, "version");
  if (version != kDatasetVersion) throw FormatError("unsupported dataset version " + std::to_string(version));
  Dataset d;
  d.sensors = read_le<std::uint16_t>(in, "element count");
  const auto channels = read_le<std::uint16_t>(in, "channel count");
  if (channels != 3) throw FormatError("dataset must have 3 channels");
  if (d.sensors < 2) throw FormatError("dataset element count must be >= 2");
  const auto count = read_le<std::uint32_t>(in, "sample count");
  const auto classes = read_le<std::uint32_t>(in, "class count");
  std::vector<std::vector<int>> subsets;
  for (std::uint32_t c = 0; c < classes; ++c) {
    const auto k = read_le<std::uint16_t>(in, "class size");
    std::vector<int> idx(k);
    for (auto& i : idx) i = read_le<std::uint16_t>(in, "class index");
    subsets.push_back(std::move(idx));
  }
  for (std::uint32_t c = 0; c < classes; ++c) {
    if (c > 0 && subsets[c].size() != subsets[0].size()) throw FormatError("class map mixes subset sizes");
    d.class_map.classes.emplace_back(subsets[c], static_cast<int>(c), static_cast<std::size_t>(d.sensors));
  }
  d.class_map.total_candidates = classes > 0 ? binomial(d.sensors, d.class_map.subset_size()) : 0;
  d.config.k = d.class_map.subset_size();

  const std::size_t tensor = static_cast<std::size_t>(3 * d.sensors * d.sensors);
  d.samples.resize(count);
  for (auto& s : d.samples) {
    s.input.resize(tensor);
    for (auto& v : s.input) v = read_le<float>(in, "sample tensor");
    s.label = read_le<std::uint32_t>(in, "label");
    if (s.label >= classes) throw FormatError("sample label exceeds the class count");
    s.meta.theta_deg = read_le<float>(in, "theta");
    s.meta.phi_deg = read_le<float>(in, "phi");
    s.meta.snr_db = read_le<float>(in, "snr");
    s.meta.realization = read_le<std::uint32_t>(in, "realization");
  }
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset(out, d);
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  return read_dataset(in);
}

}  // namespace arraysel
