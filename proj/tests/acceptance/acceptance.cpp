// Acceptance report: one PASS/FAIL line per criterion, then a summary line.
// Exit status is 0 once the report is complete; --strict makes any FAIL fatal.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <CLI11.hpp>

#include "arraysel/harness.hpp"
#include "arraysel/selection.hpp"

using namespace arraysel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmtd(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Complex plane_wave(const Vec3& p, double t, double f) {
  const double proj = p.x * std::sin(t) * std::cos(f) + p.y * std::sin(t) * std::sin(f) + p.z * std::cos(t);
  return std::polar(1.0, -2.0 * std::numbers::pi * proj);
}

Outcome steering_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> coord(-2.0, 2.0), theta(5.0, 175.0), phi(0.0, 359.0);
  const double h = 1e-6;
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    std::vector<Vec3> pos(8);
    for (auto& p : pos) p = {coord(rng), coord(rng), coord(rng)};
    const double t = deg2rad(theta(rng)), f = deg2rad(phi(rng));
    const auto d = steering_derivatives(pos, SourceDirection(rad2deg(t), rad2deg(f)));
    const double scale_t = std::max(d.d_theta.cwiseAbs().maxCoeff(), 1e-300);
    const double scale_f = std::max(d.d_phi.cwiseAbs().maxCoeff(), 1e-300);
    for (std::size_t m = 0; m < pos.size(); ++m) {
      const auto i = static_cast<Eigen::Index>(m);
      const Complex ft = (plane_wave(pos[m], t + h, f) - plane_wave(pos[m], t - h, f)) / (2.0 * h);
      const Complex ff = (plane_wave(pos[m], t, f + h) - plane_wave(pos[m], t, f - h)) / (2.0 * h);
      worst = std::max({worst, std::abs(d.d_theta(i) - ft) / scale_t, std::abs(d.d_phi(i) - ff) / scale_f});
    }
  }
  return {worst < 1e-6, "max relative error " + fmtd(worst, 3) + " over 100 cases"};
}

// Brute force over bitmasks with a direct 2x2 Fisher inverse for the azimuth bound.
std::vector<int> brute_force(const SensorArray& uca, const SourceDirection& dir, double noise, int k, int snapshots) {
  const int m = static_cast<int>(uca.size());
  const auto a_full = steering_vector(uca, dir);
  const auto d_full = steering_derivatives(uca, dir);
  std::vector<std::pair<double, std::vector<int>>> scored;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    if (std::popcount(mask) != k) continue;
    std::vector<int> idx;
    for (int i = 0; i < m; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    CVector a(k), dp(k);
    for (int i = 0; i < k; ++i) {
      a(i) = a_full(idx[i]);
      dp(i) = d_full.d_phi(idx[i]);
    }
    const CMatrix r = a * a.adjoint() + noise * CMatrix::Identity(k, k);
    const CMatrix p = CMatrix::Identity(k, k) - a * a.adjoint() / static_cast<double>(k);
    const double quad = (a.adjoint() * r.inverse() * a)(0, 0).real();
    const double pi_phi = (dp.adjoint() * p * dp)(0, 0).real();
    const double kappa = noise / (2.0 * snapshots * pi_phi * quad) * rad2deg(1.0) * rad2deg(1.0);
    scored.emplace_back(kappa / std::sqrt(2.0), idx);
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : scored) best = std::min(best, s.first);
  std::vector<int> winner;
  for (const auto& [v, idx] : scored)
    if (v <= best * (1.0 + kCrbTieTolerance) && (winner.empty() || idx < winner)) winner = idx;
  return winner;
}

Outcome crb_enumeration() {
  const auto uca = build_uca(8, 0.5);
  const double noise = noise_power_from_snr_db(20.0);
  CrbOptions o;
  o.known_elevation = true;
  GenerationConfig g;
  g.directions = 36;
  int agree = 0;
  std::set<std::vector<int>> winners;
  for (const auto& dir : training_directions(g)) {
    const auto r = asymptotic_covariance(steering_vector(uca, dir), 1.0, noise);
    const auto got = best_subarray(uca, dir, r, 3, noise, 100, o);
    const std::vector<int> idx(got.subset.indices().begin(), got.subset.indices().end());
    agree += idx == brute_force(uca, dir, noise, 3, 100) ? 1 : 0;
    winners.insert(idx);
  }
  const bool ok = agree == 36 && winners.size() <= 8;
  return {ok, std::to_string(agree) + "/36 directions match brute force, distinct winners " +
                  std::to_string(winners.size()) + " of 56"};
}

Outcome enumeration_counts() {
  const std::uint64_t a = binomial(16, 3), b = binomial(16, 6), c = binomial(16, 8);
  std::uint64_t walked = 0;
  for (auto it = enumerate_subarrays(16, 6).begin(); it != enumerate_subarrays(16, 6).end(); ++it) ++walked;
  const bool ok = a == 560 && b == 8008 && c == 12870 && walked == 8008;
  return {ok, "C(16,3)=" + std::to_string(a) + " C(16,6)=" + std::to_string(b) + " C(16,8)=" + std::to_string(c) +
                  " enumerated " + std::to_string(walked)};
}

Outcome gradient_checks() {
  const std::vector<std::vector<LayerSpec>> stacks{
      {LayerSpec::input(3, 3, 3), LayerSpec::conv2d(1, 3, 3), LayerSpec::relu(), LayerSpec::fully_connected(4),
       LayerSpec::relu(), LayerSpec::softmax(2), LayerSpec::classification_output(2)},
      {LayerSpec::input(4, 4, 3), LayerSpec::conv2d(2, 3, 3), LayerSpec::relu(), LayerSpec::conv2d(2, 3, 3),
       LayerSpec::relu(), LayerSpec::fully_connected(5, 0.5), LayerSpec::relu(), LayerSpec::softmax(3),
       LayerSpec::classification_output(3)},
      {LayerSpec::input(5, 5, 3), LayerSpec::conv2d(3, 3, 3), LayerSpec::relu(), LayerSpec::fully_connected(6),
       LayerSpec::relu(), LayerSpec::fully_connected(4), LayerSpec::relu(), LayerSpec::softmax(4),
       LayerSpec::classification_output(4)},
  };
  double worst = 0.0, sum_dev = 0.0;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    const auto m = NetworkModel::from_specs(stacks[i], 40 + i);
    std::vector<double> x(m.input_shape().size());
    for (auto& v : x) v = n(rng);
    worst = std::max(worst, gradient_check(m, x, static_cast<int>(i % 2)));
    const auto p = forward(m, x);
    double s = 0.0;
    for (double v : p) s += v;
    sum_dev = std::max(sum_dev, std::abs(s - 1.0));
  }
  return {worst < 1e-4 && sum_dev <= 1e-9,
          "max gradient relative error " + fmtd(worst, 3) + ", softmax sum deviation " + fmtd(sum_dev, 3)};
}

Outcome cross_entropy_value() {
  const std::vector<std::vector<double>> p{{0.5, 0.5}};
  const int y[] = {1};
  const double v = cross_entropy_loss(p, y);
  return {std::abs(v - 1.3863) <= 1e-3, "uniform two-class loss " + fmtd(v, 6)};
}

Outcome freeze_contract(const ExperimentConfig& base) {
  ExperimentConfig cfg = base;
  cfg.train.max_epochs = 2;
  const Dataset src = make_domain_dataset(cfg, Domain::source, false, stream_seed(cfg, SeedStream::source_data));
  const Dataset tgt = make_domain_dataset(cfg, Domain::target, false, stream_seed(cfg, SeedStream::target_data));
  const CnnSelector source = fit_selector(cfg, src, stream_seed(cfg, SeedStream::train_source));
  if (!source.model) return {false, "source data has a single class; nothing to transfer"};
  cfg.train.max_epochs = 5;
  cfg.train.patience = 5;
  TrainReport rep;
  const NetworkModel t = transfer_domain_model(cfg, *source.model, source.class_map, tgt,
                                               stream_seed(cfg, SeedStream::transfer), &rep);
  bool same = true;
  for (std::size_t i : {2u, 4u, 6u, 8u}) same &= layer_digest(t.layer(i)) == layer_digest(source.model->layer(i));
  const bool moved = layer_digest(t.layer(10)) != layer_digest(source.model->layer(10));
  return {same && moved && rep.epochs.size() == 5,
          "conv digests " + std::string(same ? "unchanged" : "CHANGED") + " after " +
              std::to_string(rep.epochs.size()) + " epochs; FC layer " + (moved ? "updated" : "not updated")};
}

Outcome source_training(const ExperimentConfig& base) {
  ExperimentConfig cfg = base;
  cfg.source = parse_geometry_spec("uca:8");
  cfg.k_source = 3;
  cfg.p_source = 36;
  cfg.l_source = 50;
  cfg.train_snr_db = {20.0};
  const Dataset d = make_domain_dataset(cfg, Domain::source, false, stream_seed(cfg, SeedStream::source_data));
  TrainReport rep;
  const auto sel = fit_selector(cfg, d, stream_seed(cfg, SeedStream::train_source), &rep);
  return {rep.best_validation_accuracy >= 85.0,
          "validation accuracy " + fmtd(rep.best_validation_accuracy) + "% over " +
              std::to_string(sel.class_map.reduced_count()) + " classes (" + std::to_string(rep.epochs.size()) +
              " epochs, labels " + (cfg.label_covariance == LabelCovariance::sampled ? "sampled" : "asymptotic") +
              ")"};
}

struct SeedRun {
  std::uint64_t seed;
  double acc_t, acc_tr;
  double best, cnn_tr, ras;
  ExperimentResult coupling;
};

std::vector<SeedRun> tl_runs(const ExperimentConfig& base) {
  std::vector<SeedRun> runs;
  for (std::uint64_t seed : {1, 2, 3}) {
    ExperimentConfig cfg = base;
    cfg.seed = seed;
    cfg.test_snr_db = {10.0};
    cfg.trials = 100;
    cfg.gammas = {0.01, 1.0};
    const TlPipeline p = build_tl_pipeline(cfg);
    const auto doa = run_tl_doa(cfg, &p);
    SeedRun r{seed, p.accuracy_t, p.accuracy_tr, doa.find(10.0, "BestExhaustive")->value,
              doa.find(10.0, "CNN_TR")->value, doa.find(10.0, "RAS")->value, {}};
    if (seed == 1) r.coupling = run_coupling_sweep(cfg, &p);
    std::printf("  seed %llu: accuracy CNN_T=%.1f CNN_TR=%.1f | RMSE@10dB Best=%.2f CNN_TR=%.2f RAS=%.2f\n",
                static_cast<unsigned long long>(seed), r.acc_t, r.acc_tr, r.best, r.cnn_tr, r.ras);
    std::fflush(stdout);
    runs.push_back(std::move(r));
  }
  return runs;
}

Outcome tl_gain(const std::vector<SeedRun>& runs) {
  std::vector<double> gain;
  for (const auto& r : runs) gain.push_back(r.acc_tr - r.acc_t);
  const double g = median(gain);
  return {g >= 5.0, "median acc(CNN_TR) - acc(CNN_T) = " + fmtd(g) + " points (seeds: " + fmtd(gain[0]) + ", " +
                        fmtd(gain[1]) + ", " + fmtd(gain[2]) + ")"};
}

Outcome rmse_ordering(const std::vector<SeedRun>& runs) {
  std::vector<double> lo, hi;
  for (const auto& r : runs) {
    lo.push_back(r.cnn_tr - r.best);
    hi.push_back(r.ras - r.cnn_tr);
  }
  const double a = median(lo), b = median(hi);
  return {a >= 0.0 && b >= 0.0, "median RMSE gaps at 10 dB: CNN_TR - Best = " + fmtd(a) + " deg, RAS - CNN_TR = " +
                                    fmtd(b) + " deg"};
}

Outcome coupling_degradation(const SeedRun& run) {
  const auto model = make_coupling_model(16, 1.0, 7);
  const double c2 = std::abs(model.coefficients(1));
  const double cl = std::abs(model.coefficients(model.coefficients.size() - 1));
  bool ok = std::abs(c2 - 0.6) < 1e-12 && std::abs(cl - 0.075) < 1e-12;
  std::set<std::string> series;
  for (const auto& row : run.coupling.rows) series.insert(row.series);
  std::string worse;
  for (const auto& s : series) {
    const auto* a = run.coupling.find(0.01, s);
    const auto* b = run.coupling.find(1.0, s);
    const bool degrades = a && b && b->value > a->value;
    ok &= degrades;
    worse += " " + s + (degrades ? "+" : "-");
  }
  return {ok && !series.empty(), "|c2|=" + fmtd(c2) + " |cL|=" + fmtd(cl) + "; RMSE(1) > RMSE(0.01):" + worse};
}

Outcome complexity() {
  const auto f = flop_estimate(build_paper_cnn(16, 11, 256, 512));
  return {f.conv_ops_uniform_width == 603979776ull,
          "uniform-width conv term " + std::to_string(f.conv_ops_uniform_width) + ", exact conv sum " +
              std::to_string(f.conv_ops) + ", fc " + std::to_string(f.fc_ops)};
}

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome reproducibility(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return {false, "no --cli path given"};
  fs::remove_all(work / "repro");
  fs::create_directories(work / "repro");
  const fs::path cfg = work / "repro" / "tiny.cfg";
  std::ofstream(cfg) << "source=ura:2x3\ntarget=uca:6\nk_source=2\nk_target=2\np_source=8\nl_source=4\n"
                        "p_target=4\nl_target=3\nsnapshots=30\ntest_snr=0,20\nsweep_p_source=4,8\n"
                        "gammas=0.01,1\ntrials=10\ntest_realizations=2\ntheta_points_source=2\n"
                        "theta_points_target=2\nconv_filters=4\nfc_units=8\nmax_epochs=3\nbatch_size=8\n";
  const std::vector<std::pair<std::string, std::string>> scenarios{
      {"source-doa", "source_doa"}, {"tl-sweep", "tl_sweep"},   {"tl-doa", "tl_doa"},
      {"perturbed-tl", "perturbed_tl"}, {"coupling", "coupling"}, {"two-d", "two_d"}};
  int same = 0;
  std::string diffs;
  for (const auto& [scenario, file] : scenarios) {
    std::string bytes[2];
    bool ran = true;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = work / "repro" / (scenario + "_" + std::to_string(rep));
      ran &= run_cli(cli, "--log quiet --seed 11 --config " + cfg.string() + " --out " + out.string() +
                              " reproduce " + scenario) == 0;
      bytes[rep] = slurp(out / (file + ".csv"));
    }
    if (ran && !bytes[0].empty() && bytes[0] == bytes[1]) ++same;
    else diffs += " " + scenario;
  }
  return {same == static_cast<int>(scenarios.size()),
          std::to_string(same) + "/" + std::to_string(scenarios.size()) + " scenarios byte-identical" +
              (diffs.empty() ? "" : "; differing:" + diffs)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"arraysel acceptance report"};
  std::string cli;
  std::string work = "acceptance_work";
  bool strict = false;
  app.add_option("--cli", cli, "path to the arraysel executable");
  app.add_option("--work", work, "scratch directory");
  app.add_flag("--strict", strict, "non-zero exit status when any criterion fails");
  CLI11_PARSE(app, argc, argv);
  set_log_level("quiet");

  ExperimentConfig base = default_config(Scenario::tl_doa, Scale::desk);
  base.threads = 0;

  int passed = 0, index = 0;
  auto report = [&](const std::string& title, const std::function<Outcome()>& fn) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    passed += o.pass ? 1 : 0;
    std::printf("criterion %2d: %s  %s -- %s [%.1fs]\n", index, o.pass ? "PASS" : "FAIL", title.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report("steering derivatives vs finite differences", steering_oracle);
  report("exhaustive CRB labels vs brute force (UCA 8, K 3)", crb_enumeration);
  report("subset enumeration counts", enumeration_counts);
  report("network gradient check", gradient_checks);
  report("cross-entropy of a uniform prediction", cross_entropy_value);
  report("frozen convolutions survive fine-tuning", [&] { return freeze_contract(base); });
  report("source-domain validation accuracy >= 85%", [&] { return source_training(base); });

  std::vector<SeedRun> runs;
  std::string tl_error;
  try {
    runs = tl_runs(base);
  } catch (const std::exception& e) {
    tl_error = e.what();
  }
  auto need_runs = [&](const std::function<Outcome()>& fn) {
    return [&, fn] { return runs.size() == 3 ? fn() : Outcome{false, "pipeline failed: " + tl_error}; };
  };
  report("transfer-learning accuracy gain >= 5 points", need_runs([&] { return tl_gain(runs); }));
  report("RMSE ordering Best <= CNN_TR <= RAS at 10 dB", need_runs([&] { return rmse_ordering(runs); }));
  report("mutual coupling degrades every selector", need_runs([&] { return coupling_degradation(runs.front()); }));
  report("convolution complexity term", complexity);
  report("CLI scenarios reproduce byte-for-byte", [&] { return reproducibility(cli, work); });

  std::printf("acceptance summary: %d/12 PASS\n", passed);
  return strict && passed != 12 ? 1 : 0;
}
