#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "arraysel/harness.hpp"

using namespace arraysel;

namespace {

ExperimentConfig tiny(Scenario s) {
  auto c = default_config(s, Scale::desk);
  c.source = parse_geometry_spec("ura:2x3");
  c.target = parse_geometry_spec("uca:6");
  c.k_source = 2;
  c.k_target = 2;
  c.p_source = 8;
  c.l_source = 4;
  c.p_target = 4;
  c.l_target = 3;
  c.snapshots = 30;
  c.test_snr_db = {0.0, 20.0};
  c.sweep_p_source = {4, 8};
  c.gammas = {0.01, 1.0};
  c.trials = 8;
  c.test_realizations = 2;
  c.conv_filters = 4;
  c.fc_units = 8;
  c.train.max_epochs = 3;
  c.train.batch_size = 8;
  c.threads = 1;
  return c;
}

std::set<std::string> series(const ExperimentResult& r) {
  std::set<std::string> s;
  for (const auto& row : r.rows) s.insert(row.series);
  return s;
}

}  // namespace

TEST(Pipeline, TargetOnlyAccuracyIsFlatAcrossSourceSweep) {
  const auto r = run_tl_sweep(tiny(Scenario::tl_accuracy_sweep));
  const auto* a = r.find(4, "CNN_T");
  const auto* b = r.find(8, "CNN_T");
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->value, b->value);
  EXPECT_TRUE(r.find(8, "CNN_TR"));
  EXPECT_TRUE(r.find(8, "CNN_S"));
}

TEST(Pipeline, FullSizeSubsetMakesSelectorsAgree) {
  auto c = tiny(Scenario::tl_doa);
  c.k_target = 6;
  const auto r = run_tl_doa(c);
  EXPECT_EQ(series(r), (std::set<std::string>{"BestExhaustive", "CNN_TR", "CNN_T", "GAS", "RAS", "Full"}));
  for (double snr : c.test_snr_db) {
    const double full = r.find(snr, "Full")->value;
    for (const auto& s : series(r)) EXPECT_DOUBLE_EQ(r.find(snr, s)->value, full) << s << " at " << snr;
  }
}

TEST(Pipeline, SourceScenarioFullArrayLeads) {
  auto c = tiny(Scenario::source_doa);
  c.source = parse_geometry_spec("uca:6");
  c.trials = 30;
  const auto r = run_source_domain(c);
  EXPECT_EQ(series(r), (std::set<std::string>{"BestExhaustive", "CNN_S", "RAS", "Full"}));
  const double full = r.find(20.0, "Full")->value;
  EXPECT_LE(full, r.find(20.0, "BestExhaustive")->value);
  EXPECT_EQ(r.find(20.0, "Full")->n, 30);
}

TEST(Pipeline, WeakCouplingMatchesUncoupledWithinNoise) {
  auto c = tiny(Scenario::coupling_sweep);
  c.trials = 60;
  c.gammas = {0.01};
  c.coupling_snr_db = 20.0;
  c.test_snr_db = {20.0};
  const auto p = build_tl_pipeline(c);
  const auto coupled = run_coupling_sweep(c, &p);
  const auto plain = run_tl_doa(c, &p);
  const auto* a = coupled.find(0.01, "Full");
  const auto* b = plain.find(20.0, "Full");
  ASSERT_TRUE(a && b);
  EXPECT_LE(std::abs(a->value - b->value), 3.0 * std::hypot(a->stderr_value, b->stderr_value) + 0.05);
}

TEST(Pipeline, TwoDimensionalWithDifferentSubsetSizes) {
  auto c = tiny(Scenario::two_d);
  c.k_source = 2;
  c.k_target = 3;
  c.theta_points_source = 2;
  c.theta_points_target = 2;
  c.snapshots = 10;
  const auto p = build_tl_pipeline(c, true);
  EXPECT_EQ(p.cnn_tr.class_map.subset_size(), 3);
  EXPECT_EQ(p.cnn_s.class_map.subset_size(), 2);
  const auto r = run_two_d(c, &p);
  EXPECT_TRUE(r.find(20.0, "CNN_TR"));
  for (const auto& row : r.rows) EXPECT_TRUE(std::isfinite(row.value)) << row.series;
}
