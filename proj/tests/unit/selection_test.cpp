#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "arraysel/selection.hpp"

using namespace arraysel;

namespace {

NetworkModel biased_head(std::vector<double> bias) {
  auto m = build_paper_cnn(3, static_cast<int>(bias.size()), 1, 2);
  for (auto& l : m.mutable_layers()) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  m.layer(14).bias = std::move(bias);
  return m;
}

CovarianceMatrix uca_covariance(int m, double phi, double noise = 0.01) {
  return asymptotic_covariance(steering_vector(build_uca(m, 0.5), SourceDirection(90.0, phi)), 1.0, noise);
}

}  // namespace

TEST(SelectCnn, ArgmaxOfScores) {
  const auto map = BestSubarraySet::from_winners({{0, 1}, {0, 2}, {1, 2}}, 3, 2);
  const auto m = biased_head({0.0, 2.0, 1.0});
  const auto out = select_cnn(m, uca_covariance(3, 20.0), map);
  EXPECT_TRUE(out.subset.same_subset(map.classes[1]));
  const double norm = 1.0 + std::exp(2.0) + std::exp(1.0);
  ASSERT_TRUE(out.score.has_value());
  EXPECT_NEAR(*out.score, std::exp(2.0) / norm, 1e-12);
  EXPECT_EQ(out.method, SelectionMethod::cnn);
}

TEST(SelectCnn, WidthMismatch) {
  const auto map = BestSubarraySet::from_winners({{0, 1}, {0, 2}}, 3, 2);
  EXPECT_THROW(select_cnn(biased_head({0.0, 1.0, 2.0}), uca_covariance(3, 0.0), map), std::invalid_argument);
}

TEST(SelectCnn, StandardizedInputIgnoresPowerScale) {
  const auto map = BestSubarraySet::from_winners({{0, 1, 2}, {0, 2, 4}, {1, 3, 5}, {2, 3, 4}}, 6, 3);
  const auto m = build_paper_cnn(6, 4, 2, 4, 31);
  const auto r = uca_covariance(6, 77.0);
  const auto a = select_cnn(m, r, map, true);
  const auto b = select_cnn(m, r.scaled(40.0), map, true);
  EXPECT_TRUE(a.subset.same_subset(b.subset));
  EXPECT_NEAR(*a.score, *b.score, 1e-9);
}

TEST(SelectGreedy, FullSizeNeedsNoEvaluations) {
  const auto uca = build_uca(6, 0.5);
  CrbOptions o;
  o.known_elevation = true;
  const auto out = select_greedy(uca, 6, SourceDirection(90, 30), uca_covariance(6, 30), 0.01, 100, o);
  EXPECT_EQ(out.crb_evaluations, 0u);
  EXPECT_EQ(out.subset.size(), 6u);
}

TEST(SelectGreedy, SingleRemovalMatchesExhaustive) {
  const auto uca = build_uca(6, 0.5);
  CrbOptions o;
  o.known_elevation = true;
  for (double phi : {0.0, 33.0, 145.0, 290.0}) {
    const auto r = uca_covariance(6, phi);
    const SourceDirection dir(90.0, phi);
    const auto g = select_greedy(uca, 5, dir, r, 0.01, 100, o);
    const auto b = select_best(uca, 5, dir, r, 0.01, 100, o);
    ASSERT_TRUE(g.score && b.score);
    EXPECT_LE(*g.score, 1.05 * *b.score) << phi;
    EXPECT_EQ(g.crb_evaluations, 6u);
  }
}

TEST(SelectGreedy, EvaluationCountBound) {
  const auto uca = build_uca(8, 0.5);
  CrbOptions o;
  o.known_elevation = true;
  const auto g = select_greedy(uca, 3, SourceDirection(90, 50), uca_covariance(8, 50), 0.01, 100, o);
  EXPECT_EQ(g.crb_evaluations, 8u + 7u + 6u + 5u + 4u);
  EXPECT_LT(g.crb_evaluations, binomial(8, 3));
  EXPECT_EQ(g.subset.size(), 3u);
}

TEST(SelectRandom, FullSetAndReproducible) {
  const auto all = select_random(5, 5, 3);
  EXPECT_EQ(std::vector<int>(all.subset.indices().begin(), all.subset.indices().end()),
            (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(select_random(9, 4, 77).subset, select_random(9, 4, 77).subset);
  EXPECT_THROW(select_random(3, 4, 1), std::invalid_argument);
}

TEST(SelectRandom, UniformOverPairs) {
  // 15 pairs of 6 sensors; each count is Binomial(n, 1/15).
  const int n = 100000;
  std::map<std::vector<int>, int> counts;
  for (int i = 0; i < n; ++i) {
    const auto s = select_random(6, 2, static_cast<std::uint64_t>(i)).subset;
    counts[std::vector<int>(s.indices().begin(), s.indices().end())]++;
  }
  ASSERT_EQ(counts.size(), 15u);
  const double p = 1.0 / 15.0;
  const double mean = n * p;
  const double sd = std::sqrt(n * p * (1.0 - p));
  for (const auto& [subset, c] : counts) EXPECT_LT(std::abs(c - mean), 3.0 * sd);
}

TEST(Accuracy, Percentages) {
  const std::vector<int> truth(10, 1);
  EXPECT_DOUBLE_EQ(selection_accuracy(truth, truth), 100.0);
  std::vector<int> pred = truth;
  pred[0] = pred[4] = pred[9] = 0;
  EXPECT_DOUBLE_EQ(selection_accuracy(pred, truth), 70.0);
  EXPECT_THROW(selection_accuracy(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
}
