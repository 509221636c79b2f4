#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "simuser/error.hpp"
#include "simuser/metrics.hpp"
#include "simuser/rng.hpp"

using namespace simuser;

namespace {

// DCG of the first k entries of a 0/1 relevance vector.
double dcg(const std::vector<int>& rel, std::size_t k) {
  double s = 0;
  for (std::size_t i = 0; i < std::min(k, rel.size()); ++i) s += rel[i] / std::log2(i + 2.0);
  return s;
}

// Ideal DCG by trying every ordering of the ranked list plus the relevant
// items that were not ranked.
double brute_ndcg(const std::vector<ItemId>& ranked, const std::set<ItemId>& relevant, std::size_t k) {
  std::vector<int> rel;
  for (const auto& id : ranked) rel.push_back(relevant.count(id) ? 1 : 0);
  const std::size_t cut = std::min(k, ranked.size());
  std::vector<int> pool = rel;
  const auto ranked_relevant = std::count(rel.begin(), rel.end(), 1);
  for (std::size_t extra = ranked_relevant; extra < relevant.size(); ++extra) pool.push_back(1);
  std::sort(pool.begin(), pool.end());
  double best = 0;
  do {
    best = std::max(best, dcg(pool, cut));
  } while (std::next_permutation(pool.begin(), pool.end()));
  return best == 0 ? 0 : dcg(rel, cut) / best;
}

}  // namespace

TEST(Metrics, EngagementHandArithmetic) {
  const std::vector<AgentEngagement> one{{"a", 8, 2, 1, 2, 3}};
  const auto m = compute_metrics(one);
  EXPECT_DOUBLE_EQ(m.p_view, 0.25);
  EXPECT_DOUBLE_EQ(m.n_like, 1);
  EXPECT_DOUBLE_EQ(m.p_like, 0.5);
  EXPECT_DOUBLE_EQ(m.n_exit, 2);
  EXPECT_DOUBLE_EQ(m.s_sat, 3);

  const std::vector<AgentEngagement> two{{"a", 8, 2, 1, 2, 3}, {"b", 4, 0, 0, 5, 8}};
  const auto t = compute_metrics(two);
  EXPECT_DOUBLE_EQ(t.p_view, 0.125);
  EXPECT_DOUBLE_EQ(t.n_like, 0.5);
  EXPECT_DOUBLE_EQ(t.p_like, 0.25);
  EXPECT_DOUBLE_EQ(t.n_exit, 3.5);
  EXPECT_DOUBLE_EQ(t.s_sat, 5.5);
  EXPECT_THROW(compute_metrics({}), EmptyReportError);
}

TEST(Metrics, EngagementFromTraces) {
  const std::vector<nlohmann::json> traces{
      {{"page", 1}, {"shown", {"i1", "i2"}}, {"verdicts", {{{"item_id", "i1"}, {"rating", 5}}}}},
      {{"page", 2}, {"shown", {"i3", "i4"}}, {"verdicts", {{{"item_id", "i3"}, {"rating", 3}}}}},
      {{"page", 1}, {"shown", {"i1", "i2"}}, {"verdicts", nlohmann::json::array()}}};
  const auto a = engagement_from_traces("x", traces, {{"rating", 6}});
  EXPECT_EQ(a.shown, 4u);
  EXPECT_EQ(a.watched, 2u);
  EXPECT_EQ(a.liked, 1u);
  EXPECT_EQ(a.exit_page, 1);
  EXPECT_DOUBLE_EQ(a.satisfaction, 6);
}

TEST(Metrics, ClassificationRatios) {
  Confusion perfect;
  for (int i = 0; i < 10; ++i) perfect.add(i < 5, i < 5);
  auto m = classification_metrics(perfect);
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.f1, 1.0);

  // always positive at 1:9
  Confusion yes;
  for (int i = 0; i < 20; ++i) yes.add(i < 2, true);
  m = classification_metrics(yes);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_DOUBLE_EQ(m.precision, 0.1);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.1);
  EXPECT_DOUBLE_EQ(m.f1, 2 * 0.1 * 1.0 / 1.1);

  Confusion no;
  for (int i = 0; i < 4; ++i) no.add(i < 2, false);
  m = classification_metrics(no);
  EXPECT_DOUBLE_EQ(m.precision, 0);
  EXPECT_DOUBLE_EQ(m.f1, 0);
  EXPECT_THROW(classification_metrics({}), EmptyReportError);
}

TEST(Metrics, F1IsHarmonicMeanOnRandomConfusions) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Confusion c;
    for (int i = 0; i < 30; ++i) c.add(rng.unit() < 0.4, rng.unit() < 0.5);
    const auto m = classification_metrics(c);
    const double p = c.tp + c.fp ? double(c.tp) / (c.tp + c.fp) : 0.0;
    const double r = c.tp + c.fn ? double(c.tp) / (c.tp + c.fn) : 0.0;
    EXPECT_NEAR(m.precision, p, 1e-12);
    EXPECT_NEAR(m.recall, r, 1e-12);
    EXPECT_NEAR(m.f1, p + r > 0 ? 2 * p * r / (p + r) : 0.0, 1e-12);
    EXPECT_NEAR(m.accuracy, double(c.tp + c.tn) / 30.0, 1e-12);
  }
}

TEST(Metrics, ConstantThreeOnOneAndFive) {
  const std::vector<double> pred{3, 3, 3, 3};
  const std::vector<double> truth{1, 5, 5, 1};
  const auto m = error_metrics(pred, truth);
  // every error is 2, so the root of the mean square is 2 as well
  EXPECT_DOUBLE_EQ(m.rmse, 2.0);
  EXPECT_DOUBLE_EQ(m.mae, 2.0);
  EXPECT_THROW(error_metrics({}, {}), EmptyReportError);
  EXPECT_THROW(error_metrics(pred, std::vector<double>{1}), ValidationError);
  EXPECT_DOUBLE_EQ(error_metrics(truth, truth).rmse, 0.0);
}

TEST(Metrics, RankingEdgeCases) {
  std::vector<ItemId> ranked;
  for (int i = 0; i < 10; ++i) ranked.push_back("i" + std::to_string(i));
  const std::set<ItemId> all(ranked.begin(), ranked.end());
  auto m = ranking_metrics(ranked, all);
  EXPECT_DOUBLE_EQ(m.ndcg, 1.0);
  EXPECT_DOUBLE_EQ(m.f1, 1.0);
  EXPECT_FALSE(m.truncated);

  m = ranking_metrics(ranked, {"x1", "x2"});
  EXPECT_DOUBLE_EQ(m.ndcg, 0.0);
  EXPECT_DOUBLE_EQ(m.f1, 0.0);

  const std::vector<ItemId> short_list{"a", "b", "c"};
  m = ranking_metrics(short_list, {"b"});
  EXPECT_TRUE(m.truncated);
  EXPECT_EQ(m.k, 3u);
  EXPECT_DOUBLE_EQ(m.ndcg, 1.0 / std::log2(3.0));
}

TEST(Metrics, RankingMatchesBruteForceOracle) {
  Rng rng(13);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<ItemId> ranked;
    const std::size_t n = 4 + rng.index(9);
    for (std::size_t i = 0; i < n; ++i) ranked.push_back("i" + std::to_string(i));
    rng.shuffle(ranked);
    std::set<ItemId> relevant;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.unit() < 0.35) relevant.insert("i" + std::to_string(i));
    }
    if (rng.unit() < 0.3) relevant.insert("unranked");
    const auto m = ranking_metrics(ranked, relevant, 10);
    EXPECT_NEAR(m.ndcg, brute_ndcg(ranked, relevant, 10), 1e-9);
    const std::size_t cut = std::min<std::size_t>(10, n);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < cut; ++i) hits += relevant.count(ranked[i]);
    const double p = double(hits) / cut;
    const double r = relevant.empty() ? 0 : double(hits) / relevant.size();
    EXPECT_NEAR(m.f1, p + r > 0 ? 2 * p * r / (p + r) : 0.0, 1e-9);
  }
}

// reference values from scipy.stats.ttest_rel
TEST(Metrics, PairedTTest) {
  const std::vector<double> a{3.1, 2.4, 5.0, 4.2, 3.3, 2.9};
  const std::vector<double> b{2.0, 2.5, 4.1, 3.0, 3.4, 1.8};
  auto r = paired_t_test(a, b);
  EXPECT_NEAR(r.t, 2.723666341659426, 1e-12);
  EXPECT_NEAR(r.p_value, 0.041592830571252126, 1e-10);
  EXPECT_EQ(r.n, 6u);
  double diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] - b[i];
  EXPECT_NEAR(r.mean_difference, diff / 6, 1e-15);

  const std::vector<double> c{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const std::vector<double> d{1.5, 1.9, 3.6, 3.2, 5.9, 5.1, 7.4, 8.8, 8.1, 10.7};
  r = paired_t_test(c, d);
  EXPECT_NEAR(r.t, -0.5176775776887457, 1e-12);
  EXPECT_NEAR(r.p_value, 0.6171662531372007, 1e-10);
  // swapping the samples flips t and keeps p
  const auto s = paired_t_test(d, c);
  EXPECT_NEAR(s.t, -r.t, 1e-12);
  EXPECT_NEAR(s.p_value, r.p_value, 1e-12);

  const std::vector<double> same{2, 2, 2};
  const std::vector<double> shifted{1, 1, 1};
  EXPECT_EQ(paired_t_test(same, same).p_value, 1.0);
  EXPECT_EQ(paired_t_test(same, same).t, 0.0);
  EXPECT_TRUE(std::isinf(paired_t_test(same, shifted).t));
  EXPECT_EQ(paired_t_test(same, shifted).p_value, 0.0);
  EXPECT_EQ(to_json(paired_t_test(same, shifted)).at("t"), "inf");
  EXPECT_THROW(paired_t_test(std::vector<double>{1}, std::vector<double>{2}), ValidationError);
  EXPECT_THROW(paired_t_test(same, std::vector<double>{1, 2}), ValidationError);
}
