#include "simuser/metrics.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "simuser/error.hpp"

namespace simuser {

EngagementMetrics compute_metrics(std::span<const AgentEngagement> agents) {
  if (agents.empty()) throw EmptyReportError("no completed agents to aggregate");
  EngagementMetrics m;
  for (const auto& a : agents) {
    m.p_view += a.shown ? static_cast<double>(a.watched) / static_cast<double>(a.shown) : 0.0;
    m.n_like += static_cast<double>(a.liked);
    m.p_like += a.watched ? static_cast<double>(a.liked) / static_cast<double>(a.watched) : 0.0;
    m.n_exit += a.exit_page;
    m.s_sat += a.satisfaction;
  }
  const double n = static_cast<double>(agents.size());
  m.p_view /= n;
  m.n_like /= n;
  m.p_like /= n;
  m.n_exit /= n;
  m.s_sat /= n;
  m.agents = agents.size();
  return m;
}

AgentEngagement engagement_from_traces(const std::string& agent_id,
                                       std::span<const nlohmann::json> traces,
                                       const nlohmann::json& interview) {
  AgentEngagement a;
  a.agent_id = agent_id;
  std::set<ItemId> shown;
  std::set<ItemId> watched;
  for (const auto& t : traces) {
    for (const auto& id : t.at("shown")) shown.insert(id.get<std::string>());
    for (const auto& v : t.at("verdicts")) {
      if (watched.insert(v.at("item_id").get<std::string>()).second && v.at("rating").get<int>() > 3) ++a.liked;
    }
    a.exit_page = t.at("page").get<int>();
  }
  a.shown = shown.size();
  a.watched = watched.size();
  a.satisfaction = interview.at("rating").get<double>();
  return a;
}

void Confusion::add(bool actual, bool predicted) {
  if (actual && predicted) ++tp;
  if (!actual && predicted) ++fp;
  if (!actual && !predicted) ++tn;
  if (actual && !predicted) ++fn;
}

ClassificationMetrics classification_metrics(const Confusion& c) {
  const std::size_t n = c.tp + c.fp + c.tn + c.fn;
  if (n == 0) throw EmptyReportError("no classified items");
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
  if (c.tp + c.fp) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (m.precision + m.recall > 0) m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

ErrorMetrics error_metrics(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw ValidationError("prediction and truth lengths differ");
  if (predicted.empty()) throw EmptyReportError("no rating predictions");
  ErrorMetrics m;
  m.n = predicted.size();
  for (std::size_t i = 0; i < m.n; ++i) {
    const double e = predicted[i] - truth[i];
    m.rmse += e * e;
    m.mae += std::abs(e);
  }
  m.rmse = std::sqrt(m.rmse / static_cast<double>(m.n));
  m.mae /= static_cast<double>(m.n);
  return m;
}

RankingMetrics ranking_metrics(std::span<const ItemId> ranked, const std::set<ItemId>& relevant,
                               std::size_t k) {
  RankingMetrics m;
  m.k = std::min(k, ranked.size());
  m.truncated = ranked.size() < k;
  if (m.k == 0 || relevant.empty()) return m;
  double dcg = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < m.k; ++i) {
    if (relevant.count(ranked[i])) {
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
      ++hits;
    }
  }
  double idcg = 0;
  for (std::size_t i = 0; i < std::min(m.k, relevant.size()); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  m.ndcg = dcg / idcg;
  const double p = static_cast<double>(hits) / static_cast<double>(m.k);
  const double r = static_cast<double>(hits) / static_cast<double>(relevant.size());
  if (p + r > 0) m.f1 = 2 * p * r / (p + r);
  return m;
}

PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("paired samples differ in length");
  if (a.size() < 2) throw ValidationError("a paired t-test needs at least two pairs");
  const double n = static_cast<double>(a.size());
  double mean = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  PairedTTest r;
  r.n = a.size();
  r.mean_difference = mean;
  const double se = std::sqrt(ss / (n - 1) / n);
  if (se == 0) {
    r.t = mean == 0 ? 0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
    r.p_value = mean == 0 ? 1 : 0;
    return r;
  }
  r.t = mean / se;
  const boost::math::students_t dist(n - 1);
  r.p_value = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

nlohmann::json to_json(const EngagementMetrics& m) {
  return {{"p_view", m.p_view}, {"n_like", m.n_like}, {"p_like", m.p_like},
          {"n_exit", m.n_exit}, {"s_sat", m.s_sat},   {"agents", m.agents}};
}

nlohmann::json to_json(const AgentEngagement& a) {
  return {{"agent_id", a.agent_id}, {"shown", a.shown},         {"watched", a.watched},
          {"liked", a.liked},       {"exit_page", a.exit_page}, {"satisfaction", a.satisfaction}};
}

nlohmann::json to_json(const ClassificationMetrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

nlohmann::json to_json(const ErrorMetrics& m) { return {{"rmse", m.rmse}, {"mae", m.mae}, {"n", m.n}}; }

nlohmann::json to_json(const RankingMetrics& m) {
  return {{"ndcg", m.ndcg}, {"f1", m.f1}, {"k", m.k}, {"truncated", m.truncated}};
}

nlohmann::json to_json(const PairedTTest& t) {
  // JSON has no infinity
  return {{"mean_difference", t.mean_difference},
          {"t", std::isfinite(t.t) ? nlohmann::json(t.t) : nlohmann::json(t.t > 0 ? "inf" : "-inf")},
          {"p_value", t.p_value},
          {"n", t.n}};
}

}  // namespace simuser
