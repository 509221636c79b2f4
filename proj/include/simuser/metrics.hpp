#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simuser/dataset.hpp"

namespace simuser {

// Per-agent session outcome, enough to recompute every engagement aggregate.
struct AgentEngagement {
  std::string agent_id;
  std::size_t shown = 0;
  std::size_t watched = 0;
  std::size_t liked = 0;
  int exit_page = 0;
  double satisfaction = 0;  // exit interview score, 1..10
};

struct EngagementMetrics {
  double p_view = 0;
  double n_like = 0;
  double p_like = 0;
  double n_exit = 0;
  double s_sat = 0;
  std::size_t agents = 0;
};

// Means over agents of watched/shown, liked, liked/watched (0 when nothing
// watched), exit page and satisfaction. Throws EmptyReportError on no agents.
EngagementMetrics compute_metrics(std::span<const AgentEngagement> agents);

// Recomputes one agent's engagement from its raw trace lines and interview.
AgentEngagement engagement_from_traces(const std::string& agent_id,
                                       std::span<const nlohmann::json> traces,
                                       const nlohmann::json& interview);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  void add(bool actual, bool predicted);
};

struct ClassificationMetrics {
  double accuracy = 0;
  double precision = 0;  // 0 when nothing was predicted positive
  double recall = 0;     // 0 when there are no positives
  double f1 = 0;         // 0 when precision + recall is 0
};
// Throws EmptyReportError on an empty confusion matrix.
ClassificationMetrics classification_metrics(const Confusion& c);

struct ErrorMetrics {
  double rmse = 0;
  double mae = 0;
  std::size_t n = 0;
};
// Throws EmptyReportError on empty input or ValidationError on length mismatch.
ErrorMetrics error_metrics(std::span<const double> predicted, std::span<const double> truth);

struct RankingMetrics {
  double ndcg = 0;
  double f1 = 0;
  std::size_t k = 0;  // cutoff actually used: min(k, ranked size)
  bool truncated = false;
};
// Binary relevance, log2 discount. Precision is over the cutoff used, recall
// over every relevant item.
RankingMetrics ranking_metrics(std::span<const ItemId> ranked, const std::set<ItemId>& relevant,
                               std::size_t k = 10);

struct PairedTTest {
  double mean_difference = 0;
  double t = 0;  // infinite when every difference is the same nonzero value
  double p_value = 1;  // two-sided
  std::size_t n = 0;
};
// Student's t on a[i] - b[i]. Throws ValidationError on a length mismatch or
// fewer than two pairs.
PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b);

nlohmann::json to_json(const EngagementMetrics& m);
nlohmann::json to_json(const AgentEngagement& a);
nlohmann::json to_json(const ClassificationMetrics& m);
nlohmann::json to_json(const ErrorMetrics& m);
nlohmann::json to_json(const RankingMetrics& m);
nlohmann::json to_json(const PairedTTest& t);

}  // namespace simuser
