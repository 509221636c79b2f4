#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simuser/brain.hpp"
#include "simuser/dataset.hpp"
#include "simuser/llm/gateway.hpp"
#include "simuser/memory_kg.hpp"
#include "simuser/metrics.hpp"
#include "simuser/persona.hpp"
#include "simuser/recommender.hpp"

namespace simuser {

struct BackendConfig {
  std::string kind = "http";  // "http" (LLM_* environment) or "scripted"
  std::filesystem::path script;
};

struct BelievabilityTaskConfig {
  std::vector<int> ratios{1, 3, 9};
  std::size_t items_per_agent = 20;
  bool popularity_matched = false;
};

struct RatingTaskConfig {
  // Test interactions per agent, 0 for all.
  std::size_t max_items = 0;
};

struct CoherenceTaskConfig {
  std::size_t pairs_per_agent = 5;
  // Held-out items the user rated 2 or lower instead of random unseen items.
  bool hard_negatives = false;
};

struct ExposureTaskConfig {
  std::vector<std::string> genres{"Action", "Horror"};
  std::vector<int> checkpoints{5, 20, 50};
  // Genres probed at each checkpoint; empty means every catalog genre.
  std::vector<std::string> probe_genres;
  std::size_t probes_per_genre = 3;
};

struct ReviewTaskConfig {
  std::vector<std::string> modes{"origin", "with_count", "with_negative", "with_positive"};
};

struct OfflineTaskConfig {
  std::vector<std::string> recommenders{"random", "pop", "mf"};
  std::size_t k = 10;
};

struct SessionConfig {
  std::filesystem::path ratings;
  std::filesystem::path items;
  SplitFractions fractions;
  BackendConfig backend;

  std::size_t agents = 100;
  std::vector<UserId> users;  // explicit agent users; overrides `agents`
  std::size_t items_per_page = 4;
  int page_cap = 20;
  std::size_t k1 = 5;
  std::size_t k2 = 3;
  double alpha = 0.8;
  double embed_weight = 0.25;
  std::size_t delta_k = 2;
  std::size_t max_rounds = 3;
  std::uint64_t seed = 7;
  std::size_t worker_cap = 4;
  std::string recommender = "pop";
  std::string captions = "off";  // caption cache path or "off"
  bool reflect_every_page = true;
  std::string item_type = "movie";
  // "llm" runs persona matching; anything else is a personas.jsonl path.
  std::string personas = "llm";
  PersonaConfig persona;
  MfParams mf;
  std::filesystem::path output = "runs/latest";

  BelievabilityTaskConfig believability;
  RatingTaskConfig rating;
  CoherenceTaskConfig coherence;
  ExposureTaskConfig exposure;
  ReviewTaskConfig reviews;
  OfflineTaskConfig offline;

  // Relative paths resolve against base_dir. Throws ValidationError for
  // out-of-range values and ParseError for malformed documents.
  static SessionConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static SessionConfig load(const std::filesystem::path& path);

  BrainConfig brain() const;
};

nlohmann::json to_json(const SessionConfig& c);

struct PersonaRecord {
  std::optional<Persona> persona;
  nlohmann::json match;  // persona matching output, or the file row
  std::string error;
};

// Everything the agents of one run share: data, splits, the base graph, the
// gateway and personas. Personas are computed once on first use.
class Environment {
 public:
  explicit Environment(SessionConfig config);
  Environment(SessionConfig config, std::shared_ptr<llm::LlmBackend> backend);

  const SessionConfig& config() const noexcept { return config_; }
  const InteractionDataset& dataset() const noexcept { return data_; }
  const ItemTable& items() const noexcept { return data_.items; }
  const DatasetSplit& split() const noexcept { return split_; }
  // Train rows minus every (user, item) pair that reappears in validation or test.
  const std::vector<Interaction>& history() const noexcept { return history_; }
  // Validation and test rows.
  const std::vector<Interaction>& held_out() const noexcept { return held_out_; }
  std::span<const Interaction> user_history(const UserId& u) const;
  std::span<const Interaction> user_held_out(const UserId& u) const;
  std::shared_ptr<const KnowledgeGraph> graph() const noexcept { return graph_; }
  const llm::LlmGateway& gateway() const noexcept { return *gateway_; }
  const SemanticIndex* semantic() const noexcept { return semantic_.get(); }
  const std::map<ItemId, std::string>& captions() const noexcept { return captions_; }

  // Sorted; the first `agents` users with history unless `users` is set.
  std::vector<UserId> agent_users() const;

  void prepare_personas(std::span<const UserId> users);
  const PersonaRecord& persona(const UserId& u);

  // Persona, seeded memory and a fresh overlay. Throws Error when the
  // persona could not be built.
  std::unique_ptr<Agent> make_agent(const UserId& u, const BrainConfig& brain);

 private:
  PersonaRecord build_persona_record(const UserId& u) const;

  SessionConfig config_;
  InteractionDataset data_;
  DatasetSplit split_;
  std::vector<Interaction> history_;
  std::vector<Interaction> held_out_;
  std::map<UserId, std::vector<Interaction>> history_by_user_;
  std::map<UserId, std::vector<Interaction>> held_out_by_user_;
  std::shared_ptr<const KnowledgeGraph> graph_;
  std::unique_ptr<llm::LlmGateway> gateway_;
  std::unique_ptr<SemanticIndex> semantic_;
  std::map<ItemId, std::string> captions_;
  std::mutex persona_mutex_;
  std::map<UserId, PersonaRecord> personas_;
  std::map<UserId, nlohmann::json> persona_file_;
};

// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

struct AgentRun {
  UserId agent_id;
  bool failed = false;
  std::string error;
  nlohmann::json persona;
  std::optional<SessionResult> session;
};

struct SimulationReport {
  std::vector<AgentRun> agents;  // sorted by agent id
  std::size_t failed = 0;

  std::vector<AgentEngagement> engagement() const;
};

struct RunOptions {
  std::optional<BrainConfig> brain;
  std::function<std::string(const Item&)> extra;
  // Called after each turn of each agent.
  std::function<void(Agent&, int turn)> after_turn;
};

// The agents' own training items are never recommended to them.
SimulationReport run_simulation(Environment& env, const Recommender& recommender,
                                std::span<const UserId> users, const RunOptions& options = {});

// Throws EmptyReportError when no agent completed.
EngagementMetrics compute_metrics(const SimulationReport& report);

struct TaskResult {
  std::string task;
  nlohmann::json records = nlohmann::json::array();
  nlohmann::json aggregates = nlohmann::json::object();
};
nlohmann::json to_json(const TaskResult& t);

TaskResult task_believability(Environment& env, int ratio);
TaskResult task_rating(Environment& env);

struct CoherencePair {
  UserId agent_id;
  ItemId positive;
  ItemId negative;
};
std::vector<CoherencePair> coherence_pairs(const Environment& env, std::span<const UserId> users);
// Throws ValidationError for a pair missing either side or naming unknown items.
TaskResult task_coherence(Environment& env, std::span<const CoherencePair> pairs);

TaskResult task_exposure(Environment& env);
// Throws ValidationError when a mode needs review metadata some item lacks.
TaskResult task_review_influence(Environment& env, std::span<const std::string> modes);
TaskResult task_offline_compare(Environment& env);

// Runs a task by its CLI name; believability yields one result per ratio.
std::vector<TaskResult> run_task(Environment& env, std::string_view name);

// "origin" yields empty text.
std::function<std::string(const Item&)> review_display(const std::string& mode);

// Every held-out (user, item) pair found in the base graph or as a seed
// memory of that user's agent.
std::vector<std::string> leakage_violations(const Environment& env,
                                            const std::map<UserId, const EpisodicMemory*>& memories);

// Throws ValidationError naming the first leaked pair in the base graph.
void require_no_leakage(const Environment& env);

// Writes config.json, personas.jsonl, traces.jsonl, interviews.jsonl,
// metrics.json and task_results.json.
void write_run_dir(const std::filesystem::path& dir, const SessionConfig& config,
                   const SimulationReport& report, std::span<const TaskResult> tasks);
void write_task_results(const std::filesystem::path& dir, std::span<const TaskResult> tasks);

enum class ReportFormat { Table, Json, PlotData };
ReportFormat parse_report_format(std::string_view s);
// Recomputes engagement from the raw traces and interviews in the run dir.
std::string render_report(const std::filesystem::path& dir, ReportFormat format);

}  // namespace simuser
