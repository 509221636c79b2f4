#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simuser/dataset.hpp"
#include "simuser/llm/gateway.hpp"
#include "simuser/memory_episodic.hpp"
#include "simuser/memory_kg.hpp"
#include "simuser/persona.hpp"

namespace simuser {

enum class ActionKind { Exit, Next, Previous, Click };

std::string_view action_label(ActionKind a);
ActionKind parse_action(std::string_view label);

struct Action {
  ActionKind kind = ActionKind::Next;
  std::optional<ItemId> item;  // CLICK target

  bool operator==(const Action&) const = default;
};

enum class Fatigue { Low, Medium, High };
std::string_view fatigue_label(Fatigue f);
// Hint shown to the LLM: low up to 3 pages, medium up to 7, high after.
Fatigue fatigue_hint(int pages_visited);

struct BrainConfig {
  std::string item_type = "movie";
  std::size_t k1 = 5;
  std::size_t k2 = 3;
  std::size_t delta_k = 2;
  std::size_t max_rounds = 3;
  int page_cap = 20;
  std::size_t followups = 2;
  std::size_t max_causal_questions = 3;
  double causal_threshold = 0.5;
  bool reflect_every_page = true;
  // Removes EXIT from the legal actions (exposure study).
  bool forbid_exit = false;
  BlendParams blend;
};

// What the agent sees of one recommended item.
struct PageItem {
  ItemId id;
  std::string title;
  std::vector<std::string> genres;
  std::optional<std::string> caption;
  std::optional<std::string> description;
  // Extra display text, e.g. review counts or a sample review.
  std::string extra;
};

struct WatchRound {
  std::size_t k1 = 0;
  std::size_t k2 = 0;
  std::vector<ItemId> watch;
  std::vector<ItemId> skip;
  std::string reason;
  std::string evidence;
  std::string contradiction;  // empty when consistent
};

struct WatchDecision {
  std::vector<WatchRound> rounds;
  std::vector<ItemId> final_watch;
};

struct ItemVerdict {
  ItemId item_id;
  int rating = 0;
  std::string feeling;
  std::vector<std::string> cited_paths;
};

struct CausalProbe {
  std::string question;
  double score = 0;
  std::string verdict;
};

struct ClickOutcome {
  ItemId item;
  bool engaged = false;
  std::string reason;
};

struct ActionPlan {
  Action tentative;
  std::optional<ClickOutcome> click;
  std::vector<CausalProbe> probes;
  Action final_action;
  bool refined = false;   // re-queried after low consistency
  bool degraded = false;  // a refinement sub-step failed
};

struct Interview {
  std::string question;
  int rating = 0;
  std::string reason;
  std::string raw;
};

// Asked verbatim at the end of every session.
extern const char* const kInterviewQuestion;

// Maps a causal outcome score onto [0, 1]: values in (1, 10] are read as a
// 10-point scale, the rest is clamped.
double normalize_probe_score(double s);

// True for "none", "no", "consistent" and similar no-contradiction replies.
bool is_no_contradiction(std::string_view text);

using PageSource = std::function<std::vector<ItemId>(int page, const std::set<ItemId>& seen)>;

struct SessionOptions {
  std::map<ItemId, std::string> captions;
  // Extra display text per item (review-influence modes).
  std::function<std::string(const Item&)> extra;
  // Called after every completed turn with the turn number.
  std::function<void(int turn)> after_turn;
};

struct BelievabilityAnswer {
  bool interacted = false;
  std::string reason;
};

struct SessionResult {
  std::string agent_id;
  std::vector<nlohmann::json> traces;
  Interview interview;
  std::size_t shown = 0;    // distinct items shown
  std::size_t watched = 0;  // distinct items watched
  std::size_t liked = 0;    // watched items rated above 3
  int exit_page = 0;
  bool exited = false;      // chose EXIT (as opposed to hitting the cap)
  std::vector<ItemVerdict> verdicts;
};

// One simulated user; the agent id is the dataset user id it stands in for.
// Not thread-safe: each agent runs on one worker.
class Agent {
 public:
  Agent(std::string agent_id, Persona persona, const llm::LlmGateway& gateway,
        std::shared_ptr<const KnowledgeGraph> kg, const ItemTable& items, BrainConfig config,
        const SemanticIndex* semantic = nullptr);

  // Seeds episodic memory from the user's training history.
  void seed_memory(std::span<const Interaction> history);

  WatchDecision elicit_watch(const std::vector<PageItem>& page);
  std::vector<ItemVerdict> evaluate_items(const std::vector<PageItem>& watched);
  // Rating through the evaluation prompt without touching the memories.
  ItemVerdict predict_rating(const PageItem& item);
  ActionPlan select_action(const std::vector<PageItem>& page);
  ActionPlan refine_action(ActionPlan plan);
  std::vector<std::string> reflect(const std::vector<std::string>& records);
  Interview exit_interview();
  // Asks whether the user has interacted with the item, using both memories.
  BelievabilityAnswer classify_interacted(const PageItem& item);

  // Runs the turn loop until EXIT or the page cap.
  SessionResult run_session(const PageSource& pages, const SessionOptions& options = {});

  PageItem page_item(const ItemId& id, const std::map<ItemId, std::string>& captions = {},
                     const std::function<std::string(const Item&)>& extra = {}) const;

  const std::string& id() const noexcept { return agent_id_; }
  const Persona& persona() const noexcept { return persona_; }
  EpisodicMemory& memory() noexcept { return memory_; }
  const EpisodicMemory& memory() const noexcept { return memory_; }
  GraphOverlay& graph() noexcept { return overlay_; }
  const BrainConfig& config() const noexcept { return config_; }
  int page() const noexcept { return page_; }
  void set_page(int p) { page_ = p; }
  Fatigue fatigue() const noexcept { return fatigue_; }
  const std::string& satisfaction() const noexcept { return satisfaction_; }
  const std::string& emotion() const noexcept { return emotion_; }

 private:
  llm::Bindings base_bindings() const;
  std::string render_page(const std::vector<PageItem>& page) const;
  std::string episodic_evidence(const RetrievalResult& r) const;
  std::string kg_evidence(const std::vector<PageItem>& page, std::size_t k2) const;
  std::vector<std::string> similar_lines(const PageItem& item, std::vector<std::string>* paths) const;
  std::string history_text() const;
  std::vector<Action> legal_actions(bool allow_click) const;
  std::string allowed_text(const std::vector<Action>& legal) const;
  llm::ReplyValidator action_validator(const std::vector<ActionKind>& allowed,
                                       const std::vector<PageItem>* page) const;
  Action parse_action_reply(const llm::ParsedOutput& out) const;

  std::string agent_id_;
  Persona persona_;
  const llm::LlmGateway* gateway_;
  const ItemTable* items_;
  BrainConfig config_;
  const SemanticIndex* semantic_;
  EpisodicMemory memory_;
  GraphOverlay overlay_;

  int page_ = 1;
  std::string satisfaction_ = "NEUTRAL";
  Fatigue fatigue_ = Fatigue::Low;
  std::string emotion_ = "CALM";
  std::int64_t clock_ = 0;
  std::vector<std::string> history_;  // one line per visited page
  std::set<ItemId> watched_;
};

nlohmann::json to_json(const WatchDecision& d);
nlohmann::json to_json(const ItemVerdict& v);
nlohmann::json to_json(const ActionPlan& p);
nlohmann::json to_json(const Interview& i);

}  // namespace simuser
