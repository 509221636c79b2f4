#include "simuser/brain.hpp"

#include <algorithm>
#include <cctype>

#include <spdlog/spdlog.h>

#include "simuser/error.hpp"
#include "simuser/llm/prompts.hpp"

namespace simuser {

namespace tags = llm::tags;

const char* const kInterviewQuestion =
    "How satisfied are you with the recommender system? Please rate your satisfaction on a scale "
    "from 1 to 10 and provide an explanation for your rating.";

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string numbered(const std::vector<std::string>& lines) {
  if (lines.empty()) return "none\n";
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) out += std::to_string(i) + ". " + lines[i] + "\n";
  return out;
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string describe_item(const PageItem& item) {
  std::string s = "[" + item.id + "] " + item.title;
  if (!item.genres.empty()) s += " (" + join(item.genres, ", ") + ")";
  if (item.caption) s += ". Thumbnail: " + *item.caption;
  if (!item.extra.empty()) s += ". " + item.extra;
  return s;
}

std::string item_query(const std::vector<PageItem>& page) {
  std::vector<std::string> names;
  for (const auto& it : page) {
    names.push_back(it.title + (it.genres.empty() ? "" : " (" + join(it.genres, ", ") + ")"));
  }
  return "Would I enjoy " + join(names, ", ") + "?";
}

std::vector<ItemId> page_ids(const std::vector<PageItem>& page) {
  std::vector<ItemId> ids;
  for (const auto& it : page) ids.push_back(it.id);
  return ids;
}

std::string satisfaction_text(std::string_view label) {
  std::string s = lower(label);
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

}  // namespace

std::string_view action_label(ActionKind a) {
  switch (a) {
    case ActionKind::Exit: return "EXIT";
    case ActionKind::Next: return "NEXT";
    case ActionKind::Previous: return "PREVIOUS";
    case ActionKind::Click: return "CLICK";
  }
  return "NEXT";
}

ActionKind parse_action(std::string_view label) {
  const auto n = llm::normalize_choice(label);
  for (auto a : {ActionKind::Exit, ActionKind::Next, ActionKind::Previous, ActionKind::Click}) {
    if (n == action_label(a)) return a;
  }
  throw ValidationError("unknown action " + std::string(label));
}

std::string_view fatigue_label(Fatigue f) {
  switch (f) {
    case Fatigue::Low: return "LOW";
    case Fatigue::Medium: return "MEDIUM";
    case Fatigue::High: return "HIGH";
  }
  return "LOW";
}

Fatigue fatigue_hint(int pages_visited) {
  if (pages_visited <= 3) return Fatigue::Low;
  if (pages_visited <= 7) return Fatigue::Medium;
  return Fatigue::High;
}

double normalize_probe_score(double s) {
  if (!(s == s)) return 0.0;
  if (s > 1.0 && s <= 10.0) s /= 10.0;
  return std::clamp(s, 0.0, 1.0);
}

bool is_no_contradiction(std::string_view text) {
  std::string t = lower(text);
  const auto b = t.find_first_not_of(" \t\r\n\"'");
  if (b == std::string::npos) return true;
  t = t.substr(b);
  while (!t.empty() && std::string_view(" .!\t\r\n\"'").find(t.back()) != std::string_view::npos) t.pop_back();
  for (std::string_view p : {"none", "no contradiction", "consistent", "n/a", "nothing"}) {
    if (t.rfind(p, 0) == 0) return true;
  }
  return t == "no";
}

Agent::Agent(std::string agent_id, Persona persona, const llm::LlmGateway& gateway,
             std::shared_ptr<const KnowledgeGraph> kg, const ItemTable& items, BrainConfig config,
             const SemanticIndex* semantic)
    : agent_id_(std::move(agent_id)),
      persona_(std::move(persona)),
      gateway_(&gateway),
      items_(&items),
      config_(std::move(config)),
      semantic_(semantic),
      memory_(gateway, agent_id_),
      overlay_(std::move(kg)) {
  if (config_.page_cap < 1) throw ValidationError("page cap must be at least 1");
  if (config_.max_rounds < 1) throw ValidationError("at least one elicitation round is required");
  if (config_.blend.embed_weight > 0 && semantic_ == nullptr) {
    throw ValidationError("a semantic index is required when embed_weight > 0");
  }
}

void Agent::seed_memory(std::span<const Interaction> history) {
  memory_.seed_from_history(history, *items_);
  for (const auto& r : history) clock_ = std::max(clock_, r.timestamp);
}

llm::Bindings Agent::base_bindings() const {
  return {{"persona", persona_.describe()},
          {"item_type", config_.item_type},
          {"pickiness", std::string(pickiness_phrase(persona_.pickiness))},
          {"page", std::to_string(page_)},
          {"agent_id", agent_id_}};
}

PageItem Agent::page_item(const ItemId& id, const std::map<ItemId, std::string>& captions,
                          const std::function<std::string(const Item&)>& extra) const {
  const Item& item = items_->at(id);
  PageItem p{item.id, item.title, item.genres, std::nullopt, item.description, {}};
  if (auto it = captions.find(id); it != captions.end()) p.caption = it->second;
  if (extra) p.extra = extra(item);
  return p;
}

std::string Agent::render_page(const std::vector<PageItem>& page) const {
  std::string out;
  for (const auto& it : page) out += "- " + describe_item(it) + "\n";
  return out;
}

std::string Agent::episodic_evidence(const RetrievalResult& r) const {
  std::vector<std::string> lines;
  for (const auto& e : r.entries) lines.push_back(e.entry.text);
  return numbered(lines);
}

std::string Agent::kg_evidence(const std::vector<PageItem>& page, std::size_t k2) const {
  BlendParams params = config_.blend;
  params.k2 = k2;
  std::string out;
  for (const auto& it : page) {
    if (!overlay_.base().find(item_entity(it.id))) continue;
    const auto similar = retrieve_similar(overlay_, agent_id_, it.id, params, semantic_);
    if (similar.empty()) continue;
    out += "For " + it.title + ":\n";
    for (const auto& s : similar) {
      out += "  - " + s.title + " (average rating " +
             (s.average_rating ? fmt2(*s.average_rating) : std::string("unknown"));
      if (s.own_rating) out += ", you rated it " + std::to_string(*s.own_rating);
      out += ")";
      if (!s.paths.empty()) out += ": " + join(s.paths, "; ");
      out += "\n";
    }
  }
  return out.empty() ? "none\n" : out;
}

std::string Agent::history_text() const {
  if (history_.empty()) return "This is the first page.";
  return join(history_, "\n");
}

WatchDecision Agent::elicit_watch(const std::vector<PageItem>& page) {
  if (page.empty()) throw ValidationError("cannot decide on an empty page");
  const auto ids = page_ids(page);
  const auto on_page = [&](const std::vector<std::string>& listed) -> std::optional<std::string> {
    for (const auto& w : listed) {
      if (std::find(ids.begin(), ids.end(), w) == ids.end()) return "item '" + w + "' is not on this page";
    }
    return std::nullopt;
  };
  llm::CompleteOptions opts;
  opts.validator = [&](const llm::ParsedOutput& out) -> std::optional<std::string> {
    if (auto e = on_page(out.list("WATCH"))) return e;
    if (out.has("SKIP")) return on_page(out.list("SKIP"));
    return std::nullopt;
  };

  WatchDecision decision;
  const std::string query = item_query(page);
  std::string previous;
  for (std::size_t t = 0; t < config_.max_rounds; ++t) {
    WatchRound round;
    round.k1 = config_.k1 + t * config_.delta_k;
    round.k2 = config_.k2 + t * config_.delta_k;
    const auto episodic = memory_.self_ask_retrieve(query, round.k1, config_.followups);
    auto b = base_bindings();
    b["page_items"] = render_page(page);
    b["episodic_evidence"] = episodic_evidence(episodic);
    b["kg_evidence"] = kg_evidence(page, round.k2);
    b["previous_decision"] = previous;
    b["_round"] = std::to_string(t);
    const auto out = *gateway_->complete(tags::kWatchDecision, b, opts).parsed;
    round.watch = out.list("WATCH");
    if (out.has("SKIP")) round.skip = out.list("SKIP");
    round.reason = out.text_or("REASON").value_or("");
    round.evidence = out.text_or("EVIDENCE").value_or("");
    const std::string c = out.text_or("CONTRADICTION").value_or("");
    round.contradiction = is_no_contradiction(c) ? std::string() : c;
    const bool done = round.contradiction.empty();
    previous = "Your previous decision was to watch " +
               (round.watch.empty() ? std::string("nothing") : join(round.watch, ", ")) +
               ", but you noted: " + round.contradiction +
               ". More evidence has been retrieved above; reconsider.\n\n";
    decision.rounds.push_back(std::move(round));
    if (done) break;
  }
  // Watch ids not listed in the final round are skipped; order follows the page.
  const auto& last = decision.rounds.back().watch;
  for (const auto& id : ids) {
    if (std::find(last.begin(), last.end(), id) != last.end()) decision.final_watch.push_back(id);
  }
  return decision;
}

std::vector<std::string> Agent::similar_lines(const PageItem& item, std::vector<std::string>* paths) const {
  std::vector<std::string> lines;
  if (!overlay_.base().find(item_entity(item.id))) return lines;
  BlendParams params = config_.blend;
  params.k2 = config_.k2;
  for (const auto& s : retrieve_similar(overlay_, agent_id_, item.id, params, semantic_)) {
    std::string line = s.title + " (average rating " +
                       (s.average_rating ? fmt2(*s.average_rating) : std::string("unknown"));
    if (s.own_rating) line += ", you rated it " + std::to_string(*s.own_rating);
    lines.push_back(line + ")");
    if (paths) paths->insert(paths->end(), s.paths.begin(), s.paths.end());
  }
  return lines;
}

ItemVerdict Agent::predict_rating(const PageItem& item) {
  std::vector<std::string> paths;
  const auto evidence = similar_lines(item, &paths);
  std::vector<std::string> memories;
  for (const auto& e : memory_.search(item.title + " " + join(item.genres, " "), config_.k1)) {
    memories.push_back(e.entry.text);
  }
  auto b = base_bindings();
  b["item"] = describe_item(item);
  b["kg_paths"] = numbered(paths);
  b["kg_evidence"] = numbered(evidence);
  b["episodic_evidence"] = numbered(memories);
  b["_item"] = item.id;
  const auto out = *gateway_->complete(tags::kItemRating, b).parsed;
  return {item.id, static_cast<int>(out.integer("RATING")), out.text("FEELING"), std::move(paths)};
}

BelievabilityAnswer Agent::classify_interacted(const PageItem& item) {
  std::vector<std::string> memories;
  for (const auto& e : memory_.search(item.title + " " + join(item.genres, " "), config_.k1)) {
    memories.push_back(e.entry.text);
  }
  auto b = base_bindings();
  b["item"] = describe_item(item);
  b["kg_evidence"] = numbered(similar_lines(item, nullptr));
  b["episodic_evidence"] = numbered(memories);
  b["_item"] = item.id;
  const auto out = *gateway_->complete(tags::kBelievability, b).parsed;
  return {out.text("ANSWER") == "YES", out.text_or("REASON").value_or("")};
}

std::vector<ItemVerdict> Agent::evaluate_items(const std::vector<PageItem>& watched) {
  std::vector<ItemVerdict> verdicts;
  for (const auto& item : watched) {
    auto v = predict_rating(item);
    memory_.record("I watched " + item.title + " and rated it " + std::to_string(v.rating) +
                       ". " + v.feeling,
                   MemoryKind::Feeling);
    if (overlay_.base().find(item_entity(item.id)) && overlay_.base().find(user_entity(agent_id_))) {
      overlay_.grow({agent_id_, item.id, v.rating, ++clock_});
    }
    watched_.insert(item.id);
    verdicts.push_back(std::move(v));
  }
  return verdicts;
}

std::vector<Action> Agent::legal_actions(bool allow_click) const {
  std::vector<Action> legal;
  if (!config_.forbid_exit) legal.push_back({ActionKind::Exit, {}});
  if (page_ < config_.page_cap) legal.push_back({ActionKind::Next, {}});
  if (page_ > 1) legal.push_back({ActionKind::Previous, {}});
  if (allow_click) legal.push_back({ActionKind::Click, {}});
  return legal;
}

std::string Agent::allowed_text(const std::vector<Action>& legal) const {
  std::vector<std::string> names;
  for (const auto& a : legal) names.emplace_back(action_label(a.kind));
  return join(names, ", ");
}

llm::ReplyValidator Agent::action_validator(const std::vector<ActionKind>& allowed,
                                            const std::vector<PageItem>* page) const {
  return [allowed, page, this](const llm::ParsedOutput& out) -> std::optional<std::string> {
    const auto a = parse_action(out.text("ACTION"));
    if (std::find(allowed.begin(), allowed.end(), a) == allowed.end()) {
      return std::string(action_label(a)) + " is not allowed on page " + std::to_string(page_);
    }
    if (a == ActionKind::Click) {
      const auto item = out.text_or("ITEM");
      if (!item || page == nullptr ||
          std::none_of(page->begin(), page->end(), [&](const PageItem& p) { return p.id == *item; })) {
        return std::string("CLICK needs the ITEM id of an item on this page");
      }
    }
    return std::nullopt;
  };
}

Action Agent::parse_action_reply(const llm::ParsedOutput& out) const {
  Action a{parse_action(out.text("ACTION")), {}};
  if (a.kind == ActionKind::Click) a.item = out.text("ITEM");
  return a;
}

ActionPlan Agent::select_action(const std::vector<PageItem>& page) {
  const int visited = static_cast<int>(history_.size()) + 1;
  auto b = base_bindings();
  b["history"] = history_text();

  satisfaction_ = gateway_->complete(tags::kActionSatisfaction, b).parsed->text("SATISFACTION");
  b["satisfaction"] = satisfaction_text(satisfaction_);

  b["pages_visited"] = std::to_string(visited);
  b["fatigue_hint"] = lower(fatigue_label(fatigue_hint(visited)));
  const auto f = gateway_->complete(tags::kActionFatigue, b).parsed->text("FATIGUE");
  Fatigue reported = Fatigue::Low;
  if (f == "MEDIUM") reported = Fatigue::Medium;
  if (f == "HIGH") reported = Fatigue::High;
  fatigue_ = std::max(fatigue_, reported);
  b["fatigue"] = lower(fatigue_label(fatigue_));

  std::string emotion = gateway_->complete(tags::kActionEmotion, b).parsed->text("EMOTION");
  emotion_ = llm::normalize_choice(emotion);
  b["emotion"] = emotion_;

  b["page_cap"] = std::to_string(config_.page_cap);
  b["page_items"] = render_page(page);
  b["click_outcome"] = "";

  ActionPlan plan;
  auto choose = [&](bool allow_click) {
    const auto legal = legal_actions(allow_click);
    std::vector<ActionKind> kinds;
    for (const auto& a : legal) kinds.push_back(a.kind);
    if (kinds.empty()) throw ValidationError("no legal action on page " + std::to_string(page_));
    b["allowed_actions"] = allowed_text(legal);
    llm::CompleteOptions opts;
    opts.validator = action_validator(kinds, &page);
    return parse_action_reply(*gateway_->complete(tags::kActionChoice, b, opts).parsed);
  };

  Action a = choose(true);
  if (a.kind == ActionKind::Click) {
    const auto it = std::find_if(page.begin(), page.end(), [&](const PageItem& p) { return p.id == *a.item; });
    auto cb = base_bindings();
    cb["item"] = describe_item(*it);
    cb["extended_description"] = it->description.value_or("No further description is available.");
    cb["_item"] = it->id;
    const auto out = *gateway_->complete(tags::kClickDetail, cb).parsed;
    ClickOutcome click{it->id, out.text("ENGAGE") == "YES", out.text_or("REASON").value_or("")};
    b["click_outcome"] = "You clicked on " + it->title + " and " +
                         (click.engaged ? "wanted to engage further" : "did not want to engage further") +
                         (click.reason.empty() ? "" : ": " + click.reason) + ".\n";
    plan.click = std::move(click);
    a = choose(false);
  }
  plan.tentative = a;
  plan.final_action = a;
  return plan;
}

ActionPlan Agent::refine_action(ActionPlan plan) {
  const std::string action(action_label(plan.tentative.kind));
  auto b = base_bindings();
  b["action"] = action;
  b["history"] = history_text();
  b["satisfaction"] = satisfaction_text(satisfaction_);
  b["fatigue"] = lower(fatigue_label(fatigue_));
  b["max_questions"] = std::to_string(config_.max_causal_questions);
  try {
    auto questions = gateway_->complete(tags::kCausalQuestions, b).parsed->all("QUESTION");
    if (questions.size() > config_.max_causal_questions) questions.resize(config_.max_causal_questions);
    if (questions.empty()) return plan;
    double sum = 0;
    for (std::size_t i = 0; i < questions.size(); ++i) {
      auto qb = b;
      qb["question"] = questions[i];
      qb["_question"] = std::to_string(i);
      const auto out = *gateway_->complete(tags::kCausalOutcome, qb).parsed;
      CausalProbe p{questions[i], normalize_probe_score(out.real("SCORE")), out.text("VERDICT")};
      sum += p.score;
      plan.probes.push_back(std::move(p));
    }
    if (sum / static_cast<double>(plan.probes.size()) >= config_.causal_threshold) return plan;

    std::string probes;
    for (const auto& p : plan.probes) {
      probes += "- " + p.question + " (score " + fmt2(p.score) + "): " + p.verdict + "\n";
    }
    const auto legal = legal_actions(false);
    std::vector<ActionKind> kinds;
    for (const auto& a : legal) kinds.push_back(a.kind);
    b["probes"] = probes;
    b["allowed_actions"] = allowed_text(legal);
    llm::CompleteOptions opts;
    opts.validator = action_validator(kinds, nullptr);
    plan.final_action = parse_action_reply(*gateway_->complete(tags::kActionRefine, b, opts).parsed);
    plan.refined = true;
  } catch (const LlmError& e) {
    spdlog::warn("agent {}: action refinement degraded, keeping {}: {}", agent_id_, action, e.what());
    plan.final_action = plan.tentative;
    plan.refined = false;
    plan.degraded = true;
  }
  return plan;
}

std::vector<std::string> Agent::reflect(const std::vector<std::string>& records) {
  if (records.empty()) return {};
  auto b = base_bindings();
  b["records"] = numbered(records);
  const auto topics = gateway_->complete(tags::kReflectionTopics, b).parsed->all("TOPIC");
  b["topics"] = topics.empty() ? "none" : join(topics, "\n");
  const auto out = *gateway_->complete(tags::kReflectionInsights, b).parsed;
  std::vector<std::string> stored;
  const auto insights = out.all("INSIGHT");
  for (std::size_t i = 0; i < insights.size(); ++i) {
    std::string text = "Reflection: " + insights[i];
    if (i < out.count("CITES")) {
      const auto cites = out.list("CITES", i);
      if (!cites.empty()) text += " (based on records " + join(cites, ", ") + ")";
    }
    memory_.record(text, MemoryKind::Reflection);
    stored.push_back(std::move(text));
  }
  return stored;
}

Interview Agent::exit_interview() {
  auto b = base_bindings();
  b["history"] = history_text();
  b["question"] = kInterviewQuestion;
  const auto r = gateway_->complete(tags::kExitInterview, b);
  return {kInterviewQuestion, static_cast<int>(r.parsed->integer("RATING")), r.parsed->text("REASON"),
          r.raw_text};
}

SessionResult Agent::run_session(const PageSource& pages, const SessionOptions& options) {
  SessionResult result;
  result.agent_id = agent_id_;
  std::map<int, std::vector<ItemId>> cache;
  std::set<ItemId> seen;
  std::set<ItemId> watched;
  std::vector<std::string> session_records;
  page_ = 1;

  for (int turn = 1; turn <= config_.page_cap; ++turn) {
    nlohmann::json trace;
    std::vector<std::string> steps;
    trace["agent_id"] = agent_id_;
    trace["turn"] = turn;
    trace["page"] = page_;

    // perceive
    auto cached = cache.find(page_);
    if (cached == cache.end()) cached = cache.emplace(page_, pages(page_, seen)).first;
    std::vector<PageItem> page;
    for (const auto& id : cached->second) {
      page.push_back(page_item(id, options.captions, options.extra));
      seen.insert(id);
    }
    steps.push_back("perceive");
    trace["shown"] = cached->second;

    WatchDecision decision;
    std::vector<ItemVerdict> verdicts;
    PageRecord record{config_.item_type, page_, {}, {}, {}, {}};
    if (!page.empty()) {
      // retrieve + watch-decide: each elicitation round re-queries both memories
      steps.push_back("retrieve");
      decision = elicit_watch(page);
      steps.push_back("watch_decide");

      std::vector<PageItem> to_rate;
      for (const auto& id : decision.final_watch) {
        if (watched_.count(id)) continue;
        to_rate.push_back(*std::find_if(page.begin(), page.end(), [&](const PageItem& p) { return p.id == id; }));
      }
      verdicts = evaluate_items(to_rate);
      steps.push_back("rate");
      for (const auto& p : page) {
        record.shown.push_back(p.title);
        const auto v = std::find_if(verdicts.begin(), verdicts.end(), [&](const ItemVerdict& x) { return x.item_id == p.id; });
        if (v != verdicts.end()) {
          record.watched.push_back(p.title);
          record.ratings.push_back(v->rating);
          watched.insert(p.id);
          if (v->rating > 3) ++result.liked;
        } else if (std::find(decision.final_watch.begin(), decision.final_watch.end(), p.id) ==
                   decision.final_watch.end()) {
          record.disliked.push_back(p.title);
        }
      }
    }

    ActionPlan plan;
    const bool can_act = !legal_actions(!page.empty()).empty();
    if (can_act) {
      plan = refine_action(select_action(page));
      steps.push_back("action_select");
    } else {
      plan.tentative = plan.final_action = {ActionKind::Exit, {}};
    }

    std::vector<std::string> page_records;
    const std::string interaction = page_interaction_text(record);
    if (!page.empty()) page_records.push_back(interaction);
    for (const auto& v : verdicts) {
      page_records.push_back("I rated " + items_->at(v.item_id).title + " " + std::to_string(v.rating) +
                             ": " + v.feeling);
    }
    session_records.insert(session_records.end(), page_records.begin(), page_records.end());
    const bool last = plan.final_action.kind == ActionKind::Exit || turn == config_.page_cap || !can_act;
    std::vector<std::string> reflections;
    if (config_.reflect_every_page) {
      reflections = reflect(page_records);
      steps.push_back("reflect");
    } else if (last) {
      reflections = reflect(session_records);
      steps.push_back("reflect");
    }

    // memory-update
    if (!page.empty()) memory_.record(interaction, MemoryKind::PageInteraction);
    history_.push_back("Page " + std::to_string(page_) + ": " + interaction);
    steps.push_back("memory_update");

    trace["steps"] = steps;
    trace["decision"] = to_json(decision);
    nlohmann::json vs = nlohmann::json::array();
    for (const auto& v : verdicts) vs.push_back(to_json(v));
    trace["verdicts"] = vs;
    trace["action"] = to_json(plan);
    trace["state"] = {{"satisfaction", satisfaction_},
                      {"fatigue", std::string(fatigue_label(fatigue_))},
                      {"emotion", emotion_}};
    trace["reflections"] = reflections;
    result.traces.push_back(std::move(trace));
    result.verdicts.insert(result.verdicts.end(), verdicts.begin(), verdicts.end());
    result.exit_page = page_;
    if (options.after_turn) options.after_turn(turn);

    if (plan.final_action.kind == ActionKind::Exit && can_act) {
      result.exited = true;
      break;
    }
    if (!can_act) break;
    if (plan.final_action.kind == ActionKind::Next) ++page_;
    if (plan.final_action.kind == ActionKind::Previous) --page_;
  }

  result.interview = exit_interview();
  result.shown = seen.size();
  result.watched = watched.size();
  return result;
}

nlohmann::json to_json(const WatchDecision& d) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : d.rounds) {
    rounds.push_back({{"k1", r.k1},
                      {"k2", r.k2},
                      {"watch", r.watch},
                      {"skip", r.skip},
                      {"reason", r.reason},
                      {"evidence", r.evidence},
                      {"contradiction", r.contradiction}});
  }
  return {{"rounds", rounds}, {"final", d.final_watch}};
}

nlohmann::json to_json(const ItemVerdict& v) {
  return {{"item_id", v.item_id}, {"rating", v.rating}, {"feeling", v.feeling}, {"cited_paths", v.cited_paths}};
}

namespace {
nlohmann::json to_json(const Action& a) {
  nlohmann::json j = {{"kind", std::string(action_label(a.kind))}};
  if (a.item) j["item"] = *a.item;
  return j;
}
}  // namespace

nlohmann::json to_json(const ActionPlan& p) {
  nlohmann::json probes = nlohmann::json::array();
  for (const auto& q : p.probes) probes.push_back({{"question", q.question}, {"score", q.score}, {"verdict", q.verdict}});
  nlohmann::json j = {{"tentative", to_json(p.tentative)},
                      {"final", to_json(p.final_action)},
                      {"probes", probes},
                      {"refined", p.refined},
                      {"degraded", p.degraded}};
  if (p.click) j["click"] = {{"item", p.click->item}, {"engaged", p.click->engaged}, {"reason", p.click->reason}};
  return j;
}

nlohmann::json to_json(const Interview& i) {
  return {{"question", i.question}, {"rating", i.rating}, {"reason", i.reason}, {"raw", i.raw}};
}

}  // namespace simuser
