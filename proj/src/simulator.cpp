#include "simuser/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "simuser/error.hpp"
#include "simuser/llm/http_backend.hpp"
#include "simuser/llm/scripted_backend.hpp"
#include "simuser/perception.hpp"
#include "simuser/rng.hpp"

namespace simuser {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ValidationError("unknown config key '" + where + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::set<std::pair<UserId, ItemId>> pairs_of(std::span<const Interaction> rows) {
  std::set<std::pair<UserId, ItemId>> out;
  for (const auto& r : rows) out.emplace(r.user_id, r.item_id);
  return out;
}

std::shared_ptr<llm::LlmBackend> make_backend(const BackendConfig& c) {
  if (c.kind == "scripted") {
    if (c.script.empty()) throw ValidationError("scripted backend needs a script file");
    return std::make_shared<llm::ScriptedBackend>(llm::ScriptedBackend::from_file(c.script));
  }
  if (c.kind == "http") return std::make_shared<llm::HttpBackend>(llm::HttpBackendConfig::from_env());
  throw ValidationError("unknown backend kind '" + c.kind + "'");
}

std::set<ItemId> items_of(std::span<const Interaction> rows) {
  std::set<ItemId> out;
  for (const auto& r : rows) out.insert(r.item_id);
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Catalog items the user never rated in any split, in id order.
std::vector<ItemId> unseen_items(const Environment& env, const UserId& u) {
  std::set<ItemId> rated;
  for (const auto& r : env.dataset().interactions) {
    if (r.user_id == u) rated.insert(r.item_id);
  }
  std::vector<ItemId> out;
  for (const auto& it : env.items().items()) {
    if (!rated.count(it.id)) out.push_back(it.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ItemId> distinct_items(std::span<const Interaction> rows) {
  const auto s = items_of(rows);
  return {s.begin(), s.end()};
}

json engagement_json(const EngagementMetrics& m, std::size_t failed) {
  json j = to_json(m);
  j["failed"] = failed;
  return j;
}

}  // namespace

SessionConfig SessionConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  SessionConfig c;
  try {
    reject_unknown(j,
                   {"ratings", "items", "fractions", "backend", "agents", "users", "items_per_page",
                    "page_cap", "k1", "k2", "alpha", "embed_weight", "delta_k", "max_rounds", "seed",
                    "worker_cap", "recommender", "captions", "reflect_every_page", "item_type",
                    "personas", "persona", "mf", "output", "tasks"},
                   "");
    std::string ratings, items, output;
    read(j, "ratings", ratings);
    read(j, "items", items);
    c.ratings = resolve(base_dir, ratings);
    c.items = resolve(base_dir, items);
    if (auto f = j.find("fractions"); f != j.end()) {
      const auto v = f->get<std::vector<double>>();
      if (v.size() != 3) throw ValidationError("fractions needs three values");
      c.fractions = {v[0], v[1], v[2]};
    }
    if (auto b = j.find("backend"); b != j.end()) {
      if (b->is_string()) {
        c.backend.kind = b->get<std::string>();
      } else {
        reject_unknown(*b, {"kind", "script"}, "backend.");
        read(*b, "kind", c.backend.kind);
        std::string script;
        read(*b, "script", script);
        c.backend.script = resolve(base_dir, script);
      }
    }
    read(j, "agents", c.agents);
    read(j, "users", c.users);
    read(j, "items_per_page", c.items_per_page);
    read(j, "page_cap", c.page_cap);
    read(j, "k1", c.k1);
    read(j, "k2", c.k2);
    read(j, "alpha", c.alpha);
    read(j, "embed_weight", c.embed_weight);
    read(j, "delta_k", c.delta_k);
    read(j, "max_rounds", c.max_rounds);
    read(j, "seed", c.seed);
    read(j, "worker_cap", c.worker_cap);
    read(j, "recommender", c.recommender);
    read(j, "captions", c.captions);
    if (c.captions != "off") c.captions = resolve(base_dir, c.captions).string();
    read(j, "reflect_every_page", c.reflect_every_page);
    read(j, "item_type", c.item_type);
    read(j, "personas", c.personas);
    if (c.personas != "llm") c.personas = resolve(base_dir, c.personas).string();
    c.persona.seed = c.seed;
    if (auto p = j.find("persona"); p != j.end()) {
      reject_unknown(*p, {"summary_sample", "candidates", "subsets", "subset_size", "seed"}, "persona.");
      read(*p, "summary_sample", c.persona.summary_sample);
      read(*p, "candidates", c.persona.candidates);
      read(*p, "subsets", c.persona.subsets);
      read(*p, "subset_size", c.persona.subset_size);
      read(*p, "seed", c.persona.seed);
    }
    c.persona.item_type = c.item_type;
    c.mf.seed = c.seed;
    if (auto m = j.find("mf"); m != j.end()) {
      reject_unknown(*m, {"rank", "learning_rate", "regularization", "epochs", "seed", "init_scale"}, "mf.");
      read(*m, "rank", c.mf.rank);
      read(*m, "learning_rate", c.mf.learning_rate);
      read(*m, "regularization", c.mf.regularization);
      read(*m, "epochs", c.mf.epochs);
      read(*m, "seed", c.mf.seed);
      read(*m, "init_scale", c.mf.init_scale);
    }
    read(j, "output", output);
    if (!output.empty()) c.output = resolve(base_dir, output);
    if (auto t = j.find("tasks"); t != j.end()) {
      reject_unknown(*t, {"believability", "rating", "coherence", "exposure", "reviews", "offline"}, "tasks.");
      if (auto b = t->find("believability"); b != t->end()) {
        reject_unknown(*b, {"ratios", "items_per_agent", "popularity_matched"}, "tasks.believability.");
        read(*b, "ratios", c.believability.ratios);
        read(*b, "items_per_agent", c.believability.items_per_agent);
        read(*b, "popularity_matched", c.believability.popularity_matched);
      }
      if (auto r = t->find("rating"); r != t->end()) {
        reject_unknown(*r, {"max_items"}, "tasks.rating.");
        read(*r, "max_items", c.rating.max_items);
      }
      if (auto h = t->find("coherence"); h != t->end()) {
        reject_unknown(*h, {"pairs_per_agent", "hard_negatives"}, "tasks.coherence.");
        read(*h, "pairs_per_agent", c.coherence.pairs_per_agent);
        read(*h, "hard_negatives", c.coherence.hard_negatives);
      }
      if (auto e = t->find("exposure"); e != t->end()) {
        reject_unknown(*e, {"genres", "checkpoints", "probe_genres", "probes_per_genre"}, "tasks.exposure.");
        read(*e, "genres", c.exposure.genres);
        read(*e, "checkpoints", c.exposure.checkpoints);
        read(*e, "probe_genres", c.exposure.probe_genres);
        read(*e, "probes_per_genre", c.exposure.probes_per_genre);
      }
      if (auto r = t->find("reviews"); r != t->end()) {
        reject_unknown(*r, {"modes"}, "tasks.reviews.");
        read(*r, "modes", c.reviews.modes);
      }
      if (auto o = t->find("offline"); o != t->end()) {
        reject_unknown(*o, {"recommenders", "k"}, "tasks.offline.");
        read(*o, "recommenders", c.offline.recommenders);
        read(*o, "k", c.offline.k);
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }

  if (c.items_per_page < 1) throw ValidationError("items_per_page must be at least 1");
  if (c.page_cap < 1) throw ValidationError("page_cap must be at least 1");
  if (c.alpha < 0 || c.alpha > 1) throw ValidationError("alpha must be in [0, 1]");
  if (c.embed_weight < 0 || c.embed_weight > 1) throw ValidationError("embed_weight must be in [0, 1]");
  if (c.max_rounds < 1) throw ValidationError("max_rounds must be at least 1");
  if (c.worker_cap < 1) throw ValidationError("worker_cap must be at least 1");
  if (c.agents < 1 && c.users.empty()) throw ValidationError("at least one agent is required");
  for (int r : c.believability.ratios) {
    if (r < 1) throw ValidationError("believability ratios must be positive");
  }
  if (c.exposure.checkpoints.empty() || c.exposure.genres.empty()) {
    throw ValidationError("exposure needs genres and checkpoints");
  }
  for (int cp : c.exposure.checkpoints) {
    if (cp < 1) throw ValidationError("exposure checkpoints must be positive");
  }
  if (c.offline.k < 1) throw ValidationError("offline k must be at least 1");
  return c;
}

SessionConfig SessionConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what(), 0);
  }
  return from_json(j, path.parent_path());
}

BrainConfig SessionConfig::brain() const {
  BrainConfig b;
  b.item_type = item_type;
  b.k1 = k1;
  b.k2 = k2;
  b.delta_k = delta_k;
  b.max_rounds = max_rounds;
  b.page_cap = page_cap;
  b.reflect_every_page = reflect_every_page;
  b.blend.alpha = alpha;
  b.blend.embed_weight = embed_weight;
  b.blend.k2 = k2;
  return b;
}

json to_json(const SessionConfig& c) {
  return {
      {"ratings", c.ratings.string()},
      {"items", c.items.string()},
      {"fractions", {c.fractions.train, c.fractions.validation, c.fractions.test}},
      {"backend", {{"kind", c.backend.kind}, {"script", c.backend.script.string()}}},
      {"agents", c.agents},
      {"users", c.users},
      {"items_per_page", c.items_per_page},
      {"page_cap", c.page_cap},
      {"k1", c.k1},
      {"k2", c.k2},
      {"alpha", c.alpha},
      {"embed_weight", c.embed_weight},
      {"delta_k", c.delta_k},
      {"max_rounds", c.max_rounds},
      {"seed", c.seed},
      {"worker_cap", c.worker_cap},
      {"recommender", c.recommender},
      {"captions", c.captions},
      {"reflect_every_page", c.reflect_every_page},
      {"item_type", c.item_type},
      {"personas", c.personas},
      {"persona",
       {{"summary_sample", c.persona.summary_sample},
        {"candidates", c.persona.candidates},
        {"subsets", c.persona.subsets},
        {"subset_size", c.persona.subset_size},
        {"seed", c.persona.seed}}},
      {"mf",
       {{"rank", c.mf.rank},
        {"learning_rate", c.mf.learning_rate},
        {"regularization", c.mf.regularization},
        {"epochs", c.mf.epochs},
        {"seed", c.mf.seed},
        {"init_scale", c.mf.init_scale}}},
      {"output", c.output.string()},
      {"tasks",
       {{"believability",
         {{"ratios", c.believability.ratios},
          {"items_per_agent", c.believability.items_per_agent},
          {"popularity_matched", c.believability.popularity_matched}}},
        {"rating", {{"max_items", c.rating.max_items}}},
        {"coherence",
         {{"pairs_per_agent", c.coherence.pairs_per_agent}, {"hard_negatives", c.coherence.hard_negatives}}},
        {"exposure",
         {{"genres", c.exposure.genres},
          {"checkpoints", c.exposure.checkpoints},
          {"probe_genres", c.exposure.probe_genres},
          {"probes_per_genre", c.exposure.probes_per_genre}}},
        {"reviews", {{"modes", c.reviews.modes}}},
        {"offline", {{"recommenders", c.offline.recommenders}, {"k", c.offline.k}}}}},
  };
}

Environment::Environment(SessionConfig config) : Environment(config, make_backend(config.backend)) {}

Environment::Environment(SessionConfig config, std::shared_ptr<llm::LlmBackend> backend)
    : config_(std::move(config)) {
  data_ = load_dataset(config_.ratings, config_.items);
  split_ = time_split(data_.interactions, config_.fractions);
  held_out_ = split_.validation;
  held_out_.insert(held_out_.end(), split_.test.begin(), split_.test.end());
  const auto hidden = pairs_of(held_out_);
  for (const auto& r : split_.train) {
    if (!hidden.count({r.user_id, r.item_id})) history_.push_back(r);
  }
  history_by_user_ = group_by_user(history_);
  held_out_by_user_ = group_by_user(held_out_);

  const auto users = data_.users();
  graph_ = KnowledgeGraph::build(history_, data_.items, users);
  gateway_ = std::make_unique<llm::LlmGateway>(std::move(backend));
  if (config_.embed_weight > 0) semantic_ = std::make_unique<SemanticIndex>(*gateway_, data_.items);
  if (config_.captions != "off") captions_ = CaptionCache::load(config_.captions).finals();

  if (config_.personas != "llm") {
    std::ifstream in(config_.personas);
    if (!in) throw IOError("cannot open personas file " + config_.personas);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        auto row = json::parse(line);
        const auto user = row.at("user_id").get<std::string>();
        persona_file_[user] = std::move(row);
      } catch (const json::exception& e) {
        throw ParseError(std::string("bad persona row: ") + e.what(), n);
      }
    }
  }
}

std::span<const Interaction> Environment::user_history(const UserId& u) const {
  auto it = history_by_user_.find(u);
  if (it == history_by_user_.end()) return {};
  return it->second;
}

std::span<const Interaction> Environment::user_held_out(const UserId& u) const {
  auto it = held_out_by_user_.find(u);
  if (it == held_out_by_user_.end()) return {};
  return it->second;
}

std::vector<UserId> Environment::agent_users() const {
  if (!config_.users.empty()) {
    const auto all = data_.users();
    std::vector<UserId> out = config_.users;
    for (const auto& u : out) {
      if (std::find(all.begin(), all.end(), u) == all.end()) throw ValidationError("unknown user '" + u + "'");
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  std::vector<UserId> out;
  for (const auto& [u, rows] : history_by_user_) {
    if (out.size() == config_.agents) break;
    if (!rows.empty()) out.push_back(u);
  }
  return out;
}

PersonaRecord Environment::build_persona_record(const UserId& u) const {
  PersonaRecord rec;
  try {
    if (config_.personas != "llm") {
      auto it = persona_file_.find(u);
      if (it == persona_file_.end()) throw ValidationError("no persona row for " + u);
      rec.match = it->second;
      rec.persona = persona_from_json(it->second.at("persona"));
    } else {
      const auto match =
          build_persona(*gateway_, u, history_, data_.items, PersonaVocab::movielens(), config_.persona);
      rec.match = to_json(match);
      rec.persona = match.persona;
    }
  } catch (const Error& e) {
    rec.persona.reset();
    rec.error = e.what();
    rec.match = {{"user_id", u}, {"error", rec.error}};
    spdlog::warn("persona for {} failed: {}", u, rec.error);
  } catch (const json::exception& e) {
    rec.persona.reset();
    rec.error = e.what();
    rec.match = {{"user_id", u}, {"error", rec.error}};
  }
  return rec;
}

void Environment::prepare_personas(std::span<const UserId> users) {
  std::vector<UserId> missing;
  {
    std::lock_guard lock(persona_mutex_);
    for (const auto& u : users) {
      if (!personas_.count(u)) missing.push_back(u);
    }
  }
  std::vector<PersonaRecord> built(missing.size());
  parallel_for(missing.size(), config_.worker_cap, [&](std::size_t i) { built[i] = build_persona_record(missing[i]); });
  std::lock_guard lock(persona_mutex_);
  for (std::size_t i = 0; i < missing.size(); ++i) personas_.emplace(missing[i], std::move(built[i]));
}

const PersonaRecord& Environment::persona(const UserId& u) {
  {
    std::lock_guard lock(persona_mutex_);
    if (auto it = personas_.find(u); it != personas_.end()) return it->second;
  }
  auto rec = build_persona_record(u);
  std::lock_guard lock(persona_mutex_);
  return personas_.emplace(u, std::move(rec)).first->second;
}

std::unique_ptr<Agent> Environment::make_agent(const UserId& u, const BrainConfig& brain) {
  const auto& rec = persona(u);
  if (!rec.persona) throw Error("no persona for " + u + ": " + rec.error);
  auto agent = std::make_unique<Agent>(u, *rec.persona, *gateway_, graph_, data_.items, brain, semantic_.get());
  agent->seed_memory(user_history(u));
  return agent;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<AgentEngagement> SimulationReport::engagement() const {
  std::vector<AgentEngagement> out;
  for (const auto& a : agents) {
    if (a.failed || !a.session) continue;
    const auto& s = *a.session;
    out.push_back({a.agent_id, s.shown, s.watched, s.liked, s.exit_page, static_cast<double>(s.interview.rating)});
  }
  return out;
}

SimulationReport run_simulation(Environment& env, const Recommender& recommender, std::span<const UserId> users,
                                const RunOptions& options) {
  const auto brain = options.brain.value_or(env.config().brain());
  env.prepare_personas(users);
  SimulationReport report;
  report.agents.resize(users.size());
  parallel_for(users.size(), env.config().worker_cap, [&](std::size_t i) {
    AgentRun& run = report.agents[i];
    run.agent_id = users[i];
    const auto& rec = env.persona(users[i]);
    run.persona = rec.match;
    try {
      auto agent = env.make_agent(users[i], brain);
      const auto own = items_of(env.user_history(users[i]));
      const std::size_t n = env.config().items_per_page;
      const auto& uid = users[i];
      PageSource pages = [&](int page, const std::set<ItemId>& seen) {
        std::set<ItemId> exclude = own;
        exclude.insert(seen.begin(), seen.end());
        return recommender.recommend(uid, page, n, exclude);
      };
      SessionOptions so;
      so.captions = env.captions();
      so.extra = options.extra;
      Agent* raw = agent.get();
      if (options.after_turn) so.after_turn = [&, raw](int turn) { options.after_turn(*raw, turn); };
      run.session = agent->run_session(pages, so);
    } catch (const Error& e) {
      run.failed = true;
      run.error = e.what();
      spdlog::warn("agent {} failed: {}", users[i], run.error);
    }
  });
  std::sort(report.agents.begin(), report.agents.end(),
            [](const AgentRun& a, const AgentRun& b) { return a.agent_id < b.agent_id; });
  for (const auto& a : report.agents) report.failed += a.failed;
  return report;
}

EngagementMetrics compute_metrics(const SimulationReport& report) {
  const auto e = report.engagement();
  return compute_metrics(std::span<const AgentEngagement>(e));
}

json to_json(const TaskResult& t) { return {{"task", t.task}, {"records", t.records}, {"aggregates", t.aggregates}}; }

namespace {

// Per-agent work with failures captured; records come back in agent order.
struct AgentJobs {
  std::vector<json> records;  // one array per agent
  std::vector<std::string> errors;
};

AgentJobs for_each_agent(Environment& env, std::span<const UserId> users,
                         const std::function<json(const UserId&)>& job) {
  env.prepare_personas(users);
  AgentJobs out;
  out.records.assign(users.size(), json::array());
  out.errors.assign(users.size(), {});
  parallel_for(users.size(), env.config().worker_cap, [&](std::size_t i) {
    try {
      out.records[i] = job(users[i]);
    } catch (const Error& e) {
      out.errors[i] = e.what();
      spdlog::warn("agent {} failed: {}", users[i], out.errors[i]);
    }
  });
  return out;
}

json failures(std::span<const UserId> users, const AgentJobs& jobs) {
  json f = json::array();
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (!jobs.errors[i].empty()) f.push_back({{"agent_id", users[i]}, {"error", jobs.errors[i]}});
  }
  return f;
}

json flatten(const AgentJobs& jobs) {
  json all = json::array();
  for (const auto& r : jobs.records) {
    for (const auto& x : r) all.push_back(x);
  }
  return all;
}

std::vector<ItemId> popularity_matched(const std::vector<ItemId>& positives, std::vector<ItemId> pool,
                                       std::size_t per_positive, const std::map<ItemId, std::size_t>& counts,
                                       Rng& rng) {
  auto count = [&](const ItemId& id) {
    auto it = counts.find(id);
    return it == counts.end() ? 0.0 : static_cast<double>(it->second);
  };
  std::vector<ItemId> out;
  rng.shuffle(pool);
  for (const auto& p : positives) {
    const double target = count(p);
    std::stable_sort(pool.begin(), pool.end(), [&](const ItemId& a, const ItemId& b) {
      return std::abs(count(a) - target) < std::abs(count(b) - target);
    });
    const std::size_t take = std::min(per_positive, pool.size());
    out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    pool.erase(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

}  // namespace

TaskResult task_believability(Environment& env, int ratio) {
  if (ratio < 1) throw ValidationError("ratio must be at least 1");
  const auto& cfg = env.config();
  const auto users = env.agent_users();
  std::map<ItemId, std::size_t> counts;
  for (const auto& r : env.history()) ++counts[r.item_id];
  std::mutex skip_mutex;
  json skipped = json::array();

  auto jobs = for_each_agent(env, users, [&](const UserId& u) {
    json recs = json::array();
    const auto held = distinct_items(env.user_held_out(u));
    const std::size_t want = std::max<std::size_t>(1, cfg.believability.items_per_agent / (1 + ratio));
    const auto pool = unseen_items(env, u);
    Rng rng(derive_seed(cfg.seed, "believability:" + std::to_string(ratio) + ":" + u));
    std::vector<ItemId> positives;
    for (auto i : rng.sample_indices(held.size(), want)) positives.push_back(held[i]);
    const std::size_t negatives_wanted = positives.size() * static_cast<std::size_t>(ratio);
    if (positives.empty() || pool.size() < negatives_wanted) {
      std::lock_guard lock(skip_mutex);
      skipped.push_back(u);
      spdlog::info("believability: skipping {} ({} held-out, {} unseen)", u, held.size(), pool.size());
      return recs;
    }
    std::vector<ItemId> negatives;
    if (cfg.believability.popularity_matched) {
      negatives = popularity_matched(positives, pool, static_cast<std::size_t>(ratio), counts, rng);
    } else {
      for (auto i : rng.sample_indices(pool.size(), negatives_wanted)) negatives.push_back(pool[i]);
    }
    std::vector<std::pair<ItemId, bool>> questions;
    for (const auto& p : positives) questions.emplace_back(p, true);
    for (const auto& n : negatives) questions.emplace_back(n, false);
    rng.shuffle(questions);

    auto agent = env.make_agent(u, cfg.brain());
    for (const auto& [id, actual] : questions) {
      const auto answer = agent->classify_interacted(agent->page_item(id, env.captions()));
      recs.push_back({{"agent_id", u}, {"item_id", id}, {"actual", actual}, {"predicted", answer.interacted},
                      {"reason", answer.reason}});
    }
    return recs;
  });

  TaskResult t;
  t.task = "believability";
  t.records = flatten(jobs);
  Confusion c;
  for (const auto& r : t.records) c.add(r.at("actual").get<bool>(), r.at("predicted").get<bool>());
  t.aggregates = {{"ratio", ratio}, {"items", t.records.size()}, {"skipped", skipped},
                  {"failures", failures(users, jobs)}};
  if (!t.records.empty()) t.aggregates.update(to_json(classification_metrics(c)));
  std::sort(t.aggregates["skipped"].begin(), t.aggregates["skipped"].end());
  return t;
}

TaskResult task_rating(Environment& env) {
  const auto& cfg = env.config();
  const auto users = env.agent_users();
  const auto test = group_by_user(latest_per_pair(env.split().test));
  auto jobs = for_each_agent(env, users, [&](const UserId& u) {
    json recs = json::array();
    auto it = test.find(u);
    if (it == test.end()) return recs;
    auto rows = it->second;
    if (cfg.rating.max_items && rows.size() > cfg.rating.max_items) rows.resize(cfg.rating.max_items);
    auto agent = env.make_agent(u, cfg.brain());
    for (const auto& r : rows) {
      const auto v = agent->predict_rating(agent->page_item(r.item_id, env.captions()));
      recs.push_back({{"agent_id", u}, {"item_id", r.item_id}, {"truth", r.rating}, {"predicted", v.rating}});
    }
    return recs;
  });
  TaskResult t;
  t.task = "rating";
  t.records = flatten(jobs);
  std::vector<double> pred, truth;
  for (const auto& r : t.records) {
    pred.push_back(r.at("predicted").get<double>());
    truth.push_back(r.at("truth").get<double>());
  }
  t.aggregates = to_json(error_metrics(pred, truth));
  t.aggregates["failures"] = failures(users, jobs);
  return t;
}

std::vector<CoherencePair> coherence_pairs(const Environment& env, std::span<const UserId> users) {
  const auto& cfg = env.config();
  std::vector<CoherencePair> out;
  for (const auto& u : users) {
    std::set<ItemId> liked, disliked;
    for (const auto& r : latest_per_pair(env.user_held_out(u))) {
      if (r.rating >= 4) liked.insert(r.item_id);
      if (r.rating <= 2) disliked.insert(r.item_id);
    }
    const std::vector<ItemId> pos(liked.begin(), liked.end());
    const std::vector<ItemId> neg =
        cfg.coherence.hard_negatives ? std::vector<ItemId>(disliked.begin(), disliked.end()) : unseen_items(env, u);
    const std::size_t n = std::min({cfg.coherence.pairs_per_agent, pos.size(), neg.size()});
    Rng rng(derive_seed(cfg.seed, "coherence:" + u));
    const auto pi = rng.sample_indices(pos.size(), n);
    const auto ni = rng.sample_indices(neg.size(), n);
    for (std::size_t k = 0; k < n; ++k) out.push_back({u, pos[pi[k]], neg[ni[k]]});
  }
  return out;
}

TaskResult task_coherence(Environment& env, std::span<const CoherencePair> pairs) {
  std::map<UserId, std::vector<CoherencePair>> by_agent;
  const auto all_users = env.dataset().users();
  for (const auto& p : pairs) {
    if (p.agent_id.empty() || p.positive.empty() || p.negative.empty()) {
      throw ValidationError("coherence pair is missing a side");
    }
    if (!env.items().contains(p.positive) || !env.items().contains(p.negative)) {
      throw ValidationError("coherence pair names an unknown item");
    }
    if (std::find(all_users.begin(), all_users.end(), p.agent_id) == all_users.end()) {
      throw ValidationError("coherence pair names an unknown user");
    }
    by_agent[p.agent_id].push_back(p);
  }
  if (by_agent.empty()) throw EmptyReportError("no coherence pairs");
  std::vector<UserId> users;
  for (const auto& [u, _] : by_agent) users.push_back(u);

  auto jobs = for_each_agent(env, users, [&](const UserId& u) {
    json recs = json::array();
    auto agent = env.make_agent(u, env.config().brain());
    std::size_t idx = 0;
    for (const auto& p : by_agent.at(u)) {
      for (bool positive : {true, false}) {
        const ItemId& id = positive ? p.positive : p.negative;
        const auto d = agent->elicit_watch({agent->page_item(id, env.captions())});
        const bool accepted = std::find(d.final_watch.begin(), d.final_watch.end(), id) != d.final_watch.end();
        recs.push_back({{"agent_id", u}, {"pair", idx}, {"item_id", id},
                        {"role", positive ? "positive" : "negative"}, {"accepted", accepted},
                        {"coherent", accepted == positive}});
      }
      ++idx;
    }
    return recs;
  });

  TaskResult t;
  t.task = "coherence";
  t.records = flatten(jobs);
  std::size_t incoherent = 0, accepted_negatives = 0, rejected_positives = 0;
  for (const auto& r : t.records) {
    const bool positive = r.at("role") == "positive";
    const bool accepted = r.at("accepted").get<bool>();
    if (!positive && accepted) ++accepted_negatives;
    if (positive && !accepted) ++rejected_positives;
  }
  incoherent = accepted_negatives + rejected_positives;
  const std::size_t n = t.records.size();
  t.aggregates = {{"decisions", n},
                  {"incoherent", incoherent},
                  {"accepted_negatives", accepted_negatives},
                  {"rejected_positives", rejected_positives},
                  {"failures", failures(users, jobs)}};
  if (n) {
    t.aggregates["incoherence"] = static_cast<double>(incoherent) / static_cast<double>(n);
    t.aggregates["coherence"] = 1.0 - static_cast<double>(incoherent) / static_cast<double>(n);
  }
  return t;
}

TaskResult task_exposure(Environment& env) {
  const auto& cfg = env.config();
  const auto& ex = cfg.exposure;
  std::vector<int> checkpoints = ex.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());

  std::vector<std::string> genres = ex.probe_genres;
  if (genres.empty()) {
    std::set<std::string> all;
    for (const auto& it : env.items().items()) all.insert(it.genres.begin(), it.genres.end());
    genres.assign(all.begin(), all.end());
  }
  std::map<std::string, std::vector<ItemId>> probes;
  for (const auto& g : genres) {
    std::vector<ItemId> with;
    for (const auto& it : env.items().items()) {
      if (std::find(it.genres.begin(), it.genres.end(), g) != it.genres.end()) with.push_back(it.id);
    }
    std::sort(with.begin(), with.end());
    if (with.empty()) throw ValidationError("no catalog item has genre '" + g + "'");
    Rng rng(derive_seed(cfg.seed, "exposure:" + g));
    for (auto i : rng.sample_indices(with.size(), ex.probes_per_genre)) probes[g].push_back(with[i]);
  }

  BrainConfig brain = cfg.brain();
  brain.forbid_exit = true;
  brain.page_cap = std::max(brain.page_cap, checkpoints.back());
  GenreRestrictedRecommender rec(env.items(), ex.genres, cfg.seed);

  std::mutex m;
  std::map<UserId, json> probe_records;
  RunOptions opts;
  opts.brain = brain;
  const std::set<int> marks(checkpoints.begin(), checkpoints.end());
  opts.after_turn = [&](Agent& agent, int turn) {
    if (!marks.count(turn)) return;
    json recs = json::array();
    for (const auto& g : genres) {
      std::vector<double> ratings;
      json items = json::array();
      for (const auto& id : probes.at(g)) {
        const auto v = agent.predict_rating(agent.page_item(id, env.captions()));
        ratings.push_back(v.rating);
        items.push_back({{"item_id", id}, {"rating", v.rating}});
      }
      recs.push_back({{"agent_id", agent.id()}, {"checkpoint", turn}, {"genre", g},
                      {"mean_rating", mean(ratings)}, {"probes", items}});
    }
    std::lock_guard lock(m);
    auto& slot = probe_records[agent.id()];
    if (slot.is_null()) slot = json::array();
    for (auto& r : recs) slot.push_back(std::move(r));
  };
  const auto users = env.agent_users();
  const auto report = run_simulation(env, rec, users, opts);

  TaskResult t;
  t.task = "exposure";
  for (const auto& [u, recs] : probe_records) {
    for (const auto& r : recs) t.records.push_back(r);
  }
  json series = json::object();
  for (const auto& g : genres) {
    json means = json::array();
    for (int cp : checkpoints) {
      std::vector<double> v;
      for (const auto& r : t.records) {
        if (r.at("genre") == g && r.at("checkpoint") == cp) v.push_back(r.at("mean_rating").get<double>());
      }
      means.push_back(v.empty() ? json(nullptr) : json(mean(v)));
    }
    series[g] = means;
  }
  json fails = json::array();
  for (const auto& a : report.agents) {
    if (a.failed) fails.push_back({{"agent_id", a.agent_id}, {"error", a.error}});
  }
  t.aggregates = {{"checkpoints", checkpoints}, {"exposed_genres", ex.genres}, {"genres", series},
                  {"failures", fails}};
  return t;
}

std::function<std::string(const Item&)> review_display(const std::string& mode) {
  if (mode == "origin") return [](const Item&) { return std::string(); };
  if (mode == "with_count") {
    return [](const Item& it) {
      if (!it.review_count) throw ValidationError("item " + it.id + " has no review count");
      return std::to_string(*it.review_count) + " reviews";
    };
  }
  if (mode == "with_negative") {
    return [](const Item& it) {
      if (!it.negative_review) throw ValidationError("item " + it.id + " has no negative review");
      return "A viewer wrote: \"" + *it.negative_review + "\"";
    };
  }
  if (mode == "with_positive") {
    return [](const Item& it) {
      if (!it.positive_review) throw ValidationError("item " + it.id + " has no positive review");
      return "A viewer wrote: \"" + *it.positive_review + "\"";
    };
  }
  throw ValidationError("unknown review mode '" + mode + "'");
}

TaskResult task_review_influence(Environment& env, std::span<const std::string> modes) {
  if (modes.empty()) throw ValidationError("no review modes");
  // fail before any session starts
  for (const auto& mode : modes) {
    const auto show = review_display(mode);
    for (const auto& it : env.items().items()) show(it);
  }
  const auto& cfg = env.config();
  const auto rec = make_recommender(cfg.recommender, env.items(), env.history(), cfg.seed, cfg.mf);
  const auto users = env.agent_users();
  TaskResult t;
  t.task = "reviews";
  std::map<std::string, std::map<UserId, AgentEngagement>> per_mode;
  for (const auto& mode : modes) {
    RunOptions opts;
    opts.extra = review_display(mode);
    const auto report = run_simulation(env, *rec, users, opts);
    for (const auto& a : report.engagement()) {
      json r = to_json(a);
      r["mode"] = mode;
      t.records.push_back(std::move(r));
    }
    const auto e = report.engagement();
    t.aggregates[mode] = e.empty() ? json{{"failed", report.failed}}
                                   : engagement_json(compute_metrics(std::span<const AgentEngagement>(e)), report.failed);
    for (const auto& a : e) per_mode[mode][a.agent_id] = a;
  }
  // each mode against the first, over agents that completed both
  json tests = json::object();
  const auto& base = per_mode[modes.front()];
  for (const auto& mode : modes.subspan(1)) {
    std::vector<double> view, view0, like, like0;
    for (const auto& [id, a] : per_mode[mode]) {
      const auto it = base.find(id);
      if (it == base.end()) continue;
      const auto& b = it->second;
      view.push_back(a.shown ? double(a.watched) / double(a.shown) : 0.0);
      view0.push_back(b.shown ? double(b.watched) / double(b.shown) : 0.0);
      like.push_back(a.watched ? double(a.liked) / double(a.watched) : 0.0);
      like0.push_back(b.watched ? double(b.liked) / double(b.watched) : 0.0);
    }
    if (view.size() < 2) continue;
    tests[mode] = {{"p_view", to_json(paired_t_test(view, view0))}, {"p_like", to_json(paired_t_test(like, like0))}};
  }
  t.aggregates["paired_t_test"] = std::move(tests);
  return t;
}

TaskResult task_offline_compare(Environment& env) {
  const auto& cfg = env.config();
  const auto users = env.agent_users();
  const std::size_t k = cfg.offline.k;
  TaskResult t;
  t.task = "offline-compare";
  json per_rec = json::object();
  std::vector<std::pair<double, std::string>> by_truth, by_sim;
  for (const auto& id : cfg.offline.recommenders) {
    const auto rec = make_recommender(id, env.items(), env.history(), cfg.seed, cfg.mf);
    const auto report = run_simulation(env, *rec, users);
    std::vector<double> t_ndcg, t_f1, s_ndcg, s_f1;
    for (const auto& a : report.agents) {
      const auto ranked = rec->recommend(a.agent_id, 1, k, items_of(env.user_history(a.agent_id)));
      std::set<ItemId> truth;
      for (const auto& r : latest_per_pair(env.user_held_out(a.agent_id))) {
        if (r.rating > 3) truth.insert(r.item_id);
      }
      json row = {{"recommender", id}, {"agent_id", a.agent_id}, {"ranked", ranked}};
      if (!truth.empty()) {
        const auto m = ranking_metrics(ranked, truth, k);
        row["truth"] = to_json(m);
        t_ndcg.push_back(m.ndcg);
        t_f1.push_back(m.f1);
      }
      if (a.session) {
        std::set<ItemId> liked;
        for (const auto& v : a.session->verdicts) {
          if (v.rating > 3) liked.insert(v.item_id);
        }
        if (!liked.empty()) {
          const auto m = ranking_metrics(ranked, liked, k);
          row["sim"] = to_json(m);
          s_ndcg.push_back(m.ndcg);
          s_f1.push_back(m.f1);
        }
      } else {
        row["error"] = a.error;
      }
      t.records.push_back(std::move(row));
    }
    per_rec[id] = {{"truth_ndcg", mean(t_ndcg)}, {"truth_f1", mean(t_f1)}, {"truth_agents", t_ndcg.size()},
                   {"sim_ndcg", mean(s_ndcg)},   {"sim_f1", mean(s_f1)},   {"sim_agents", s_ndcg.size()},
                   {"failed", report.failed}};
    by_truth.emplace_back(mean(t_ndcg), id);
    by_sim.emplace_back(mean(s_ndcg), id);
  }
  auto order = [](std::vector<std::pair<double, std::string>> v) {
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    json out = json::array();
    for (const auto& [_, id] : v) out.push_back(id);
    return out;
  };
  t.aggregates = {{"k", k}, {"recommenders", per_rec}, {"ranking_truth", order(by_truth)},
                  {"ranking_sim", order(by_sim)}};
  return t;
}

std::vector<std::string> leakage_violations(const Environment& env,
                                            const std::map<UserId, const EpisodicMemory*>& memories) {
  std::vector<std::string> out;
  const auto& g = *env.graph();
  const auto& schema = g.schema();
  std::set<std::pair<UserId, ItemId>> reported;
  for (const auto& r : env.held_out()) {
    if (!reported.emplace(r.user_id, r.item_id).second) continue;
    const auto u = user_entity(r.user_id);
    const auto i = item_entity(r.item_id);
    bool in_graph = g.rating(r.user_id, r.item_id).has_value();
    for (const auto& rel : {schema.rating_relation(1), schema.rating_relation(3), schema.rating_relation(5)}) {
      in_graph = in_graph || g.contains({u, rel, i});
    }
    if (in_graph) out.push_back("graph: " + r.user_id + " " + r.item_id);

    auto m = memories.find(r.user_id);
    if (m == memories.end() || m->second == nullptr) continue;
    const Item* item = env.items().find(r.item_id);
    if (!item) continue;
    std::set<std::string> texts;
    for (int s = 1; s <= 5; ++s) texts.insert(seed_rating_text(item->title, s));
    for (const auto& e : m->second->entries()) {
      if (e.kind == MemoryKind::SeedRating && texts.count(e.text)) {
        out.push_back("memory: " + r.user_id + " " + r.item_id);
        break;
      }
    }
  }
  return out;
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IOError("cannot write " + p.string());
  out << text;
}

}  // namespace

void write_task_results(const std::filesystem::path& dir, std::span<const TaskResult> tasks) {
  std::filesystem::create_directories(dir);
  json all = json::array();
  for (const auto& t : tasks) all.push_back(to_json(t));
  write_text(dir / "task_results.json", all.dump(2) + "\n");
}

void write_run_dir(const std::filesystem::path& dir, const SessionConfig& config, const SimulationReport& report,
                   std::span<const TaskResult> tasks) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", to_json(config).dump(2) + "\n");

  std::string personas, traces, interviews;
  json failures = json::array();
  for (const auto& a : report.agents) {
    personas += a.persona.dump() + "\n";
    if (a.failed) failures.push_back({{"agent_id", a.agent_id}, {"error", a.error}});
    if (!a.session) continue;
    for (const auto& t : a.session->traces) traces += t.dump() + "\n";
    json iv = to_json(a.session->interview);
    iv["agent_id"] = a.agent_id;
    interviews += iv.dump() + "\n";
  }
  write_text(dir / "personas.jsonl", personas);
  write_text(dir / "traces.jsonl", traces);
  write_text(dir / "interviews.jsonl", interviews);

  json metrics = {{"failed", report.failed}, {"failures", failures}};
  json agents = json::array();
  const auto e = report.engagement();
  for (const auto& a : e) agents.push_back(to_json(a));
  metrics["agents"] = agents;
  metrics["metrics"] = e.empty() ? json(nullptr) : to_json(compute_metrics(std::span<const AgentEngagement>(e)));
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  write_task_results(dir, tasks);
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "table") return ReportFormat::Table;
  if (s == "json") return ReportFormat::Json;
  if (s == "plot-data") return ReportFormat::PlotData;
  throw ValidationError("unknown report format '" + std::string(s) + "'");
}

namespace {

std::vector<json> read_jsonl(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IOError("cannot open " + p.string());
  std::vector<json> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError(p.filename().string() + ": " + e.what(), n);
    }
  }
  return rows;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string render_report(const std::filesystem::path& dir, ReportFormat format) {
  std::map<std::string, std::vector<json>> traces;
  for (auto& t : read_jsonl(dir / "traces.jsonl")) traces[t.at("agent_id").get<std::string>()].push_back(std::move(t));
  std::map<std::string, json> interviews;
  for (auto& i : read_jsonl(dir / "interviews.jsonl")) {
    const auto id = i.at("agent_id").get<std::string>();
    interviews[id] = std::move(i);
  }

  std::vector<AgentEngagement> agents;
  for (const auto& [id, iv] : interviews) {
    auto it = traces.find(id);
    const std::vector<json> none;
    agents.push_back(engagement_from_traces(id, it == traces.end() ? none : it->second, iv));
  }
  json tasks = json::array();
  if (std::ifstream in(dir / "task_results.json"); in) tasks = json::parse(in);

  std::ostringstream out;
  if (format == ReportFormat::Json) {
    json j;
    j["metrics"] = agents.empty() ? json(nullptr) : to_json(compute_metrics(std::span<const AgentEngagement>(agents)));
    j["agents"] = json::array();
    for (const auto& a : agents) j["agents"].push_back(to_json(a));
    j["tasks"] = json::object();
    for (const auto& t : tasks) j["tasks"][t.at("task").get<std::string>()] = t.at("aggregates");
    out << j.dump(2) << "\n";
  } else if (format == ReportFormat::PlotData) {
    out << "agent_id\tshown\twatched\tliked\texit_page\tsatisfaction\n";
    for (const auto& a : agents) {
      out << a.agent_id << '\t' << a.shown << '\t' << a.watched << '\t' << a.liked << '\t' << a.exit_page << '\t'
          << a.satisfaction << "\n";
    }
    for (const auto& t : tasks) {
      if (t.at("task") != "exposure") continue;
      out << "\ngenre\tcheckpoint\tmean_rating\n";
      const auto& agg = t.at("aggregates");
      const auto& cps = agg.at("checkpoints");
      for (const auto& [g, means] : agg.at("genres").items()) {
        for (std::size_t i = 0; i < cps.size(); ++i) {
          out << g << '\t' << cps[i] << '\t' << (means[i].is_null() ? std::string("nan") : fmt(means[i].get<double>()))
              << "\n";
        }
      }
    }
  } else {
    if (agents.empty()) {
      out << "no completed agents\n";
    } else {
      const auto m = compute_metrics(std::span<const AgentEngagement>(agents));
      out << "agents  P_view  N_like  P_like  N_exit  S_sat\n";
      out << m.agents << "  " << fmt(m.p_view) << "  " << fmt(m.n_like) << "  " << fmt(m.p_like) << "  "
          << fmt(m.n_exit) << "  " << fmt(m.s_sat) << "\n";
    }
    for (const auto& t : tasks) {
      out << "\n[" << t.at("task").get<std::string>() << "]\n";
      for (const auto& [key, v] : t.at("aggregates").items()) {
        if (v.is_number_float()) {
          out << "  " << key << ": " << fmt(v.get<double>()) << "\n";
        } else if (!(v.is_array() && v.empty())) {
          out << "  " << key << ": " << v.dump() << "\n";
        }
      }
    }
  }
  return out.str();
}

std::vector<TaskResult> run_task(Environment& env, std::string_view name) {
  std::vector<TaskResult> out;
  if (name == "believability") {
    for (int r : env.config().believability.ratios) out.push_back(task_believability(env, r));
  } else if (name == "rating") {
    out.push_back(task_rating(env));
  } else if (name == "coherence") {
    const auto users = env.agent_users();
    out.push_back(task_coherence(env, coherence_pairs(env, users)));
  } else if (name == "exposure") {
    out.push_back(task_exposure(env));
  } else if (name == "reviews") {
    out.push_back(task_review_influence(env, env.config().reviews.modes));
  } else if (name == "offline-compare") {
    out.push_back(task_offline_compare(env));
  } else {
    throw ValidationError("unknown task '" + std::string(name) + "'");
  }
  return out;
}

void require_no_leakage(const Environment& env) {
  const auto v = leakage_violations(env, {});
  if (!v.empty()) throw ValidationError("held-out interactions leaked into the graph: " + v.front());
}

}  // namespace simuser
