#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "simuser/brain.hpp"
#include "simuser/dataset.hpp"
#include "simuser/error.hpp"
#include "simuser/llm/gateway.hpp"
#include "simuser/llm/http_backend.hpp"
#include "simuser/llm/prompts.hpp"
#include "simuser/llm/scripted_backend.hpp"
#include "simuser/memory_kg.hpp"
#include "simuser/perception.hpp"
#include "simuser/persona.hpp"
#include "simuser/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace simuser;

namespace {

std::shared_ptr<llm::LlmBackend> backend_for(const std::string& script) {
  if (!script.empty()) return std::make_shared<llm::ScriptedBackend>(llm::ScriptedBackend::from_file(script));
  return std::make_shared<llm::HttpBackend>(llm::HttpBackendConfig::from_env());
}

// Embedding-only commands still work offline: without a script or endpoint
// a rule-less scripted backend supplies hash embeddings.
std::shared_ptr<llm::LlmBackend> embedding_backend(const std::string& script) {
  if (script.empty() && !std::getenv("LLM_ENDPOINT")) {
    return std::make_shared<llm::ScriptedBackend>(std::vector<llm::ScriptRule>{});
  }
  return backend_for(script);
}

InteractionDataset dataset_dir(const fs::path& dir) { return load_dataset(dir / "ratings.tsv", dir / "items.tsv"); }

SplitFractions parse_fractions(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      v.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw ValidationError("bad fraction '" + part + "'");
    }
  }
  if (v.size() != 3) throw ValidationError("--fractions needs three comma-separated values");
  return {v[0], v[1], v[2]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simuser: LLM user simulation for recommender evaluation"};
  app.require_subcommand(1);
  std::string script;
  bool verbose = false;
  app.add_option("--script", script, "scripted backend file (default: LLM_* environment)");
  app.add_flag("-v,--verbose", verbose, "debug logging");

  // dataset
  auto* dataset = app.add_subcommand("dataset", "validate or split interaction data");
  dataset->require_subcommand(1);
  std::string ratings_path, items_path, fractions = "0.8,0.1,0.1", out_dir;
  auto* validate = dataset->add_subcommand("validate", "load and check a ratings/items pair");
  validate->add_option("ratings", ratings_path)->required();
  validate->add_option("items", items_path)->required();
  auto* split = dataset->add_subcommand("split", "time-ordered train/validation/test split");
  split->add_option("ratings", ratings_path)->required();
  split->add_option("--fractions", fractions);
  split->add_option("--out", out_dir)->required();

  // gateway
  auto* gateway = app.add_subcommand("gateway", "LLM backend utilities");
  gateway->require_subcommand(1);
  auto* probe = gateway->add_subcommand("probe", "one round trip through the configured backend");

  // persona
  std::string data_dir, out_file;
  std::vector<std::string> users;
  std::size_t subsets = 3, subset_size = 10, candidates = 5;
  std::uint64_t seed = 7;
  auto* persona = app.add_subcommand("persona", "persona generation");
  persona->require_subcommand(1);
  auto* match = persona->add_subcommand("match", "build and match personas for users");
  match->add_option("--dataset", data_dir, "directory with ratings.tsv and items.tsv")->required();
  match->add_option("--user", users, "user id (repeatable; default all)");
  match->add_option("--j", subsets, "consistency rounds");
  match->add_option("--rho", subset_size, "items per consistency subset");
  match->add_option("--m", candidates, "candidate personas");
  match->add_option("--seed", seed);
  match->add_option("--out", out_file, "append matches as JSONL")->required();

  // kg
  std::string user, item;
  std::size_t k = 3;
  double alpha = 0.8, embed_weight = 0.25;
  int max_length = 3;
  auto* kg = app.add_subcommand("kg", "knowledge graph over the training split");
  kg->require_subcommand(1);
  auto* stats = kg->add_subcommand("stats", "node and edge counts");
  stats->add_option("--dataset", data_dir)->required();
  auto* similar = kg->add_subcommand("similar", "items similar to one item for one user");
  similar->add_option("--dataset", data_dir)->required();
  similar->add_option("--user", user)->required();
  similar->add_option("--item", item)->required();
  similar->add_option("--k", k);
  similar->add_option("--alpha", alpha)->check(CLI::Range(0.0, 1.0));
  similar->add_option("--embed-weight", embed_weight)->check(CLI::Range(0.0, 1.0));
  similar->add_option("--max-length", max_length)->check(CLI::Range(1, 6));

  // perceive
  auto* perceive = app.add_subcommand("perceive", "thumbnail captioning");
  perceive->require_subcommand(1);
  std::size_t workers = 4;
  auto* captions = perceive->add_subcommand("captions", "caption every item with a thumbnail");
  captions->add_option("--items", items_path)->required();
  captions->add_option("--out", out_file, "caption cache (JSONL), extended in place")->required();
  captions->add_option("--workers", workers);

  // simulation
  std::string config_path, run_dir, format = "table", task_name;
  auto* run = app.add_subcommand("run", "simulate sessions and write a run directory");
  run->add_option("--config", config_path)->required();
  auto* task = app.add_subcommand("task", "run one evaluation task");
  task->add_option("name", task_name)
      ->required()
      ->check(CLI::IsMember({"believability", "rating", "coherence", "exposure", "reviews", "offline-compare"}));
  task->add_option("--config", config_path)->required();
  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("run_dir", run_dir)->required();
  report->add_option("--format", format)->check(CLI::IsMember({"table", "json", "plot-data"}));

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("simuser"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    if (validate->parsed()) {
      const auto ds = load_dataset(ratings_path, items_path);
      std::cout << "ok: " << ds.interactions.size() << " interactions, " << ds.users().size() << " users, "
                << ds.items.size() << " items\n";
    } else if (split->parsed()) {
      const auto rows = load_ratings(ratings_path);
      const auto s = time_split(rows, parse_fractions(fractions));
      fs::create_directories(out_dir);
      write_ratings(fs::path(out_dir) / "train.tsv", s.train);
      write_ratings(fs::path(out_dir) / "validation.tsv", s.validation);
      write_ratings(fs::path(out_dir) / "test.tsv", s.test);
      std::cout << "train " << s.train.size() << ", validation " << s.validation.size() << ", test "
                << s.test.size() << "\n";
    } else if (probe->parsed()) {
      llm::LlmGateway gw(backend_for(script));
      const auto r = gw.complete(llm::tags::kGatewayProbe, {});
      std::cout << "backend " << r.backend_id << ", attempt " << r.attempt << ": " << r.parsed->text("REPLY") << "\n";
      const auto e = gw.embed("probe");
      std::cout << "embedding dim " << e.dim() << "\n";
    } else if (match->parsed()) {
      const auto ds = dataset_dir(data_dir);
      const auto s = time_split(ds.interactions);
      llm::LlmGateway gw(backend_for(script));
      PersonaConfig cfg;
      cfg.subsets = subsets;
      cfg.subset_size = subset_size;
      cfg.candidates = candidates;
      cfg.seed = seed;
      if (users.empty()) users = ds.users();
      std::ofstream out(out_file, std::ios::app);
      if (!out) throw IOError("cannot write " + out_file);
      int failed = 0;
      for (const auto& u : users) {
        try {
          const auto m = build_persona(gw, u, s.train, ds.items, PersonaVocab::movielens(), cfg);
          out << to_json(m).dump() << "\n";
          std::cout << u << ": candidate " << m.chosen << " (" << m.persona.age << ", " << m.persona.occupation
                    << ", " << pickiness_label(m.persona.pickiness) << ")\n";
        } catch (const Error& e) {
          ++failed;
          std::cerr << u << ": " << e.what() << "\n";
        }
      }
      if (failed) return 1;
    } else if (stats->parsed()) {
      const auto ds = dataset_dir(data_dir);
      const auto s = time_split(ds.interactions);
      const auto users_all = ds.users();
      const auto g = KnowledgeGraph::build(s.train, ds.items, users_all);
      const auto st = graph_stats(*g);
      std::cout << "nodes " << st.nodes << "\nedges " << st.edges << "\n";
      for (const auto& [t, n] : st.nodes_by_type) std::cout << "  node " << t << ": " << n << "\n";
      for (const auto& [r, n] : st.edges_by_relation) std::cout << "  edge " << r << ": " << n << "\n";
    } else if (similar->parsed()) {
      const auto ds = dataset_dir(data_dir);
      const auto s = time_split(ds.interactions);
      const auto users_all = ds.users();
      const auto g = KnowledgeGraph::build(s.train, ds.items, users_all);
      llm::LlmGateway gw(embedding_backend(script));
      SemanticIndex sem(gw, ds.items);
      GraphOverlay overlay(g);
      BlendParams p;
      p.alpha = alpha;
      p.embed_weight = embed_weight;
      p.k2 = k;
      p.max_length = max_length;
      auto found = retrieve_similar(overlay, user, item, p, &sem);
      if (found.size() > k) found.resize(k);
      for (const auto& f : found) {
        std::cout << f.item << "\t" << f.title << "\tscore " << f.breakdown.final_score << " (item "
                  << f.breakdown.item_item << ", user " << f.breakdown.user_item << ", semantic "
                  << f.breakdown.semantic << ")\n";
        for (const auto& path : f.paths) std::cout << "    " << path << "\n";
      }
    } else if (captions->parsed()) {
      const auto table = load_items(items_path);
      llm::LlmGateway gw(backend_for(script));
      auto cache = CaptionCache::load(out_file);
      auto batch = caption_items(gw, table.items(), cache, {}, workers);
      cache.save(out_file);
      std::cout << batch.captions.size() << " captioned, " << batch.skipped.size() << " skipped, "
                << batch.provider_calls << " provider calls\n";
      for (const auto& [id, why] : batch.skipped) std::cerr << "skipped " << id << ": " << why << "\n";
    } else if (run->parsed()) {
      auto cfg = SessionConfig::load(config_path);
      Environment env(cfg);
      require_no_leakage(env);
      const auto rec = make_recommender(cfg.recommender, env.items(), env.history(), cfg.seed, cfg.mf);
      const auto agents = env.agent_users();
      const auto rep = run_simulation(env, *rec, agents);
      write_run_dir(cfg.output, cfg, rep, {});
      std::cout << render_report(cfg.output, ReportFormat::Table);
      std::cout << "run written to " << cfg.output.string() << " (" << rep.failed << " failed)\n";
    } else if (task->parsed()) {
      auto cfg = SessionConfig::load(config_path);
      Environment env(cfg);
      require_no_leakage(env);
      const auto results = run_task(env, task_name);
      fs::create_directories(cfg.output);
      {
        std::ofstream out(cfg.output / "config.json");
        out << to_json(cfg).dump(2) << "\n";
      }
      write_task_results(cfg.output, results);
      for (const auto& r : results) std::cout << r.task << " " << r.aggregates.dump() << "\n";
    } else if (report->parsed()) {
      std::cout << render_report(run_dir, parse_report_format(format));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
