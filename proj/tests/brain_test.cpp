#include <gtest/gtest.h>

#include "simuser/brain.hpp"
#include "simuser/error.hpp"
#include "simuser/llm/prompts.hpp"
#include "test_support.hpp"

using namespace simuser;
using namespace simuser::testing;
namespace tags = simuser::llm::tags;

namespace {

ItemTable catalog() {
  return ItemTable({make_item("i1", {"Horror"}), make_item("i2", {"Horror"}), make_item("i3", {"Comedy"}),
                    make_item("i4", {"Comedy"}), make_item("i5", {"Drama"}), make_item("i6", {"Drama"})});
}

std::vector<Interaction> train() {
  return {{"u1", "i2", 5, 1}, {"u1", "i3", 1, 2}, {"u2", "i1", 4, 3}, {"u2", "i2", 4, 4}, {"u2", "i4", 3, 5}};
}

Persona persona() {
  Persona p;
  p.age = 25;
  p.occupation = "writer";
  p.pickiness = Pickiness::ModeratelyPicky;
  p.taste_summary = "Enjoys horror, avoids slapstick.";
  return p;
}

std::vector<llm::ScriptRule> base_rules() {
  return {always(tags::kSelfAsk, "QUESTION: What do I enjoy?"),
          always(tags::kWatchDecision, "WATCH: none\nCONTRADICTION: none"),
          always(tags::kItemRating, "RATING: 4, FEELING: fun"),
          always(tags::kActionSatisfaction, "SATISFACTION: SATISFIED"),
          always(tags::kActionFatigue, "FATIGUE: LOW"),
          always(tags::kActionEmotion, "EMOTION: excited"),
          always(tags::kActionChoice, "ACTION: NEXT"),
          always(tags::kClickDetail, "ENGAGE: YES"),
          always(tags::kCausalQuestions, "QUESTION: What would happen if you exited the system now?"),
          always(tags::kCausalOutcome, "SCORE: 0.9\nVERDICT: fine"),
          always(tags::kActionRefine, "ACTION: NEXT"),
          always(tags::kReflectionTopics, "TOPIC: what I like"),
          always(tags::kReflectionInsights, "INSIGHT: I like horror\nCITES: 0"),
          always(tags::kExitInterview, "RATING: 7\nREASON: decent picks")};
}

struct Harness {
  explicit Harness(std::vector<llm::ScriptRule> extra, BrainConfig cfg = no_semantic()) {
    // equally specific rules go to the first registered, so overrides lead
    auto base = base_rules();
    extra.insert(extra.end(), base.begin(), base.end());
    backend = script(std::move(extra));
    gateway = std::make_unique<llm::LlmGateway>(backend);
    const auto t = train();
    kg = KnowledgeGraph::build(t, items);
    agent = std::make_unique<Agent>("u1", persona(), *gateway, kg, items, cfg);
    std::vector<Interaction> own{t[0], t[1]};
    agent->seed_memory(own);
  }

  static BrainConfig no_semantic() {
    BrainConfig c;
    c.blend.embed_weight = 0;
    return c;
  }

  std::vector<PageItem> page(std::initializer_list<const char*> ids) const {
    std::vector<PageItem> out;
    for (const auto* id : ids) out.push_back(agent->page_item(id));
    return out;
  }

  std::size_t calls(const std::string& tag) const {
    std::size_t n = 0;
    for (const auto& c : backend->calls()) n += c.tag == tag;
    return n;
  }

  std::vector<llm::CallRecord> calls_of(const std::string& tag) const {
    std::vector<llm::CallRecord> out;
    for (const auto& c : backend->calls()) {
      if (c.tag == tag) out.push_back(c);
    }
    return out;
  }

  ItemTable items = catalog();
  std::shared_ptr<llm::ScriptedBackend> backend;
  std::unique_ptr<llm::LlmGateway> gateway;
  std::shared_ptr<const KnowledgeGraph> kg;
  std::unique_ptr<Agent> agent;
};

}  // namespace

TEST(Brain, HelperRules) {
  EXPECT_EQ(fatigue_hint(1), Fatigue::Low);
  EXPECT_EQ(fatigue_hint(3), Fatigue::Low);
  EXPECT_EQ(fatigue_hint(4), Fatigue::Medium);
  EXPECT_EQ(fatigue_hint(7), Fatigue::Medium);
  EXPECT_EQ(fatigue_hint(8), Fatigue::High);
  EXPECT_DOUBLE_EQ(normalize_probe_score(0.3), 0.3);
  EXPECT_DOUBLE_EQ(normalize_probe_score(7), 0.7);
  EXPECT_DOUBLE_EQ(normalize_probe_score(-1), 0.0);
  EXPECT_DOUBLE_EQ(normalize_probe_score(42), 1.0);
  EXPECT_TRUE(is_no_contradiction("none"));
  EXPECT_TRUE(is_no_contradiction("consistent"));
  EXPECT_TRUE(is_no_contradiction(" No. "));
  EXPECT_TRUE(is_no_contradiction(""));
  EXPECT_FALSE(is_no_contradiction("persona dislikes horror"));
  EXPECT_EQ(parse_action("[previous]"), ActionKind::Previous);
  EXPECT_THROW(parse_action("JUMP"), ValidationError);
}

TEST(Brain, TwoRoundElicitationFinalSkips) {
  Harness h({when(tags::kWatchDecision, {{"_round", "^0$"}},
                  "WATCH: i1\nCONTRADICTION: persona dislikes horror"),
             when(tags::kWatchDecision, {{"_round", "^1$"}}, "WATCH: none\nSKIP: i1\nCONTRADICTION: consistent")});
  const auto d = h.agent->elicit_watch(h.page({"i1", "i3"}));
  ASSERT_EQ(d.rounds.size(), 2u);
  EXPECT_EQ(d.rounds[0].watch, std::vector<ItemId>{"i1"});
  EXPECT_EQ(d.rounds[0].contradiction, "persona dislikes horror");
  EXPECT_TRUE(d.rounds[1].contradiction.empty());
  EXPECT_EQ(d.rounds[1].skip, std::vector<ItemId>{"i1"});
  EXPECT_TRUE(d.final_watch.empty());
  EXPECT_EQ(d.rounds[0].k1, 5u);
  EXPECT_EQ(d.rounds[1].k1, 7u);
  EXPECT_EQ(d.rounds[1].k2, 5u);
  // the second round sees the first decision and re-queries memory
  const auto prompts = h.calls_of(tags::kWatchDecision);
  EXPECT_NE(prompts[1].prompt.find("persona dislikes horror"), std::string::npos);
  EXPECT_EQ(h.calls(tags::kSelfAsk), 2u);
  EXPECT_NE(prompts[0].prompt.find("You are moderately picky about movie"), std::string::npos);
}

TEST(Brain, ImmediateConsistencyStopsAfterOneRound) {
  Harness h({always(tags::kWatchDecision, "WATCH: i3\nSKIP: i1\nCONTRADICTION: none")});
  const auto d = h.agent->elicit_watch(h.page({"i1", "i3"}));
  ASSERT_EQ(d.rounds.size(), 1u);
  EXPECT_EQ(d.rounds[0].k1, 5u);
  EXPECT_EQ(d.rounds[0].k2, 3u);
  EXPECT_EQ(d.final_watch, std::vector<ItemId>{"i3"});
}

TEST(Brain, PersistentContradictionExpandsToMaxRounds) {
  Harness h({always(tags::kWatchDecision, "WATCH: i1\nCONTRADICTION: still unsure")});
  const auto d = h.agent->elicit_watch(h.page({"i1"}));
  ASSERT_EQ(d.rounds.size(), 3u);
  EXPECT_EQ(d.rounds.back().k1, 9u);
  EXPECT_EQ(d.rounds.back().k2, 7u);
  for (std::size_t t = 1; t < d.rounds.size(); ++t) {
    EXPECT_EQ(d.rounds[t].k1, d.rounds[t - 1].k1 + 2);
    EXPECT_EQ(d.rounds[t].k2, d.rounds[t - 1].k2 + 2);
  }
  EXPECT_EQ(d.final_watch, std::vector<ItemId>{"i1"});
}

TEST(Brain, WatchOfItemNotOnPageIsRejected) {
  Harness h({always(tags::kWatchDecision, "WATCH: i9\nCONTRADICTION: none")});
  EXPECT_THROW(h.agent->elicit_watch(h.page({"i1"})), LlmFormatError);
  EXPECT_EQ(h.calls(tags::kWatchDecision), 2u);
}

TEST(Brain, RatingGrowsLikedEdgeAndFeelingMemory) {
  Harness h({always(tags::kItemRating, "RATING: 5, FEELING: loved the pacing")});
  const auto before = h.agent->memory().size();
  const auto v = h.agent->evaluate_items(h.page({"i1"}));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rating, 5);
  EXPECT_EQ(v[0].feeling, "loved the pacing");
  EXPECT_TRUE(h.agent->graph().contains({"user:u1", "liked", "item:i1"}));
  EXPECT_FALSE(h.kg->contains({"user:u1", "liked", "item:i1"}));
  ASSERT_EQ(h.agent->memory().size(), before + 1);
  EXPECT_EQ(h.agent->memory().entries().back().kind, MemoryKind::Feeling);
  EXPECT_NE(h.agent->memory().entries().back().text.find("loved the pacing"), std::string::npos);
  // i1 shares a genre with i2, which u1 liked: the path reaches the prompt
  const auto prompt = h.calls_of(tags::kItemRating).back().prompt;
  EXPECT_NE(prompt.find("u1 →liked→ Title i2"), std::string::npos);
  EXPECT_FALSE(v[0].cited_paths.empty());
}

TEST(Brain, LowRatingGrowsDislikedEdge) {
  Harness h({always(tags::kItemRating, "RATING: 2, FEELING: dull")});
  h.agent->evaluate_items(h.page({"i5"}));
  EXPECT_TRUE(h.agent->graph().contains({"user:u1", "disliked", "item:i5"}));
}

TEST(Brain, RatingOutOfRangeFailsAfterRetry) {
  Harness h({always(tags::kItemRating, "RATING: 6, FEELING: wow")});
  EXPECT_THROW(h.agent->evaluate_items(h.page({"i5"})), LlmFormatError);
  EXPECT_EQ(h.calls(tags::kItemRating), 2u);
}

TEST(Brain, ActionSelectionFourSubSteps) {
  Harness h({});
  const auto plan = h.agent->select_action(h.page({"i1", "i2"}));
  EXPECT_EQ(plan.tentative.kind, ActionKind::Next);
  EXPECT_EQ(h.agent->satisfaction(), "SATISFIED");
  EXPECT_EQ(h.agent->fatigue(), Fatigue::Low);
  EXPECT_EQ(h.agent->emotion(), "EXCITED");
  const auto calls = h.backend->calls();
  ASSERT_EQ(calls.size(), 4u);
  EXPECT_EQ(calls[0].tag, tags::kActionSatisfaction);
  EXPECT_EQ(calls[1].tag, tags::kActionFatigue);
  EXPECT_EQ(calls[2].tag, tags::kActionEmotion);
  EXPECT_EQ(calls[3].tag, tags::kActionChoice);
  EXPECT_NE(calls[3].prompt.find("Allowed: EXIT, NEXT, CLICK."), std::string::npos);
}

TEST(Brain, PreviousOnFirstPageIsIllegal) {
  Harness h({always(tags::kActionChoice, "ACTION: PREVIOUS")});
  EXPECT_THROW(h.agent->select_action(h.page({"i1"})), LlmFormatError);
  const auto choice = h.calls_of(tags::kActionChoice);
  ASSERT_EQ(choice.size(), 2u);
  EXPECT_NE(choice[1].prompt.find(llm::kRetryInstruction), std::string::npos);
}

TEST(Brain, NextAtPageCapIsIllegal) {
  BrainConfig cfg = Harness::no_semantic();
  cfg.page_cap = 2;
  Harness h({always(tags::kActionChoice, "ACTION: NEXT")}, cfg);
  h.agent->set_page(2);
  EXPECT_THROW(h.agent->select_action(h.page({"i1"})), LlmFormatError);
  EXPECT_EQ(h.calls(tags::kActionChoice), 2u);

  Harness ok({llm::ScriptRule{tags::kActionChoice, {}, {"ACTION: NEXT", "ACTION: PREVIOUS"}, false}}, cfg);
  ok.agent->set_page(2);
  EXPECT_EQ(ok.agent->select_action(ok.page({"i1"})).tentative.kind, ActionKind::Previous);
}

TEST(Brain, FatigueNeverDecreases) {
  Harness h({llm::ScriptRule{tags::kActionFatigue, {}, {"FATIGUE: HIGH", "FATIGUE: LOW"}, false}});
  h.agent->select_action(h.page({"i1"}));
  EXPECT_EQ(h.agent->fatigue(), Fatigue::High);
  h.agent->select_action(h.page({"i1"}));
  EXPECT_EQ(h.agent->fatigue(), Fatigue::High);
}

TEST(Brain, ClickRunsDetailSubTurnThenRequeriesWithoutClick) {
  Harness h({llm::ScriptRule{tags::kActionChoice, {}, {"ACTION: CLICK\nITEM: i2", "ACTION: EXIT"}, false},
             always(tags::kClickDetail, "ENGAGE: NO\nREASON: too gory")});
  const auto plan = h.agent->select_action(h.page({"i1", "i2"}));
  ASSERT_TRUE(plan.click);
  EXPECT_EQ(plan.click->item, "i2");
  EXPECT_FALSE(plan.click->engaged);
  EXPECT_EQ(plan.tentative.kind, ActionKind::Exit);
  const auto choice = h.calls_of(tags::kActionChoice);
  ASSERT_EQ(choice.size(), 2u);
  EXPECT_NE(choice[1].prompt.find("did not want to engage further: too gory"), std::string::npos);
  EXPECT_NE(choice[1].prompt.find("Allowed: EXIT, NEXT. For"), std::string::npos);
}

TEST(Brain, RefinementKeepsTentativeOnHighConsistency) {
  Harness h({});
  ActionPlan plan;
  plan.tentative = plan.final_action = {ActionKind::Next, {}};
  const auto out = h.agent->refine_action(plan);
  EXPECT_EQ(out.final_action.kind, ActionKind::Next);
  ASSERT_EQ(out.probes.size(), 1u);
  EXPECT_DOUBLE_EQ(out.probes[0].score, 0.9);
  EXPECT_FALSE(out.refined);
  EXPECT_EQ(h.calls(tags::kActionRefine), 0u);
}

TEST(Brain, LowConsistencyExitBecomesNext) {
  Harness h({always(tags::kCausalQuestions, "QUESTION: What would happen if you exited the system now?"),
             always(tags::kCausalOutcome, "SCORE: 0.1\nVERDICT: exiting now loses a promising page"),
             always(tags::kActionRefine, "ACTION: NEXT")});
  ActionPlan plan;
  plan.tentative = plan.final_action = {ActionKind::Exit, {}};
  const auto out = h.agent->refine_action(plan);
  EXPECT_EQ(out.tentative.kind, ActionKind::Exit);
  EXPECT_EQ(out.final_action.kind, ActionKind::Next);
  EXPECT_TRUE(out.refined);
  const auto prompt = h.calls_of(tags::kActionRefine).back().prompt;
  EXPECT_NE(prompt.find("exiting now loses a promising page"), std::string::npos);
}

TEST(Brain, ZeroQuestionsOrDegradationKeepTentative) {
  Harness h({always(tags::kCausalQuestions, "I have no questions.")});
  ActionPlan plan;
  plan.tentative = plan.final_action = {ActionKind::Exit, {}};
  auto out = h.agent->refine_action(plan);
  EXPECT_TRUE(out.probes.empty());
  EXPECT_EQ(out.final_action.kind, ActionKind::Exit);

  Harness bad({always(tags::kCausalOutcome, "no score here")});
  out = bad.agent->refine_action(plan);
  EXPECT_TRUE(out.degraded);
  EXPECT_EQ(out.final_action.kind, ActionKind::Exit);
}

TEST(Brain, ReflectionStoresCitedInsights) {
  Harness h({always(tags::kReflectionInsights,
                    "INSIGHT: I enjoy horror\nCITES: 0, 2\nINSIGHT: I avoid slapstick\nCITES: 1")});
  const auto before = h.agent->memory().size();
  const auto out = h.agent->reflect({"record a", "record b", "record c"});
  ASSERT_EQ(out.size(), 2u);
  const auto& entries = h.agent->memory().entries();
  ASSERT_EQ(entries.size(), before + 2);
  EXPECT_EQ(entries[before].kind, MemoryKind::Reflection);
  EXPECT_NE(entries[before].text.find("records 0, 2"), std::string::npos);
  EXPECT_LT(entries[before].sequence, entries[before + 1].sequence);

  const auto calls = h.backend->call_count();
  EXPECT_TRUE(h.agent->reflect({}).empty());
  EXPECT_EQ(h.backend->call_count(), calls);
}

TEST(Brain, ExitInterviewRangeAndVerbatim) {
  Harness h({always(tags::kExitInterview, "Rating: 7, Reason: good variety but some misses")});
  const auto i = h.agent->exit_interview();
  EXPECT_EQ(i.rating, 7);
  EXPECT_EQ(i.reason, "good variety but some misses");
  EXPECT_EQ(i.raw, "Rating: 7, Reason: good variety but some misses");
  EXPECT_EQ(i.question, kInterviewQuestion);

  Harness zero({always(tags::kExitInterview, "RATING: 0\nREASON: bad")});
  EXPECT_THROW(zero.agent->exit_interview(), LlmFormatError);
  EXPECT_EQ(zero.calls(tags::kExitInterview), 2u);
}

TEST(Brain, SessionExitOnPageTwo) {
  Harness h({when(tags::kWatchDecision, {{"page", "^1$"}}, "WATCH: i1\nSKIP: i2\nCONTRADICTION: none"),
             when(tags::kWatchDecision, {{"page", "^2$"}}, "WATCH: i3, i4\nCONTRADICTION: none"),
             when(tags::kItemRating, {{"_item", "^i4$"}}, "RATING: 2, FEELING: not funny"),
             when(tags::kActionChoice, {{"page", "^2$"}}, "ACTION: EXIT"),
             when(tags::kActionRefine, {{"page", "^2$"}}, "ACTION: EXIT")});
  const PageSource pages = [](int p, const std::set<ItemId>&) {
    return p == 1 ? std::vector<ItemId>{"i1", "i2"} : std::vector<ItemId>{"i3", "i4"};
  };
  const auto r = h.agent->run_session(pages);
  EXPECT_TRUE(r.exited);
  EXPECT_EQ(r.exit_page, 2);
  ASSERT_EQ(r.traces.size(), 2u);
  EXPECT_EQ(h.calls(tags::kExitInterview), 1u);
  EXPECT_EQ(r.interview.rating, 7);
  EXPECT_EQ(r.shown, 4u);
  EXPECT_EQ(r.watched, 3u);
  EXPECT_EQ(r.liked, 2u);
  ASSERT_EQ(r.verdicts.size(), 3u);

  const std::vector<std::string> order{"perceive", "retrieve", "watch_decide", "rate",
                                       "action_select", "reflect", "memory_update"};
  for (const auto& t : r.traces) EXPECT_EQ(t.at("steps").get<std::vector<std::string>>(), order);
  EXPECT_EQ(r.traces[1].at("action").at("final").at("kind"), "EXIT");

  // every watched item: one verdict, one feeling memory
  std::size_t feelings = 0;
  std::size_t pages_recorded = 0;
  for (const auto& e : h.agent->memory().entries()) {
    feelings += e.kind == MemoryKind::Feeling;
    pages_recorded += e.kind == MemoryKind::PageInteraction;
  }
  EXPECT_EQ(feelings, 3u);
  EXPECT_EQ(pages_recorded, 2u);
  const auto& last = h.agent->memory().entries();
  bool found = false;
  for (const auto& e : last) {
    if (e.kind == MemoryKind::PageInteraction &&
        e.text.find("on page 2: Title i3, Title i4, among them, I selected Title i3, Title i4 and rate them 4, 2") !=
            std::string::npos) {
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(Brain, SessionStopsAtPageCapAndRevisitsByPrevious) {
  BrainConfig cfg = Harness::no_semantic();
  cfg.page_cap = 3;
  cfg.reflect_every_page = false;
  Harness h({when(tags::kWatchDecision, {{"page", "^1$"}}, "WATCH: i1\nCONTRADICTION: none"),
             when(tags::kActionChoice, {{"page", "^2$"}}, "ACTION: PREVIOUS")},
            cfg);
  int generated = 0;
  const PageSource pages = [&](int p, const std::set<ItemId>& seen) {
    ++generated;
    EXPECT_EQ(seen.size(), p == 1 ? 0u : 2u);
    return p == 1 ? std::vector<ItemId>{"i1", "i2"} : std::vector<ItemId>{"i3", "i4"};
  };
  const auto r = h.agent->run_session(pages);
  // pages 1, 2, then back to a cached 1; the cap bounds the number of turns
  ASSERT_EQ(r.traces.size(), 3u);
  EXPECT_EQ(generated, 2);
  EXPECT_EQ(r.traces[2].at("page"), 1);
  EXPECT_FALSE(r.exited);
  EXPECT_EQ(r.exit_page, 1);
  EXPECT_EQ(r.shown, 4u);
  // i1 was already watched on the first visit
  EXPECT_EQ(r.watched, 1u);
  EXPECT_EQ(r.verdicts.size(), 1u);
  EXPECT_EQ(h.calls(tags::kExitInterview), 1u);
  // end-only reflection runs once
  EXPECT_EQ(h.calls(tags::kReflectionTopics), 1u);
}

TEST(Brain, ForbidExitRemovesExit) {
  BrainConfig cfg = Harness::no_semantic();
  cfg.forbid_exit = true;
  Harness h({always(tags::kActionChoice, "ACTION: EXIT")}, cfg);
  EXPECT_THROW(h.agent->select_action(h.page({"i1"})), LlmFormatError);
}

TEST(Brain, ClassifyInteractedReadsAnswerAndSeesMemory) {
  Harness h({when(tags::kBelievability, {{"_item", "^i2$"}}, "ANSWER: YES\nREASON: I rated it"),
             always(tags::kBelievability, "ANSWER: NO")});
  const auto yes = h.agent->classify_interacted(h.agent->page_item("i2"));
  EXPECT_TRUE(yes.interacted);
  EXPECT_EQ(yes.reason, "I rated it");
  const auto no = h.agent->classify_interacted(h.agent->page_item("i5"));
  EXPECT_FALSE(no.interacted);
  EXPECT_TRUE(no.reason.empty());
  // the seeded rating of i2 is offered as evidence
  const auto prompts = h.calls_of(tags::kBelievability);
  ASSERT_EQ(prompts.size(), 2u);
  EXPECT_NE(prompts[0].prompt.find("Title i2"), std::string::npos);
  EXPECT_NE(prompts[0].prompt.find("Have you interacted with this movie?"), std::string::npos);
}
