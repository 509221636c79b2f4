#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "simuser/error.hpp"
#include "simuser/llm/prompts.hpp"
#include "simuser/memory_episodic.hpp"
#include "simuser/rng.hpp"
#include "test_support.hpp"

using namespace simuser;
using namespace simuser::testing;
namespace tags = simuser::llm::tags;

namespace {

const std::vector<std::string> kTexts = {
    "I liked Alien based on my review score of 5",
    "I disliked Grease based on my review score of 1",
    "I felt neutral about Heat based on my review score of 3",
    "Space horror keeps me on edge",
    "Musicals bore me",
    "The recommender system recommended the following movie to me on page 1: Up, Cars",
};

}  // namespace

TEST(EpisodicTemplates, SeedRatingText) {
  EXPECT_EQ(seed_rating_text("X", 5), "I liked X based on my review score of 5");
  EXPECT_EQ(seed_rating_text("X", 2), "I disliked X based on my review score of 2");
  EXPECT_EQ(seed_rating_text("X", 1), "I disliked X based on my review score of 1");
  EXPECT_EQ(seed_rating_text("X", 3), "I felt neutral about X based on my review score of 3");
  EXPECT_EQ(seed_rating_text("X", 4), "I felt neutral about X based on my review score of 4");
}

TEST(EpisodicTemplates, PageInteractionText) {
  PageRecord p{"movie", 2, {"Up", "Cars", "Heat"}, {"Up", "Heat"}, {5, 3}, {"Cars"}};
  EXPECT_EQ(page_interaction_text(p),
            "The recommender system recommended the following movie to me on page 2: Up, Cars, "
            "Heat, among them, I selected Up, Heat and rate them 5, 3 respectively. I dislike the "
            "rest movie items: Cars");
}

TEST(EpisodicMemory, SeedAndRecord) {
  llm::LlmGateway gw(script({}));
  EpisodicMemory mem(gw);
  const ItemTable items({make_item("a", {"X"}), make_item("b", {"X"}), make_item("c", {"X"})});
  mem.seed_from_history(
      std::vector<Interaction>{{"u", "a", 5, 1}, {"u", "b", 2, 2}, {"u", "c", 3, 3}}, items);
  ASSERT_EQ(mem.size(), 3u);
  EXPECT_EQ(mem.entries()[0].text, "I liked Title a based on my review score of 5");
  EXPECT_EQ(mem.entries()[1].text, "I disliked Title b based on my review score of 2");
  EXPECT_EQ(mem.entries()[2].text, "I felt neutral about Title c based on my review score of 3");
  EXPECT_EQ(mem.entries()[2].kind, MemoryKind::SeedRating);
  EXPECT_EQ(mem.entries()[2].embedding, gw.embed(mem.entries()[2].text));
  EXPECT_THROW(mem.seed_from_history(std::vector<Interaction>{}, items), ValidationError);

  EpisodicMemory fresh(gw);
  EXPECT_EQ(fresh.record("one", MemoryKind::Feeling), 0u);
  EXPECT_EQ(fresh.record("two", MemoryKind::Reflection), 1u);
  EXPECT_THROW(fresh.record("", MemoryKind::Feeling), ValidationError);
}

TEST(EpisodicMemory, SearchMatchesBruteForceCosine) {
  llm::LlmGateway gw(script({}));
  EpisodicMemory mem(gw);
  for (const auto& t : kTexts) mem.record(t, MemoryKind::Feeling);
  for (const std::string q : {"space horror", "musicals", "Alien", "page 1"}) {
    const auto qv = gw.embed(q);
    std::vector<std::pair<double, std::size_t>> oracle;
    for (std::size_t i = 0; i < kTexts.size(); ++i) {
      oracle.emplace_back(-llm::cosine(qv, gw.embed(kTexts[i])), i);
    }
    std::sort(oracle.begin(), oracle.end());
    const auto got = mem.search(q, 3);
    ASSERT_EQ(got.size(), 3u);
    for (std::size_t r = 0; r < 3; ++r) {
      EXPECT_EQ(got[r].entry.sequence, oracle[r].second) << q;
      EXPECT_NEAR(got[r].score, -oracle[r].first, 1e-12);
    }
  }
}

TEST(EpisodicMemory, EmptyMemorySkipsFollowUps) {
  auto backend = script({});
  llm::LlmGateway gw(backend);
  EpisodicMemory mem(gw);
  const auto r = mem.self_ask_retrieve("anything", 5);
  EXPECT_TRUE(r.entries.empty());
  EXPECT_GE(r.queries_used.size(), 1u);
  EXPECT_EQ(backend->call_count(), 0u);
}

TEST(EpisodicMemory, FollowUpFindsEntryMissedByQuery) {
  llm::LlmGateway gw(script({always(tags::kSelfAsk, "QUESTION: Musicals bore me")}));
  EpisodicMemory mem(gw);
  for (const auto& t : kTexts) mem.record(t, MemoryKind::Feeling);
  const std::string q = "I liked Alien based on my review score of 5";
  const auto single = mem.search(q, 1);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].entry.sequence, 0u);

  const auto r = mem.self_ask_retrieve(q, 2);
  EXPECT_EQ(r.queries_used, (std::vector<std::string>{q, "Musicals bore me"}));
  std::set<std::size_t> seqs;
  for (const auto& e : r.entries) seqs.insert(e.entry.sequence);
  EXPECT_EQ(seqs, (std::set<std::size_t>{0, 4}));
}

TEST(EpisodicMemory, TruncatesToStoredCount) {
  llm::LlmGateway gw(script({always(tags::kSelfAsk, "QUESTION: a\nQUESTION: b")}));
  EpisodicMemory mem(gw);
  for (int i = 0; i < 3; ++i) mem.record(kTexts[i], MemoryKind::Feeling);
  EXPECT_EQ(mem.self_ask_retrieve("liked", 5).entries.size(), 3u);
}

TEST(EpisodicMemory, FollowUpFailureDegrades) {
  llm::LlmGateway gw(script({always(tags::kSelfAsk, "no tags at all")}));
  EpisodicMemory mem(gw);
  for (const auto& t : kTexts) mem.record(t, MemoryKind::Feeling);
  const auto r = mem.self_ask_retrieve("Musicals", 2);
  EXPECT_EQ(r.queries_used.size(), 1u);
  ASSERT_EQ(r.entries.size(), 2u);
  const auto single = mem.search("Musicals", 2);
  EXPECT_EQ(r.entries[0].entry.sequence, single[0].entry.sequence);
}

// Property: sorted, bounded scores; stored text is its own best match; the
// multi-query candidates cover the single-query top-k.
TEST(EpisodicMemory, RetrievalProperties) {
  Rng rng(17);
  const std::vector<std::string> words{"space", "horror", "comedy", "music", "war",
                                       "love", "robot", "heist", "dragon", "court"};
  for (int trial = 0; trial < 30; ++trial) {
    llm::LlmGateway gw(script({always(tags::kSelfAsk, "QUESTION: robot war\nQUESTION: love court")}));
    EpisodicMemory mem(gw);
    std::set<std::string> seen;
    const std::size_t n = 3 + rng.index(12);
    while (mem.size() < n) {
      std::string t;
      for (int w = 0; w < 4; ++w) t += words[rng.index(words.size())] + " ";
      t += std::to_string(mem.size());
      if (seen.insert(t).second) mem.record(t, MemoryKind::Feeling);
    }
    for (const auto& e : mem.entries()) {
      const auto r = mem.self_ask_retrieve(e.text, 1);
      ASSERT_EQ(r.entries.size(), 1u);
      EXPECT_EQ(r.entries[0].entry.sequence, e.sequence);
    }
    const std::string q = words[rng.index(words.size())];
    const std::size_t k = 1 + rng.index(5);
    const auto multi = mem.self_ask_retrieve(q, k);
    for (std::size_t i = 0; i < multi.entries.size(); ++i) {
      EXPECT_GE(multi.entries[i].score, -1.0);
      EXPECT_LE(multi.entries[i].score, 1.0 + 1e-12);
      if (i) EXPECT_TRUE(multi.entries[i - 1].score >= multi.entries[i].score);
    }
    // Rebuild the candidate set: single-query hits must all be in it, and
    // the kept entries are its best-scoring members.
    std::map<std::size_t, double> cand;
    for (const auto& qq : multi.queries_used) {
      for (const auto& s : mem.search(qq, k)) cand[s.entry.sequence] = -2;
    }
    for (const auto& s : mem.search(q, k)) EXPECT_TRUE(cand.count(s.entry.sequence));
    for (auto& [seq, best] : cand) {
      for (const auto& qq : multi.queries_used) {
        best = std::max(best, llm::cosine(gw.embed(qq), mem.entries()[seq].embedding));
      }
    }
    std::vector<std::pair<double, std::size_t>> ranked;
    for (auto [seq, best] : cand) ranked.emplace_back(-best, seq);
    std::sort(ranked.begin(), ranked.end());
    ASSERT_EQ(multi.entries.size(), std::min(k, ranked.size()));
    for (std::size_t i = 0; i < multi.entries.size(); ++i) {
      EXPECT_EQ(multi.entries[i].entry.sequence, ranked[i].second);
    }
  }
}

TEST(EpisodicMemory, SnapshotRoundTrip) {
  llm::LlmGateway gw(script({}));
  EpisodicMemory mem(gw);
  mem.record("alpha", MemoryKind::Feeling);
  mem.record("beta", MemoryKind::Reflection);
  std::stringstream ss;
  mem.export_jsonl(ss);
  EpisodicMemory copy(gw);
  copy.import_jsonl(ss);
  ASSERT_EQ(copy.size(), 2u);
  EXPECT_EQ(copy.entries()[1].text, "beta");
  EXPECT_EQ(copy.entries()[1].kind, MemoryKind::Reflection);
  EXPECT_EQ(copy.entries()[1].embedding, mem.entries()[1].embedding);
  EXPECT_EQ(copy.record("gamma", MemoryKind::Feeling), 2u);

  std::stringstream bad("{\"text\":\"x\",\"kind\":\"feeling\",\"sequence\":0}\nnot json\n");
  EXPECT_THROW(copy.import_jsonl(bad), ParseError);
}
