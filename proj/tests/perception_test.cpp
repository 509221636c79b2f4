#include <gtest/gtest.h>

#include <filesystem>

#include "simuser/error.hpp"
#include "simuser/llm/prompts.hpp"
#include "simuser/perception.hpp"
#include "test_support.hpp"

using namespace simuser;
using namespace simuser::testing;
namespace tags = simuser::llm::tags;

namespace {

Item with_thumb(std::string id, std::string thumb) {
  Item it = make_item(std::move(id), {"Drama"});
  it.thumbnail_ref = std::move(thumb);
  return it;
}

std::vector<llm::ScriptRule> pipeline_rules(const std::string& score_reply = "YES: 0.9 NO: 0.1") {
  return {always(tags::kCaptionDraft, "CAPTION: A dark, tense city skyline for {title}"),
          always(tags::kCaptionClaims, "CLAIM: The movie is dark\nCLAIM: The movie is set in a city"),
          always(tags::kCaptionScore, score_reply),
          always(tags::kCaptionCombine, "CAPTION: final {draft}")};
}

}  // namespace

TEST(Perception, DraftEchoAndThumbnailRequired) {
  auto backend = script(pipeline_rules());
  llm::LlmGateway gw(backend);
  EXPECT_EQ(draft_caption(gw, with_thumb("a", "thumbs/a.jpg")), "A dark, tense city skyline for Title a");
  EXPECT_THROW(draft_caption(gw, make_item("b", {"X"})), NoThumbnailError);
  EXPECT_THROW(draft_caption(gw, with_thumb("c", "")), NoThumbnailError);
  EXPECT_EQ(backend->call_count(), 1u);
}

TEST(Perception, EmptyDraftReplyIsFormatError) {
  llm::LlmGateway gw(script({always(tags::kCaptionDraft, "CAPTION:   ")}));
  EXPECT_THROW(draft_caption(gw, with_thumb("a", "t.jpg")), LlmFormatError);
}

TEST(Perception, DecomposeClaims) {
  llm::LlmGateway gw(script({always(tags::kCaptionClaims, "CLAIM: The movie is scary\nCLAIM: The movie is set in space")}));
  const std::string draft = "scary and set in space";
  const auto claims = decompose_claims(gw, draft);
  ASSERT_EQ(claims.size(), 2u);
  EXPECT_EQ(claims[0].text, "The movie is scary");
  EXPECT_EQ(claims[1].text, "The movie is set in space");
  // every claim stays on the draft's topic words
  for (const auto& c : claims) {
    EXPECT_TRUE(c.text.find("scary") != std::string::npos || c.text.find("space") != std::string::npos);
  }
  EXPECT_THROW(decompose_claims(gw, ""), ValidationError);

  llm::LlmGateway none(script({always(tags::kCaptionClaims, "nothing to say")}));
  EXPECT_THROW(decompose_claims(none, "a draft"), LlmFormatError);

  std::string many;
  for (int i = 0; i < 9; ++i) many += "CLAIM: c" + std::to_string(i) + "\n";
  llm::LlmGateway lots(script({always(tags::kCaptionClaims, many)}));
  EXPECT_EQ(decompose_claims(lots, "d").size(), 6u);
}

TEST(Perception, ScoreParsingClampAndComplement) {
  auto run = [](const std::string& reply) {
    llm::LlmGateway gw(script({always(tags::kCaptionScore, reply)}));
    return score_claim(gw, "The movie is scary", "t.jpg");
  };
  auto s = run("yes:0.9 no:0.1");
  EXPECT_DOUBLE_EQ(s.first, 0.9);
  EXPECT_DOUBLE_EQ(s.second, 0.1);
  s = run("YES: 1.2");
  EXPECT_DOUBLE_EQ(s.first, 1.0);
  EXPECT_DOUBLE_EQ(s.second, 0.0);
  s = run("YES: 0.3");
  EXPECT_DOUBLE_EQ(s.second, 0.7);
  s = run("YES: -0.5 NO: 0.4");
  EXPECT_DOUBLE_EQ(s.first, 0.0);
  EXPECT_DOUBLE_EQ(s.second, 0.4);
  s = run("YES: 0.8 NO: 0.6");
  EXPECT_LE(s.first + s.second, 1.0 + 1e-9);
  EXPECT_NEAR(s.first, 0.8 / 1.4, 1e-12);
  llm::LlmGateway bad(script({always(tags::kCaptionScore, "YES: maybe")}));
  EXPECT_THROW(score_claim(bad, "c", "t.jpg"), LlmFormatError);
}

TEST(Perception, CombineRemovalDirectiveAndPassThrough) {
  auto backend = script({always(tags::kCaptionCombine, "CAPTION: {draft}")});
  llm::LlmGateway gw(backend);
  const std::vector<AtomicClaim> good{{"The movie is dark", 0.9, 0.1}, {"It is set at night", 0.8, 0.2}};
  EXPECT_EQ(combine_caption(gw, "dark night", good), "dark night");
  EXPECT_EQ(backend->calls().back().prompt.find("Remove"), std::string::npos);

  const std::vector<AtomicClaim> mixed{{"The movie is dark", 0.9, 0.1}, {"There is a dragon", 0.1, 0.9}};
  combine_caption(gw, "dark dragon", mixed);
  const auto prompt = backend->calls().back().prompt;
  EXPECT_NE(prompt.find("Remove this unsupported claim: \"There is a dragon\""), std::string::npos);
  EXPECT_EQ(prompt.find("Remove this unsupported claim: \"The movie is dark\""), std::string::npos);

  const auto calls = backend->call_count();
  EXPECT_EQ(combine_caption(gw, "verbatim draft", {}), "verbatim draft");
  EXPECT_EQ(backend->call_count(), calls);
}

TEST(Perception, FullPipelineAndCacheAvoidsRepeatCalls) {
  auto backend = script(pipeline_rules());
  llm::LlmGateway gw(backend);
  const std::vector<Item> items{with_thumb("a", "a.jpg"), make_item("b", {"X"}), with_thumb("c", "c.jpg")};
  CaptionCache cache;
  auto batch = caption_items(gw, items, cache, {}, 2);
  ASSERT_EQ(batch.captions.size(), 2u);
  ASSERT_EQ(batch.skipped.size(), 1u);
  EXPECT_EQ(batch.skipped[0].first, "b");
  // draft + claims + 2 scores + combine per item
  EXPECT_EQ(batch.provider_calls, 10u);
  const auto& c = batch.captions[0];
  EXPECT_EQ(c.item_id, "a");
  EXPECT_EQ(c.claims.size(), 2u);
  EXPECT_FALSE(c.final_caption.empty());
  for (const auto& claim : c.claims) {
    EXPECT_GE(claim.p_yes, 0.0);
    EXPECT_LE(claim.p_yes + claim.p_no, 1.0 + 1e-9);
  }

  batch = caption_items(gw, items, cache, {}, 2);
  EXPECT_EQ(batch.provider_calls, 0u);
  EXPECT_EQ(batch.captions.size(), 2u);

  const auto path = std::filesystem::temp_directory_path() / "simuser_caption_cache.jsonl";
  cache.save(path);
  auto reloaded = CaptionCache::load(path);
  EXPECT_EQ(reloaded.size(), 2u);
  const auto hit = reloaded.get("c", "c.jpg", "scripted");
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->final_caption, batch.captions[1].final_caption);
  EXPECT_FALSE(reloaded.get("c", "other.jpg", "scripted"));
  EXPECT_EQ(reloaded.finals().at("a"), batch.captions[0].final_caption);
  std::filesystem::remove(path);
}

TEST(Perception, FailedItemIsReportedNotPartial) {
  auto rules = pipeline_rules("garbage");
  llm::LlmGateway gw(script(rules));
  CaptionCache cache;
  const std::vector<Item> items{with_thumb("a", "a.jpg")};
  const auto batch = caption_items(gw, items, cache);
  EXPECT_TRUE(batch.captions.empty());
  ASSERT_EQ(batch.skipped.size(), 1u);
  EXPECT_EQ(cache.size(), 0u);
}
