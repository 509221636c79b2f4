#pragma once

// Template tags of the built-in prompt registry.
namespace simuser::llm::tags {

inline constexpr const char* kPersonaSummary = "persona_summary";
inline constexpr const char* kPersonaGenerate = "persona_generate";
inline constexpr const char* kPersonaRateSubset = "persona_rate_subset";
inline constexpr const char* kSelfAsk = "self_ask";
inline constexpr const char* kWatchDecision = "watch_decision";
inline constexpr const char* kItemRating = "item_rating";
inline constexpr const char* kActionSatisfaction = "action_satisfaction";
inline constexpr const char* kActionFatigue = "action_fatigue";
inline constexpr const char* kActionEmotion = "action_emotion";
inline constexpr const char* kActionChoice = "action_choice";
inline constexpr const char* kClickDetail = "click_detail";
inline constexpr const char* kCausalQuestions = "causal_questions";
inline constexpr const char* kCausalOutcome = "causal_outcome";
inline constexpr const char* kActionRefine = "action_refine";
inline constexpr const char* kReflectionTopics = "reflection_topics";
inline constexpr const char* kReflectionInsights = "reflection_insights";
inline constexpr const char* kExitInterview = "exit_interview";
inline constexpr const char* kCaptionDraft = "caption_draft";
inline constexpr const char* kCaptionClaims = "caption_claims";
inline constexpr const char* kCaptionScore = "caption_score";
inline constexpr const char* kCaptionCombine = "caption_combine";
inline constexpr const char* kBelievability = "believability_classify";
inline constexpr const char* kGatewayProbe = "gateway_probe";

}  // namespace simuser::llm::tags
