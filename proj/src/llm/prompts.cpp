#include "simuser/llm/prompts.hpp"

#include "simuser/llm/prompt_registry.hpp"

namespace simuser::llm {

namespace {

using F = FieldSpec;

const char* kPersonaBlock =
    "You are role-playing the following user of a {item_type} recommender system.\n"
    "{persona}\n";

// Facet values are range-checked by the persona module, not the schema, so an
// out-of-range facet is a domain error rather than a format retry.
FieldSpec facet(std::string name) {
  FieldSpec f = F::integer(std::move(name), -1000000, 1000000);
  f.hint = "1-3";
  f.many();
  return f;
}

PromptRegistry build() {
  PromptRegistry r;

  r.add({tags::kPersonaSummary,
         "Below is part of a user's {item_type} viewing history.\n"
         "Liked {item_type}: {liked_items}\n"
         "Disliked {item_type}: {disliked_items}\n"
         "Write a short summary (two or three sentences) of this user's tastes.",
         {F::text("SUMMARY", "summary")}});

  r.add({tags::kPersonaGenerate,
         "A user of a {item_type} platform has this taste summary:\n{taste_summary}\n"
         "Their history:\n{history}\n\n"
         "Propose {m} different candidate personas that could plausibly belong to this user.\n"
         "Possible ages: {ages}\n"
         "Possible occupations: {occupations}\n"
         "Personality uses the Big Five facets, each scored 1 (low), 2 (medium) or 3 (high): "
         "{personalities}\n"
         "Write the fields of each persona in order, one persona after the other.",
         {F::integer("AGE", 0, 130).many(), F::text("OCCUPATION", "occupation").many(),
          facet("OPENNESS"), facet("CONSCIENTIOUSNESS"), facet("EXTRAVERSION"),
          facet("AGREEABLENESS"), facet("NEUROTICISM")}});

  r.add({tags::kPersonaRateSubset,
         "Persona:\n{persona}\n\n"
         "Here is a set of {item_type} interactions (title and rating):\n{interactions}\n\n"
         "On a scale from 1 to 5, how likely is it that these interactions were produced by "
         "the person described above?",
         {F::integer("RATING", 1, 5)}});

  r.add({tags::kSelfAsk,
         "You are searching your own memories to answer: {query}\n"
         "Write {n_questions} short follow-up questions whose answers would help.",
         {F::text("QUESTION", "question").many().optional()}});

  r.add({tags::kWatchDecision,
         std::string(kPersonaBlock) +
             "You are {pickiness} about {item_type}.\n\n"
             "You are on page {page} of the recommendations. The page shows:\n{page_items}\n\n"
             "Relevant memories of your past interactions:\n{episodic_evidence}\n\n"
             "Similar {item_type} from your knowledge (title, average rating, how they relate to "
             "you):\n{kg_evidence}\n\n"
             "{previous_decision}"
             "Decide which {item_type} to WATCH and which to SKIP (use the ids). Give a reason and "
             "cite supporting evidence. Then check your choice against your persona: report any "
             "contradiction or missing evidence in CONTRADICTION, or write CONTRADICTION: none.",
         {F::list("WATCH", "ids to watch, or none"), F::list("SKIP", "ids to skip").optional(),
          F::text("REASON", "reason").optional(), F::text("EVIDENCE", "cited evidence").optional(),
          F::text("CONTRADICTION", "none, or the contradiction").optional()}});

  r.add({tags::kItemRating,
         std::string(kPersonaBlock) +
             "You are {pickiness} about {item_type}.\n\n"
             "You just watched:\n{item}\n\n"
             "Relationship paths from your knowledge graph:\n{kg_paths}\n"
             "Similar {item_type} and their ratings:\n{kg_evidence}\n"
             "Relevant memories:\n{episodic_evidence}\n\n"
             "Rate it from 1 to 5 and describe how you feel about it. Explain how your persona, "
             "the evidence and the paths influence the rating.",
         {F::integer("RATING", 1, 5), F::text("FEELING", "feeling")}});

  r.add({tags::kActionSatisfaction,
         std::string(kPersonaBlock) +
             "Your browsing so far (page {page}):\n{history}\n\n"
             "How satisfied are you with the recommendations you have seen?",
         {F::choice("SATISFACTION",
                    {"VERY_DISSATISFIED", "DISSATISFIED", "NEUTRAL", "SATISFIED", "VERY_SATISFIED"}),
          F::text("REASON", "reason").optional()}});

  r.add({tags::kActionFatigue,
         std::string(kPersonaBlock) +
             "You have browsed {pages_visited} page(s) and feel {satisfaction} with the "
             "recommendations. People typically feel {fatigue_hint} fatigue at this point.\n"
             "What is your current fatigue level?",
         {F::choice("FATIGUE", {"LOW", "MEDIUM", "HIGH"})}});

  r.add({tags::kActionEmotion,
         std::string(kPersonaBlock) +
             "Satisfaction: {satisfaction}. Fatigue: {fatigue}.\nYour browsing so far:\n{history}\n\n"
             "Name your current emotion in one word (for example EXCITED, BORED, CURIOUS, "
             "FRUSTRATED).",
         {F::text("EMOTION", "one word")}});

  r.add({tags::kActionChoice,
         std::string(kPersonaBlock) +
             "Satisfaction: {satisfaction}. Fatigue: {fatigue}. Emotion: {emotion}.\n"
             "You are on page {page} of at most {page_cap}. The page shows:\n{page_items}\n"
             "Your browsing so far:\n{history}\n{click_outcome}\n"
             "Choose your next action. Allowed: {allowed_actions}. For CLICK also give ITEM.",
         {F::choice("ACTION", {"EXIT", "NEXT", "PREVIOUS", "CLICK"}),
          F::text("ITEM", "item id for CLICK").optional(), F::text("REASON", "reason").optional()}});

  r.add({tags::kClickDetail,
         std::string(kPersonaBlock) +
             "You clicked on this item and now see its extended description:\n{item}\n"
             "{extended_description}\n\nDo you want to engage further with it?",
         {F::choice("ENGAGE", {"YES", "NO"}), F::text("REASON", "reason").optional()}});

  r.add({tags::kCausalQuestions,
         std::string(kPersonaBlock) +
             "You intend to take the action {action}.\nContext:\n{history}\n\n"
             "Write up to {max_questions} counterfactual questions that test whether this action "
             "is right for you (for example \"What would happen if you exited the system now?\").",
         {F::text("QUESTION", "question").many().optional()}});

  r.add({tags::kCausalOutcome,
         std::string(kPersonaBlock) +
             "Intended action: {action}. Satisfaction: {satisfaction}. Fatigue: {fatigue}.\n"
             "Context:\n{history}\n\nQuestion: {question}\n"
             "Estimate the outcome (satisfaction, alignment with your persona, fatigue). Give "
             "SCORE between 0 (the outcome contradicts the action) and 1 (it fully supports "
             "the action) and a short VERDICT.",
         {F::real("SCORE", "0-1"), F::text("VERDICT", "verdict")}});

  r.add({tags::kActionRefine,
         std::string(kPersonaBlock) +
             "You intended to take the action {action}.\nContext:\n{history}\n\n"
             "Counterfactual checks:\n{probes}\n\n"
             "These checks suggest the action may be wrong. Choose your final action. "
             "Allowed: {allowed_actions}.",
         {F::choice("ACTION", {"EXIT", "NEXT", "PREVIOUS", "CLICK"}),
          F::text("ITEM", "item id for CLICK").optional(), F::text("REASON", "reason").optional()}});

  r.add({tags::kReflectionTopics,
         std::string(kPersonaBlock) +
             "Records of your recent interactions:\n{records}\n\n"
             "What are the most important questions to reflect on about your preferences?",
         {F::text("TOPIC", "topic").many().optional()}});

  r.add({tags::kReflectionInsights,
         std::string(kPersonaBlock) +
             "Records of your recent interactions:\n{records}\n\nReflection topics:\n{topics}\n\n"
             "Write high-level insights about yourself. After each INSIGHT line give a CITES "
             "line listing the record numbers that support it.",
         {F::text("INSIGHT", "insight").many().optional(),
          F::list("CITES", "record numbers").many().optional()}});

  r.add({tags::kExitInterview,
         std::string(kPersonaBlock) +
             "Your session:\n{history}\n\nQuestion: {question}",
         {F::integer("RATING", 1, 10), F::text("REASON", "explanation")}});

  r.add({tags::kCaptionDraft,
         "Describe the thumbnail of the {item_type} \"{title}\". Capture its emotional tone, "
         "visual details and unique selling points in a short caption.",
         {F::text("CAPTION", "caption")}});

  r.add({tags::kCaptionClaims,
         "Caption: {draft}\n\nDecompose the caption into at most {max_claims} atomic claims, each "
         "a specific factual statement rather than an opinion.",
         {F::text("CLAIM", "claim").many()}});

  r.add({tags::kCaptionScore,
         "Look at the image and answer yes or no: {question}\n"
         "Give the probability of each answer.",
         {F::real("YES", "probability"), F::real("NO", "probability").optional()}});

  r.add({tags::kCaptionCombine,
         "Draft caption: {draft}\n\nFact-check results (claim, p_yes, p_no):\n{scored_claims}\n"
         "{removals}\n"
         "Rewrite the caption so that it only states supported facts.",
         {F::text("CAPTION", "caption")}});

  r.add({tags::kBelievability,
         std::string(kPersonaBlock) +
             "Relevant memories:\n{episodic_evidence}\n\nSimilar items you know:\n{kg_evidence}\n\n"
             "Have you interacted with this {item_type}?\n{item}",
         {F::choice("ANSWER", {"YES", "NO"}), F::text("REASON", "reason").optional()}});

  r.add({tags::kGatewayProbe, "Reply with REPLY: ok", {F::text("REPLY", "ok")}});

  return r;
}

}  // namespace

std::shared_ptr<const PromptRegistry> default_prompt_registry() {
  static const auto registry = std::make_shared<const PromptRegistry>(build());
  return registry;
}

}  // namespace simuser::llm
