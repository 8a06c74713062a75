#include "polopt/prompts.hpp"

#include <cctype>

#include "polopt/error.hpp"

namespace polopt {

namespace {

constexpr std::string_view kRewritePreambleHead =
    R"(A scenario is a short story that includes a setting of time and place, characters with particular motivations and goals, and a plot.

A scenario must be written in a narrative form and not divided into different sections. A scenario is descriptive and should leave the interpretation up to readers, and thus does not include any analysis either at the end or throughout.

Therefore, this writing task asks for a scenario that proposes no solutions but focuses  on descriptive situations regarding the issue of )";

constexpr std::string_view kRewritePreambleTail =
    R"( due to the deployment of generative AI technology in the news environment without proposing new policies to mitigate the harm.

Generative AI refers to a technology that can create new content (e.g., text, images, audio, video) based on the content it was trained on.

You wrote the following (~ 300 word) narrative fictional scenario taking place in the United States in 2029, or about 5 years in the future.

This story should depicts the risks or negative impacts deriving from this AI deployment in the media environment and does not attempt to resolve those impacts. It concentrates on the narrative style and the characters in the story: )";

constexpr std::string_view kLegislation =
    "Rewrite the scenario you just created in light of the fact that the following items were "
    "enacted via legislation:";

constexpr std::string_view kClosing =
    R"(Again, please remember a scenario is descriptive and should leave the interpretation up to readers, and thus does not include any analysis either at the end or throughout, thus:
DO NOT state the problem or resulting harms explicitly.
DO NOT include any analysis in the scenario.
DO NOT include solutions or potential takeaways in the scenario.
DO NOT comment on the efficacy of the legislation in a concluding thought.
DO NOT have the characters reflect on the implications of the scenario. Please do not add your own analysis, suggestions, or conclusions to the text.
DO NOT introduce any possible resolutions to the harms.
Focus on the narrative style and the characters in the story instead of potential takeaways readers should have.)";

constexpr std::string_view kRatingPrompt =
    R"(You are to set up a panel of judges for AI risk triage analysis specializing in generative-AI-mediated media harms in 2029 U.S. news ecosystems. Please evaluate the scenarios delineated by <scenario> for severity, magnitude, and plausibility based on the definitions and instructions provided to you.

You are to set up a judging panel, comprised of 5 judges, for the task of evaluating a set of scenarios for how generative AI might structurally affect society in the next 5 years.

Their job is to rate one narrative scenario along three independent axes using a consistent rubric.

Their scores directly trigger allocation of scarce interventions (regulatory response teams, platform throttling, broadcast overrides).

Mis-scoring will misallocate resources during an escalating information crisis.

A false positive could amplify misinformation to millions; a false negative could delay urgent interventions during elections or crises.

The judges on this judging panel are described below:

Judge 1: An experienced partner in a venture capital firm who is skilled at analyzing technology trends and anticipating the macro developments in business, technology and culture over many years.
She is analytical, thoughtful, pragmatic and well-informed, with a PhD in History and an MBA from an Ivy League school.

Judge 2: A concerned citizen who reads the news every day and is active in her community. She has children and a family and is concerned for their safety.

Judge 3: A senior manager at a large media conglomerate, who is procedural and accurate and who takes pride in the care and detail that he brings to his work. He is knowledgeable about media and strategy.

Judge 4: An experienced foresight analyst at a globally-recognized foresight and futurist institute, who is particularly experienced in digital news media and the strategic implications
of networked communications and of AI-mediated news. She is imaginative, open to new ideas and sophisticated about how radical new ideas can become real products and industries in the real world.

Judge 5: A well-respected professor of communication studies at a major European university who is focused on the history of media transformation from the printing press to AI,
and on the application of that history to interpreting the future. He is rigorous, evidence-based but also well aware of the blind spots of conservative, legacy publishers and news organizations,
and of the potential for technology to enable radically different (and ultimately better) public information environments.

Task:
The judges are to independently evaluate each scenario, extracting salient risk factors and assign three scores on a 1.0–5.0 scale:
calibrated (1) overall harm severity, (2) magnitude, and (3) plausibility. Using the following criteria:

- Range: 1.0–5.0 inclusive.
- Precision: one decimal place.
- Output only a single line in the exact format: (e.g.,) 3.8; 2.7; 4.2; (one decimal).
- Do not echo the scenario or provide explanations.

Definitions and anchors:
Severity Rubric (intensity of harm if it occurs):
Severity is defined as "the condition of being very bad, serious, unpleasant, or harsh."
Severity is rated on a scale of 1 (not severe) to 5 (extremely severe).

Magnitude Rubric (breadth, scale, and persistence):
Magnitude is defined as "great size or extent" and relates to how many people in the world this could affect.
Magnitude is rated on a scale of 1 (a small number of people) to 5 (the majority of people in society).

Plausibility Rubric (likelihood by the described time horizon, given current trends and constraints):
- Rate how plausible it is that the specific harm described would occur in 2029 in the US context.
- Internal coherence: Are claims consistent and mechanism of harm clearly linked to outcomes?
- External feasibility by 2029: Align with known 2024 trends and reasonable extrapolations (AI-generated news dominance, weak/ignored labels, personalization effects, deepfake prevalence, platform incentives, regulatory environment).
- 1.0: Implausible: contradicts constraints or requires nonexistent tech/regulatory realities.
- 2.0: Low plausibility: conceivable but weak/unsupported mechanism.
- 3.0: Moderate plausibility: coherent but needs multiple optimistic assumptions.
- 4.0: High plausibility: consistent with observed trends and realistic 2029 conditions (most solid cases fall here).
- 5.0: Near-certain: already observed at scale and likely to persist; use sparingly.

Overall Instructions
- Keep axes independent; do not let plausibility inflate/deflate severity or magnitude.
- Consider mitigations in the scenario (e.g., labels/watermarks) as reducing harm only if they meaningfully change outcomes; subtle or ignored disclosures are weak mitigations.
- Emotional/psychological harms and trust erosion count toward severity; scale them by depth and persistence.
- If details are sparse/ambiguous, choose the least severe plausible interpretation; default plausibility to 3.0 when truly indeterminate.
- Focus on events/mechanisms, not prose style.

It is very important that each assessment of each scenario by each judge is made independently, based on these instructions and based on the description of each judge.
- Output only a single line in the exact format J1: Severity; Magnitude; Plausibility: X.Y; A.B; C.D;, J2: Severity; Magnitude; Plausibility: X.Y; A.B; C.D; ... J5: Severity; Magnitude; Plausibility: X.Y; A.B; C.D; (one decimal).

<scenario>
)";

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string_view prompt_impact_name(Impact impact) {
  switch (impact) {
    case Impact::political_manipulation: return "political manipulation";
    case Impact::unemployment: return "unemployment";
    case Impact::sensationalism: return "sensationalism";
    case Impact::combined: return "political manipulation, unemployment, and sensationalism";
  }
  return "";
}

std::string policy_line(const Sap& sap) {
  const std::string& who = sap.stakeholder_full.empty() ? sap.stakeholder : sap.stakeholder_full;
  const std::string& what = sap.action_full.empty() ? sap.action : sap.action_full;
  return collapse_whitespace(who) + " must " + collapse_whitespace(what);
}

std::string build_rewrite_prompt(const Scenario& scenario, std::span<const Sap> selected) {
  if (selected.empty()) throw EmptySelectionError();
  std::string out;
  out += kRewritePreambleHead;
  out += prompt_impact_name(scenario.impact);
  out += kRewritePreambleTail;
  out += "\n\n";
  out += scenario.body;
  out += "\n\n";
  out += kLegislation;
  out += "\n";
  for (const Sap& sap : selected) {
    out += policy_line(sap);
    out += "\n";
  }
  out += "\n";
  out += kClosing;
  return out;
}

std::string build_rating_prompt(const Scenario& scenario) {
  if (collapse_whitespace(scenario.body).empty()) {
    throw ValidationError("cannot build a rating prompt for an empty scenario body");
  }
  std::string out(kRatingPrompt);
  out += scenario.body;
  out += "\n</scenario>";
  return out;
}

}  // namespace polopt
