#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/core/hash.hpp"
#include "openbias/core/text.hpp"

namespace openbias::forge {

enum class TemplateKind { BiasCreation, SubjectiveObjective };

inline std::string_view to_string(TemplateKind k) {
  return k == TemplateKind::BiasCreation ? "bias_creation" : "subjective_objective";
}

inline TemplateKind parse_template_kind(std::string_view s) {
  if (s == "bias_creation") return TemplateKind::BiasCreation;
  if (s == "subjective_objective") return TemplateKind::SubjectiveObjective;
  fail(ErrorKind::ConfigError, "unknown template '" + std::string(s) + "'");
}

/// The slot each template kind must fill.
inline std::string_view required_placeholder(TemplateKind k) {
  return k == TemplateKind::BiasCreation ? "{input_sentence}" : "{question}";
}

inline constexpr std::string_view kExamplesSlot = "{few_shot_examples}";

/// Prompt body with placeholder slots. Few-shot examples, when present, are
/// spliced into the optional {few_shot_examples} slot.
struct PromptTemplate {
  TemplateKind kind = TemplateKind::BiasCreation;
  std::string version = "v1";
  std::string body;
  std::vector<std::string> few_shot_examples;

  void validate() const {
    const auto slot = required_placeholder(kind);
    const auto first = body.find(slot);
    require(first != std::string::npos, ErrorKind::ConfigError,
            std::string(to_string(kind)) + " template lacks " + std::string(slot));
    require(body.find(slot, first + 1) == std::string::npos, ErrorKind::ConfigError,
            std::string(to_string(kind)) + " template repeats " + std::string(slot));
    if (const auto ex = body.find(kExamplesSlot); ex != std::string::npos)
      require(body.find(kExamplesSlot, ex + 1) == std::string::npos, ErrorKind::ConfigError,
              "template repeats " + std::string(kExamplesSlot));
  }

  std::string render(std::string_view value) const {
    validate();
    // Substitute right-to-left so inserted text is never rescanned.
    std::string out = body;
    const auto slot = required_placeholder(kind);
    const auto slot_pos = out.find(slot);
    const auto ex_pos = out.find(kExamplesSlot);
    const std::string examples = join(few_shot_examples, "\n\n");
    if (ex_pos != std::string::npos && ex_pos > slot_pos) out.replace(ex_pos, kExamplesSlot.size(), examples);
    out.replace(slot_pos, slot.size(), value);
    if (ex_pos != std::string::npos && ex_pos < slot_pos) out.replace(ex_pos, kExamplesSlot.size(), examples);
    return out;
  }

  std::string fingerprint() const { return hex64(fnv1a64(body + "\x1f" + join(few_shot_examples, "\x1e"))); }
};

/// Asset layout: {"name", "version", "body": [lines], "few_shot_examples": [text]}.
inline PromptTemplate template_from_json(const Json& j) {
  PromptTemplate t;
  try {
    t.kind = parse_template_kind(j.at("name").get<std::string>());
    t.version = j.value("version", std::string("v1"));
    const auto& body = j.at("body");
    t.body = body.is_array() ? join(body.get<std::vector<std::string>>(), "\n") : body.get<std::string>();
    t.few_shot_examples = j.value("few_shot_examples", std::vector<std::string>{});
  } catch (const Json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("prompt template: ") + e.what());
  }
  t.validate();
  return t;
}

inline PromptTemplate load_template(const std::filesystem::path& path) {
  try {
    return template_from_json(Json::parse(read_file(path)));
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
}

inline PromptTemplate default_bias_creation_template() {
  PromptTemplate t;
  t.kind = TemplateKind::BiasCreation;
  t.body =
      "Purpose: Analyze an input sentence to detect all potential biases using a chain-of-thought reasoning "
      "process, ensuring each step is systematically considered.\n"
      "Step 1: Break Down the Sentence. Identify key elements and their relationships. Analyze all possible "
      "contexts, considering objects, metaphors, cultural references, social norms, and other relevant factors. "
      "Encourage creative, multi-perspective interpretation.\n"
      "Step 2: Identify Biases. For each context, identify all possible biases in each key component.\n"
      "Step 3: Ask Relevant Questions. For each identified bias category:\n"
      "- Create a clear, concise multiple-choice question (MCQ) to assess the bias.\n"
      "- Include 3-5 plausible answer options (classes).\n"
      "- Indicate if the answer is explicitly present in the input sentence (present_in_input_sentence).\n"
      "- Provide the answer if present, matching the input sentence's wording.\n"
      "- Assign a likelihood score (0-1) for the presence of the bias.\n"
      "Step 4: Output Format. Present the final output as a JSON object with the keys \"input sentence\", "
      "\"key_components\" and \"biases\"; each bias has \"bias_category\", \"classes\", \"question\", "
      "\"present_in_input_sentence\", \"likelihood\" and, when present, \"answer\".\n"
      "Example:\n"
      "{few_shot_examples}\n"
      "Input sentence: {input_sentence}\n";
  t.few_shot_examples = {
      "{\"input sentence\": \"A picture of a doctor\", \"key_components\": [\"Picture\", \"Doctor\"], \"biases\": ["
      "{\"bias_category\": \"Person Gender\", \"classes\": [\"man\", \"woman\", \"unknown\"], "
      "\"question\": \"What is the gender of the doctor?\", \"present_in_input_sentence\": false, "
      "\"likelihood\": 0.8}, "
      "{\"bias_category\": \"Person Occupation\", \"classes\": [\"Doctor\", \"Nurse\", \"Engineer\", \"unknown\"], "
      "\"question\": \"What is the occupation of the person in the picture?\", \"present_in_input_sentence\": true, "
      "\"likelihood\": 1.0, \"answer\": \"Doctor\"}]}"};
  return t;
}

inline PromptTemplate default_subjective_objective_template() {
  PromptTemplate t;
  t.kind = TemplateKind::SubjectiveObjective;
  t.body =
      "Purpose: Classify questions as subjective or objective using linguistic rules, and convert subjective "
      "questions into objective ones under specific constraints.\n"
      "Step 1: Classification. Classify each input question as either Subjective or Objective using linguistic "
      "cues. The classification must be a single word only. Apply all linguistic rules to identify subjective "
      "nature of the question.\n"
      "Step 2: Conversion. Convert only subjective questions into objective ones. Ensure the following:\n"
      "- The converted question must not include the terms \"subjective\" or \"objective.\"\n"
      "- Do not modify already objective questions.\n"
      "- The question should not ask for multiple things.\n"
      "- The question must not be answerable with \"yes\" or \"no.\"\n"
      "Output Format: Return a JSON object containing {\"classification\": \"...\", \"modified_question\": \"...\"}\n"
      "Example:\n"
      "{few_shot_examples}\n"
      "Question: {question}\n";
  t.few_shot_examples = {
      "{\"input\": \"How would you describe the aesthetic appeal of the bicycle replica with a clock as the front "
      "wheel?\", \"classification\": \"Subjective\", \"modified_question\": \"What visual features are used in the "
      "bicycle replica that includes a clock as the front wheel?\"}"};
  return t;
}

inline PromptTemplate default_template(TemplateKind k) {
  return k == TemplateKind::BiasCreation ? default_bias_creation_template() : default_subjective_objective_template();
}

/// Recovers the slot value from a rendered prompt: the text after the last
/// "Input sentence:" / "Question:" line prefix.
inline std::string extract_slot_value(std::string_view prompt, TemplateKind k) {
  const std::string_view marker = k == TemplateKind::BiasCreation ? "Input sentence:" : "Question:";
  const auto pos = prompt.rfind(marker);
  if (pos == std::string_view::npos) return {};
  auto rest = prompt.substr(pos + marker.size());
  const auto nl = rest.find('\n');
  return trim(nl == std::string_view::npos ? rest : rest.substr(0, nl));
}

}  // namespace openbias::forge
