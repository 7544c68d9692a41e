#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "l1trace/types.hpp"

namespace l1trace {

enum class Regime { name_origin, few_shot, fine_tune };

std::string_view to_string(Regime regime);
std::optional<Regime> regime_from_string(std::string_view text);

struct PromptBundle {
  std::string system;
  std::string user;
  Regime regime = Regime::few_shot;

  bool operator==(const PromptBundle&) const = default;
};

struct Exemplar {
  std::string title;
  std::string abstract;
  L1Label label;
};

struct FinetuneExample {
  PromptBundle prompt;
  std::string completion;
};

class DuplicateExemplarLabel : public std::invalid_argument {
 public:
  explicit DuplicateExemplarLabel(L1Label label)
      : std::invalid_argument("few-shot exemplars repeat label " + std::string(to_string(label))) {}
};

// Name-origin request: fixed system prompt, user "Name: {name}". The name is
// inserted verbatim. Throws std::invalid_argument for an empty name.
PromptBundle build_name_origin_request(std::string_view name);

// Exemplar blocks (in caller order) followed by the classify line, all in the
// user turn. Throws DuplicateExemplarLabel, or std::invalid_argument when the
// title or abstract is empty.
PromptBundle build_fewshot_prompt(std::string_view title, std::string_view abstract,
                                  std::span<const Exemplar> exemplars);

FinetuneExample build_finetune_example(std::string_view title, std::string_view abstract, L1Label label);

// Fine-tune prompt without a completion, as sent to a fine-tuned model.
PromptBundle build_finetune_query(std::string_view title, std::string_view abstract);

struct ParsedLabel {
  std::optional<L1Label> value;  // nullopt means Invalid
  std::string raw;

  bool valid() const { return value.has_value(); }
};

// Lowercase, trim, strip terminal punctuation, collapse internal whitespace to
// '_', then exact match against the closed set. Everything else is Invalid.
ParsedLabel parse_label(std::string_view raw);

nlohmann::json to_json(const PromptBundle& bundle);

}  // namespace l1trace
