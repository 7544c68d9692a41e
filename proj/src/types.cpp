#include "l1trace/types.hpp"

#include <stdexcept>

namespace l1trace {

namespace {

constexpr std::array<std::string_view, kLabelCount> kLabelNames{
    "english_american", "english_british", "french",   "german",
    "italian",          "chinese",         "japanese", "korean",
};

constexpr std::array<std::string_view, kEraCount> kEraNames{"pre_nn", "pre_llm", "post_llm"};

}  // namespace

std::string_view to_string(L1Label label) { return kLabelNames[index_of(label)]; }

std::optional<L1Label> label_from_string(std::string_view text) {
  for (std::size_t i = 0; i < kLabelCount; ++i) {
    if (kLabelNames[i] == text) return kAllLabels[i];
  }
  return std::nullopt;
}

std::string_view to_string(Era era) { return kEraNames[index_of(era)]; }

std::optional<Era> era_from_string(std::string_view text) {
  for (std::size_t i = 0; i < kEraCount; ++i) {
    if (kEraNames[i] == text) return kAllEras[i];
  }
  return std::nullopt;
}

std::optional<CountryCode> CountryCode::parse(std::string_view text) {
  if (text.size() != 2) return std::nullopt;
  std::array<char, 2> chars{};
  for (std::size_t i = 0; i < 2; ++i) {
    char c = text[i];
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    if (c < 'A' || c > 'Z') return std::nullopt;
    chars[i] = c;
  }
  if (chars == std::array<char, 2>{'U', 'K'}) chars = {'G', 'B'};
  return CountryCode(chars);
}

CountryCode CountryCode::of(std::string_view text) {
  auto code = parse(text);
  if (!code) throw std::invalid_argument("invalid ISO 3166-1 alpha-2 code: '" + std::string(text) + "'");
  return *code;
}

}  // namespace l1trace
