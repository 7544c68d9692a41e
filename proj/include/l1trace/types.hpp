#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace l1trace {

// The closed label set. Serialized names match the prompt templates exactly.
enum class L1Label : std::uint8_t {
  english_american,
  english_british,
  french,
  german,
  italian,
  chinese,
  japanese,
  korean,
};

inline constexpr std::size_t kLabelCount = 8;

inline constexpr std::array<L1Label, kLabelCount> kAllLabels{
    L1Label::english_american, L1Label::english_british, L1Label::french,
    L1Label::german,           L1Label::italian,         L1Label::chinese,
    L1Label::japanese,         L1Label::korean,
};

std::string_view to_string(L1Label label);

// Exact match against the serialized names; no normalization.
std::optional<L1Label> label_from_string(std::string_view text);

constexpr std::size_t index_of(L1Label label) { return static_cast<std::size_t>(label); }

enum class Era : std::uint8_t { pre_nn, pre_llm, post_llm };

inline constexpr std::size_t kEraCount = 3;
inline constexpr std::array<Era, kEraCount> kAllEras{Era::pre_nn, Era::pre_llm, Era::post_llm};

std::string_view to_string(Era era);
std::optional<Era> era_from_string(std::string_view text);

constexpr std::size_t index_of(Era era) { return static_cast<std::size_t>(era); }

// ISO 3166-1 alpha-2 code, always two uppercase ASCII letters. "UK" is
// folded into "GB" on parse since upstream metadata mixes both.
class CountryCode {
 public:
  static std::optional<CountryCode> parse(std::string_view text);

  // Throws std::invalid_argument on anything parse() rejects.
  static CountryCode of(std::string_view text);

  std::string str() const { return {chars_[0], chars_[1]}; }

  auto operator<=>(const CountryCode&) const = default;

 private:
  explicit CountryCode(std::array<char, 2> chars) : chars_(chars) {}
  std::array<char, 2> chars_{};
};

}  // namespace l1trace
