#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "l1trace/http.hpp"
#include "l1trace/ingest.hpp"
#include "l1trace/prompts.hpp"
#include "l1trace/types.hpp"

namespace l1trace {

using CountrySet = std::set<CountryCode>;

// {US, GB}: the countries behind the two English labels.
CountrySet default_english_countries();

struct OriginPrediction {
  std::string author_name;
  std::array<CountryCode, 2> candidates;  // model order
  std::string raw_response;
};

class MalformedResponse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Finds the first bracketed array in the model output and reads it as quoted
// two-letter codes. Typographic quotes are accepted. Throws MalformedResponse
// unless the array holds exactly two valid codes.
std::array<CountryCode, 2> parse_origin_response(std::string_view raw);

enum class Verdict { verified, no_intersection, english_immersion_excluded, country_unknown, prediction_failed };

std::string_view to_string(Verdict verdict);

struct VerifiedAuthor {
  AuthorRecord author;
  Verdict verdict = Verdict::prediction_failed;
  std::optional<CountryCode> country;  // set iff verified
  std::vector<std::string> trace;

  bool is_verified() const { return verdict == Verdict::verified; }
};

// Picks the highest-ranked candidate that appears among the author's
// affiliation countries. A non-English pick made by an author who also holds
// an English-country affiliation is excluded. Never throws.
VerifiedAuthor verify_author(const AuthorRecord& author, const OriginPrediction& prediction,
                             const CountrySet& english_countries);

VerifiedAuthor prediction_failed(const AuthorRecord& author, std::string_view reason);

enum class UnlabeledReason {
  too_many_authors,
  key_author_disagreement,
  key_author_unverified,
  unmapped_country,
};

std::string_view to_string(UnlabeledReason reason);

inline constexpr std::size_t kMaxAuthors = 5;

// First, second and last positions clamped to the author count, deduplicated
// and ascending. 1 author -> {0}; 2 -> {0, 1}.
std::vector<std::size_t> key_author_positions(std::size_t author_count);

class AlignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Consensus {
  std::optional<CountryCode> country;
  std::optional<UnlabeledReason> reason;
  std::vector<std::size_t> key_positions;
};

// Throws AlignmentError when verified does not line up with paper.authors.
Consensus paper_consensus(const PaperRecord& paper, std::span<const VerifiedAuthor> verified,
                          std::size_t max_authors = kMaxAuthors);

// Country -> label table loaded from CSV "country_code,label". Codes are
// canonicalized (UK -> GB) and the table must be injective.
class MappingTable {
 public:
  static MappingTable builtin();
  static MappingTable from_csv(std::string_view text);
  static MappingTable load(const std::filesystem::path& path);

  std::optional<L1Label> lookup(CountryCode country) const;
  const std::map<CountryCode, L1Label>& entries() const { return entries_; }

 private:
  std::map<CountryCode, L1Label> entries_;
};

// nullopt means Unmapped.
std::optional<L1Label> map_country_to_language(CountryCode country, const MappingTable& table);

// Stage-1 model access: returns the raw text completion for a prompt.
class OriginClient {
 public:
  virtual ~OriginClient() = default;
  virtual std::string complete(const PromptBundle& prompt) = 0;
};

class ClientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ChatEndpointConfig {
  std::string base_url = "http://localhost:8000/v1";
  std::string model = "Qwen/Qwen3-8B";
  double temperature = 0.0;
  std::string api_key;
  double requests_per_second = 5.0;
};

// POST {base_url}/chat/completions with {model, messages, temperature};
// reads choices[0].message.content.
class ChatCompletionClient final : public OriginClient {
 public:
  ChatCompletionClient(ChatEndpointConfig config, HttpTransport& transport, RateLimiter& limiter);

  std::string complete(const PromptBundle& prompt) override;

  static nlohmann::json request_body(const ChatEndpointConfig& config, const PromptBundle& prompt);

 private:
  ChatEndpointConfig config_;
  HttpTransport& transport_;
  RateLimiter& limiter_;
};

// Deterministic name -> raw response lookup, for tests and recorded runs.
// Throws ClientError for names it has no response for.
class StubOriginClient final : public OriginClient {
 public:
  StubOriginClient() = default;
  explicit StubOriginClient(std::map<std::string, std::string> responses) : responses_(std::move(responses)) {}

  // JSON object {"<author name>": "<raw model output>", ...}
  static StubOriginClient load(const std::filesystem::path& path);

  void set(std::string name, std::string raw) { responses_[std::move(name)] = std::move(raw); }
  std::string complete(const PromptBundle& prompt) override;

  std::size_t calls() const { return calls_; }

 private:
  std::map<std::string, std::string> responses_;
  std::size_t calls_ = 0;
};

struct LabelingConfig {
  CountrySet english_countries = default_english_countries();
  MappingTable table = MappingTable::builtin();
  std::size_t max_authors = kMaxAuthors;
};

struct LabeledPaper {
  PaperRecord paper;
  L1Label label;
  CountryCode country;
  Era era;
  std::vector<std::size_t> key_authors;
  std::vector<VerifiedAuthor> provenance;
};

struct LabelOutcome {
  PaperRecord paper;
  std::optional<LabeledPaper> labeled;
  std::optional<UnlabeledReason> reason;
  std::optional<CountryCode> country;  // consensus country, also when unmapped
  std::vector<VerifiedAuthor> provenance;
};

// predict -> verify -> consensus -> map. Malformed model output becomes a
// PredictionFailed verdict; ClientError and transport failures propagate.
LabelOutcome label_paper(const PaperRecord& paper, OriginClient& client, const LabelingConfig& config);

nlohmann::json to_json(const VerifiedAuthor& verified);
nlohmann::json to_json(const LabeledPaper& labeled);
LabeledPaper labeled_paper_from_json(const nlohmann::json& object);

// Audit line for a paper that did not receive a label.
nlohmann::json audit_json(const LabelOutcome& outcome);

}  // namespace l1trace
