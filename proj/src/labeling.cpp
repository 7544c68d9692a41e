#include "l1trace/labeling.hpp"

#include <algorithm>
#include <sstream>

#include "l1trace/corpus.hpp"
#include "l1trace/text_util.hpp"

namespace l1trace {

namespace {

std::string straighten_quotes(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    // U+2018..U+201D are E2 80 98..9D in UTF-8.
    if (i + 2 < raw.size() && static_cast<unsigned char>(raw[i]) == 0xE2 &&
        static_cast<unsigned char>(raw[i + 1]) == 0x80) {
      auto third = static_cast<unsigned char>(raw[i + 2]);
      if (third >= 0x98 && third <= 0x9D) {
        out.push_back('"');
        i += 2;
        continue;
      }
    }
    out.push_back(raw[i]);
  }
  return out;
}

// Reads `"A", 'B'` style contents. nullopt if anything other than quoted
// tokens separated by commas appears.
std::optional<std::vector<std::string>> quoted_items(std::string_view body) {
  std::vector<std::string> items;
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < body.size() && (body[i] == ' ' || body[i] == '\t' || body[i] == '\n' || body[i] == '\r')) ++i;
  };
  skip_ws();
  if (i == body.size()) return items;
  for (;;) {
    skip_ws();
    if (i >= body.size() || (body[i] != '"' && body[i] != '\'')) return std::nullopt;
    char quote = body[i++];
    auto end = body.find(quote, i);
    if (end == std::string_view::npos) return std::nullopt;
    items.emplace_back(body.substr(i, end - i));
    i = end + 1;
    skip_ws();
    if (i == body.size()) return items;
    if (body[i] != ',') return std::nullopt;
    ++i;
  }
}

std::string join_codes(const CountrySet& set) {
  std::string out = "{";
  for (const auto& c : set) {
    if (out.size() > 1) out += ",";
    out += c.str();
  }
  return out + "}";
}

}  // namespace

CountrySet default_english_countries() { return {CountryCode::of("US"), CountryCode::of("GB")}; }

std::array<CountryCode, 2> parse_origin_response(std::string_view raw) {
  const std::string text = straighten_quotes(raw);
  std::size_t from = 0;
  while (true) {
    auto open = text.find('[', from);
    if (open == std::string::npos) break;
    auto close = text.find(']', open);
    if (close == std::string::npos) break;
    auto items = quoted_items(std::string_view(text).substr(open + 1, close - open - 1));
    if (!items) {
      from = open + 1;
      continue;
    }
    if (items->size() != 2) {
      throw MalformedResponse("expected 2 country codes, got " + std::to_string(items->size()));
    }
    std::array<std::optional<CountryCode>, 2> codes;
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& item = (*items)[k];
      codes[k] = CountryCode::parse(normalize_whitespace(item));
      if (!codes[k]) throw MalformedResponse("invalid country code '" + item + "'");
    }
    return {*codes[0], *codes[1]};
  }
  throw MalformedResponse("no array of quoted country codes in response");
}

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::verified: return "verified";
    case Verdict::no_intersection: return "no_intersection";
    case Verdict::english_immersion_excluded: return "english_immersion_excluded";
    case Verdict::country_unknown: return "country_unknown";
    case Verdict::prediction_failed: return "prediction_failed";
  }
  return "unknown";
}

VerifiedAuthor verify_author(const AuthorRecord& author, const OriginPrediction& prediction,
                             const CountrySet& english_countries) {
  VerifiedAuthor out{author, Verdict::prediction_failed, std::nullopt, {}};
  const auto& affs = author.affiliation_countries;
  out.trace.push_back("candidates=[" + prediction.candidates[0].str() + "," + prediction.candidates[1].str() + "]");
  out.trace.push_back("affiliations=" + join_codes(affs));

  if (affs.empty()) {
    out.verdict = Verdict::country_unknown;
    out.trace.emplace_back("no affiliation country on record");
    return out;
  }

  std::optional<CountryCode> chosen;
  for (std::size_t rank = 0; rank < prediction.candidates.size(); ++rank) {
    if (affs.contains(prediction.candidates[rank])) {
      chosen = prediction.candidates[rank];
      out.trace.push_back("intersection at candidate rank " + std::to_string(rank + 1) + ": " + chosen->str());
      if (rank == 0 && affs.contains(prediction.candidates[1]) && prediction.candidates[1] != *chosen) {
        out.trace.push_back("tie-break: both candidates in affiliations, kept rank 1");
      }
      break;
    }
  }
  if (!chosen) {
    out.verdict = Verdict::no_intersection;
    out.trace.emplace_back("no candidate appears among affiliations");
    return out;
  }

  if (!english_countries.contains(*chosen)) {
    for (const auto& c : affs) {
      if (english_countries.contains(c)) {
        out.verdict = Verdict::english_immersion_excluded;
        out.trace.push_back("non-English candidate " + chosen->str() + " also affiliated in English-speaking " +
                            c.str());
        return out;
      }
    }
  }

  out.verdict = Verdict::verified;
  out.country = chosen;
  out.trace.push_back("verified " + chosen->str());
  return out;
}

VerifiedAuthor prediction_failed(const AuthorRecord& author, std::string_view reason) {
  return {author, Verdict::prediction_failed, std::nullopt, {"prediction failed: " + std::string(reason)}};
}

std::string_view to_string(UnlabeledReason reason) {
  switch (reason) {
    case UnlabeledReason::too_many_authors: return "too_many_authors";
    case UnlabeledReason::key_author_disagreement: return "key_author_disagreement";
    case UnlabeledReason::key_author_unverified: return "key_author_unverified";
    case UnlabeledReason::unmapped_country: return "unmapped_country";
  }
  return "unknown";
}

std::vector<std::size_t> key_author_positions(std::size_t author_count) {
  if (author_count == 0) return {};
  std::vector<std::size_t> keys{0, std::min<std::size_t>(1, author_count - 1), author_count - 1};
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

Consensus paper_consensus(const PaperRecord& paper, std::span<const VerifiedAuthor> verified,
                          std::size_t max_authors) {
  if (verified.size() != paper.authors.size()) {
    throw AlignmentError("paper " + paper.paper_id + " has " + std::to_string(paper.authors.size()) +
                         " authors but " + std::to_string(verified.size()) + " verdicts");
  }
  Consensus out;
  if (paper.authors.size() > max_authors) {
    out.reason = UnlabeledReason::too_many_authors;
    return out;
  }
  out.key_positions = key_author_positions(paper.authors.size());
  for (auto pos : out.key_positions) {
    if (!verified[pos].is_verified()) {
      out.reason = UnlabeledReason::key_author_unverified;
      return out;
    }
  }
  const CountryCode first = *verified[out.key_positions.front()].country;
  for (auto pos : out.key_positions) {
    if (*verified[pos].country != first) {
      out.reason = UnlabeledReason::key_author_disagreement;
      return out;
    }
  }
  out.country = first;
  return out;
}

MappingTable MappingTable::builtin() {
  return from_csv(
      "country_code,label\nUS,english_american\nGB,english_british\nFR,french\nDE,german\n"
      "IT,italian\nCN,chinese\nJP,japanese\nKR,korean\n");
}

MappingTable MappingTable::from_csv(std::string_view text) {
  MappingTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::set<L1Label> labels_seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (normalize_whitespace(line).empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("mapping line " + std::to_string(line_no) + ": no comma");
    auto code_text = normalize_whitespace(line.substr(0, comma));
    auto label_text = normalize_whitespace(line.substr(comma + 1));
    if (line_no == 1 && code_text == "country_code") continue;
    auto code = CountryCode::parse(code_text);
    auto label = label_from_string(label_text);
    if (!code || !label) {
      throw std::invalid_argument("mapping line " + std::to_string(line_no) + ": invalid entry '" + line + "'");
    }
    if (!table.entries_.emplace(*code, *label).second) {
      throw std::invalid_argument("mapping line " + std::to_string(line_no) + ": duplicate country " + code->str());
    }
    if (!labels_seen.insert(*label).second) {
      throw std::invalid_argument("mapping line " + std::to_string(line_no) + ": label " + label_text +
                                  " already mapped; table must be injective");
    }
  }
  if (table.entries_.empty()) throw std::invalid_argument("mapping table is empty");
  return table;
}

MappingTable MappingTable::load(const std::filesystem::path& path) { return from_csv(read_file(path)); }

std::optional<L1Label> MappingTable::lookup(CountryCode country) const {
  auto it = entries_.find(country);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::optional<L1Label> map_country_to_language(CountryCode country, const MappingTable& table) {
  return table.lookup(country);
}

ChatCompletionClient::ChatCompletionClient(ChatEndpointConfig config, HttpTransport& transport, RateLimiter& limiter)
    : config_(std::move(config)), transport_(transport), limiter_(limiter) {}

nlohmann::json ChatCompletionClient::request_body(const ChatEndpointConfig& config, const PromptBundle& prompt) {
  return {{"model", config.model},
          {"messages", nlohmann::json::array({{{"role", "system"}, {"content", prompt.system}},
                                              {{"role", "user"}, {"content", prompt.user}}})},
          {"temperature", config.temperature}};
}

std::string ChatCompletionClient::complete(const PromptBundle& prompt) {
  std::string url = config_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/chat/completions";
  HttpHeaders headers;
  if (!config_.api_key.empty()) headers["Authorization"] = "Bearer " + config_.api_key;
  limiter_.acquire();
  auto response = transport_.post_json(url, request_body(config_, prompt).dump(), headers);
  if (response.status != 200) {
    throw ClientError("chat completion returned HTTP " + std::to_string(response.status) + ": " +
                      response.body.substr(0, 200));
  }
  auto body = nlohmann::json::parse(response.body, nullptr, false);
  if (body.is_discarded()) throw ClientError("chat completion response is not JSON");
  try {
    return body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ClientError(std::string("chat completion response lacks choices[0].message.content: ") + e.what());
  }
}

StubOriginClient StubOriginClient::load(const std::filesystem::path& path) {
  auto doc = nlohmann::json::parse(read_file(path));
  if (!doc.is_object()) throw std::invalid_argument("stub responses must be a JSON object: " + path.string());
  std::map<std::string, std::string> responses;
  for (const auto& [name, raw] : doc.items()) responses.emplace(name, raw.get<std::string>());
  return StubOriginClient(std::move(responses));
}

std::string StubOriginClient::complete(const PromptBundle& prompt) {
  ++calls_;
  constexpr std::string_view kPrefix = "Name: ";
  if (!prompt.user.starts_with(kPrefix)) throw ClientError("stub client only answers name-origin requests");
  auto name = prompt.user.substr(kPrefix.size());
  auto it = responses_.find(name);
  if (it == responses_.end()) throw ClientError("no recorded response for name '" + name + "'");
  return it->second;
}

LabelOutcome label_paper(const PaperRecord& paper, OriginClient& client, const LabelingConfig& config) {
  LabelOutcome out;
  out.paper = paper;
  if (paper.authors.size() > config.max_authors) {
    out.reason = UnlabeledReason::too_many_authors;
    return out;
  }

  for (const auto& author : paper.authors) {
    std::string raw = client.complete(build_name_origin_request(author.display_name));
    try {
      OriginPrediction prediction{author.display_name, parse_origin_response(raw), raw};
      out.provenance.push_back(verify_author(author, prediction, config.english_countries));
    } catch (const MalformedResponse& e) {
      out.provenance.push_back(prediction_failed(author, e.what()));
    }
  }

  auto consensus = paper_consensus(paper, out.provenance, config.max_authors);
  if (!consensus.country) {
    out.reason = consensus.reason;
    return out;
  }
  out.country = consensus.country;
  auto label = map_country_to_language(*consensus.country, config.table);
  if (!label) {
    out.reason = UnlabeledReason::unmapped_country;
    return out;
  }
  out.labeled = LabeledPaper{paper, *label, *consensus.country, assign_era(paper.year).era, consensus.key_positions,
                             out.provenance};
  return out;
}

nlohmann::json to_json(const VerifiedAuthor& verified) {
  nlohmann::json j{{"position", verified.author.position},
                   {"name", verified.author.display_name},
                   {"verdict", to_string(verified.verdict)},
                   {"trace", verified.trace}};
  j["country"] = verified.country ? nlohmann::json(verified.country->str()) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const LabeledPaper& labeled) {
  auto j = to_json(labeled.paper);
  j["label"] = to_string(labeled.label);
  j["country"] = labeled.country.str();
  j["era"] = to_string(labeled.era);
  j["key_authors"] = labeled.key_authors;
  auto provenance = nlohmann::json::array();
  for (const auto& v : labeled.provenance) provenance.push_back(to_json(v));
  j["provenance"] = std::move(provenance);
  return j;
}

LabeledPaper labeled_paper_from_json(const nlohmann::json& object) {
  PaperRecord paper = paper_from_json(object);
  auto label = label_from_string(object.at("label").get<std::string>());
  if (!label) throw SchemaViolation("label outside the closed set: " + object.at("label").dump());
  auto country = CountryCode::parse(object.value("country", std::string{}));
  if (!country) throw SchemaViolation("labeled paper " + paper.paper_id + " lacks a valid country");
  Era era = assign_era(paper.year).era;
  if (auto it = object.find("era"); it != object.end() && it->is_string()) {
    auto parsed = era_from_string(it->get<std::string>());
    if (!parsed) throw SchemaViolation("unknown era " + it->dump());
    era = *parsed;
  }
  LabeledPaper out{std::move(paper), *label, *country, era, {}, {}};
  if (auto it = object.find("key_authors"); it != object.end()) {
    out.key_authors = it->get<std::vector<std::size_t>>();
  } else {
    out.key_authors = key_author_positions(out.paper.authors.size());
  }
  return out;
}

nlohmann::json audit_json(const LabelOutcome& outcome) {
  nlohmann::json j{{"paper_id", outcome.paper.paper_id},
                   {"reason", outcome.reason ? nlohmann::json(to_string(*outcome.reason)) : nlohmann::json(nullptr)},
                   {"author_count", outcome.paper.authors.size()}};
  j["country"] = outcome.country ? nlohmann::json(outcome.country->str()) : nlohmann::json(nullptr);
  auto provenance = nlohmann::json::array();
  for (const auto& v : outcome.provenance) provenance.push_back(to_json(v));
  j["provenance"] = std::move(provenance);
  return j;
}

}  // namespace l1trace
