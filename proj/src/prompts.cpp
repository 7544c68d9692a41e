#include "l1trace/prompts.hpp"

#include <set>

#include "l1trace/template_assets.hpp"
#include "l1trace/text_util.hpp"

namespace l1trace {

namespace templates {

std::string_view get(std::string_view name) {
  for (const auto& t : detail::embedded()) {
    if (t.name == name) return t.text;
  }
  throw std::out_of_range("unknown template " + std::string(name));
}

std::map<std::string, std::string> checksums() {
  std::map<std::string, std::string> out;
  for (const auto& t : detail::embedded()) out.emplace(std::string(t.name), sha256_hex(t.text));
  return out;
}

void verify(std::string_view name, std::string_view text, std::string_view expected_sha256) {
  if (expected_sha256.empty()) throw TemplateDrift("template " + std::string(name) + " has no recorded checksum");
  auto actual = sha256_hex(text);
  if (actual != expected_sha256) {
    throw TemplateDrift("template " + std::string(name) + " checksum " + actual + " does not match recorded " +
                        std::string(expected_sha256));
  }
}

void verify_all() {
  for (const auto& t : detail::embedded()) verify(t.name, t.text, t.expected_sha256);
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    auto open = tmpl.find('{', i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    auto close = tmpl.find('}', open);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    out.append(tmpl.substr(i, open - i));
    auto key = tmpl.substr(open + 1, close - open - 1);
    auto it = values.find(key);
    if (it == values.end()) throw std::invalid_argument("no value for placeholder {" + std::string(key) + "}");
    out.append(it->second);
    i = close + 1;
  }
  return out;
}

}  // namespace templates

namespace {

void require_text(std::string_view title, std::string_view abstract) {
  if (normalize_whitespace(title).empty()) throw std::invalid_argument("title is empty");
  if (normalize_whitespace(abstract).empty()) throw std::invalid_argument("abstract is empty");
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_terminal_punct(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case '"': case '\'': case '`': case ')': case ']': case '}':
      return true;
    default:
      return false;
  }
}

bool is_opening_punct(char c) { return c == '"' || c == '\'' || c == '(' || c == '[' || c == '{'; }

}  // namespace

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::name_origin: return "name_origin";
    case Regime::few_shot: return "few_shot";
    case Regime::fine_tune: return "fine_tune";
  }
  return "unknown";
}

std::optional<Regime> regime_from_string(std::string_view text) {
  for (auto r : {Regime::name_origin, Regime::few_shot, Regime::fine_tune}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

PromptBundle build_name_origin_request(std::string_view name) {
  if (name.empty()) throw std::invalid_argument("author name is empty");
  return {std::string(templates::get("name_origin_system")),
          templates::render(templates::get("name_origin_user"), {{"name", std::string(name)}}), Regime::name_origin};
}

PromptBundle build_fewshot_prompt(std::string_view title, std::string_view abstract,
                                  std::span<const Exemplar> exemplars) {
  require_text(title, abstract);
  std::set<L1Label> seen;
  std::string user;
  const auto block = templates::get("fewshot_exemplar");
  for (const auto& ex : exemplars) {
    if (!seen.insert(ex.label).second) throw DuplicateExemplarLabel(ex.label);
    require_text(ex.title, ex.abstract);
    user += templates::render(block, {{"title", ex.title}, {"abstract", ex.abstract},
                                      {"label", std::string(to_string(ex.label))}});
  }
  user += templates::render(templates::get("fewshot_user"),
                            {{"title", std::string(title)}, {"abstract", std::string(abstract)}});
  return {std::string(templates::get("fewshot_system")), std::move(user), Regime::few_shot};
}

PromptBundle build_finetune_query(std::string_view title, std::string_view abstract) {
  require_text(title, abstract);
  return {std::string(templates::get("finetune_system")),
          templates::render(templates::get("finetune_user"),
                            {{"title", std::string(title)}, {"abstract", std::string(abstract)}}),
          Regime::fine_tune};
}

FinetuneExample build_finetune_example(std::string_view title, std::string_view abstract, L1Label label) {
  return {build_finetune_query(title, abstract), std::string(to_string(label))};
}

ParsedLabel parse_label(std::string_view raw) {
  std::string s = ascii_lower(raw);
  // Trim, strip terminal punctuation and enclosing quotes/brackets until stable.
  for (;;) {
    auto before = s.size();
    while (!s.empty() && (is_space(s.back()) || is_terminal_punct(s.back()))) s.pop_back();
    std::size_t lead = 0;
    while (lead < s.size() && (is_space(s[lead]) || is_opening_punct(s[lead]))) ++lead;
    s.erase(0, lead);
    if (s.size() == before) break;
  }
  std::string collapsed;
  bool in_space = false;
  for (char c : s) {
    if (is_space(c)) {
      in_space = true;
      continue;
    }
    if (in_space) collapsed.push_back('_');
    in_space = false;
    collapsed.push_back(c);
  }
  return {label_from_string(collapsed), std::string(raw)};
}

nlohmann::json to_json(const PromptBundle& bundle) {
  return {{"regime", to_string(bundle.regime)}, {"system", bundle.system}, {"user", bundle.user}};
}

}  // namespace l1trace
