#include "l1trace/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "l1trace/text_util.hpp"

namespace l1trace {

namespace {

std::string string_field(const json& object, std::string_view key) {
  auto it = object.find(key);
  if (it == object.end() || it->is_null()) return {};
  if (!it->is_string()) throw SchemaViolation("field '" + std::string(key) + "' is not a string");
  return it->get<std::string>();
}

std::optional<int> parse_leading_year(std::string_view text) {
  if (text.size() < 4) return std::nullopt;
  int year = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + 4, year);
  if (ec != std::errc{} || ptr != text.data() + 4) return std::nullopt;
  return year;
}

std::optional<int> year_value(const json& value) {
  if (value.is_number_integer()) return value.get<int>();
  if (value.is_string()) {
    const auto& s = value.get_ref<const std::string&>();
    int year = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), year);
    if (ec == std::errc{} && ptr == s.data() + s.size()) return year;
  }
  return std::nullopt;
}

}  // namespace

void validate(const PaperRecord& paper) {
  if (paper.paper_id.empty()) throw SchemaViolation("paper_id is empty");
  if (paper.authors.empty()) throw SchemaViolation("paper " + paper.paper_id + " has no authors");
  if (paper.year < kMinYear || paper.year > kMaxYear) {
    throw SchemaViolation("paper " + paper.paper_id + " has year " + std::to_string(paper.year) +
                          " outside [1950, 2100]");
  }
  if (normalize_whitespace(paper.title).empty()) throw SchemaViolation("paper " + paper.paper_id + " has an empty title");
  if (normalize_whitespace(paper.abstract).empty()) {
    throw SchemaViolation("paper " + paper.paper_id + " has an empty abstract");
  }
  std::set<std::size_t> positions;
  for (const auto& author : paper.authors) {
    if (!positions.insert(author.position).second) {
      throw SchemaViolation("paper " + paper.paper_id + " repeats author position " + std::to_string(author.position));
    }
  }
}

int extract_year(const json& raw) {
  for (const char* key : {"year", "publication_year"}) {
    if (auto it = raw.find(key); it != raw.end() && !it->is_null()) {
      if (auto year = year_value(*it)) return *year;
    }
  }
  if (auto it = raw.find("publication_date"); it != raw.end() && it->is_string()) {
    if (auto year = parse_leading_year(it->get_ref<const std::string&>())) return *year;
  }
  throw MissingYear();
}

std::optional<DumpFormat> dump_format_from_string(std::string_view text) {
  if (text == "anthology") return DumpFormat::anthology;
  if (text == "arxiv") return DumpFormat::arxiv;
  return std::nullopt;
}

std::string_view to_string(DumpFormat format) {
  return format == DumpFormat::arxiv ? "arxiv" : "anthology";
}

json to_json(const AuthorRecord& author) {
  json countries = json::array();
  for (const auto& c : author.affiliation_countries) countries.push_back(c.str());
  return json{{"name", author.display_name}, {"countries", std::move(countries)}};
}

json to_json(const PaperRecord& paper) {
  json authors = json::array();
  for (const auto& a : paper.authors) authors.push_back(to_json(a));
  return json{{"paper_id", paper.paper_id}, {"title", paper.title},  {"abstract", paper.abstract},
              {"year", paper.year},         {"venue", paper.venue},  {"authors", std::move(authors)}};
}

PaperRecord paper_from_json(const json& object, DumpFormat format) {
  if (!object.is_object()) throw SchemaViolation("line is not a JSON object");
  PaperRecord paper;
  paper.paper_id = string_field(object, "paper_id");
  if (paper.paper_id.empty() && format == DumpFormat::arxiv) paper.paper_id = string_field(object, "id");
  paper.title = normalize_whitespace(string_field(object, "title"));
  paper.abstract = normalize_whitespace(string_field(object, "abstract"));
  paper.year = extract_year(object);
  paper.venue = string_field(object, "venue");
  if (paper.venue.empty()) paper.venue = format == DumpFormat::arxiv ? "arXiv" : "ACL Anthology";

  auto authors = object.find("authors");
  if (authors == object.end() || !authors->is_array()) throw SchemaViolation("missing authors array");
  for (const auto& entry : *authors) {
    if (!entry.is_object()) throw SchemaViolation("author entry is not an object");
    AuthorRecord author;
    author.display_name = string_field(entry, "name");
    if (author.display_name.empty()) throw SchemaViolation("author without a name");
    author.position = paper.authors.size();
    if (auto countries = entry.find("countries"); countries != entry.end() && !countries->is_null()) {
      if (!countries->is_array()) throw SchemaViolation("author countries is not an array");
      for (const auto& c : *countries) {
        auto code = c.is_string() ? CountryCode::parse(c.get_ref<const std::string&>()) : std::nullopt;
        if (!code) throw SchemaViolation("invalid country code " + c.dump());
        author.affiliation_countries.insert(*code);
      }
    }
    paper.authors.push_back(std::move(author));
  }
  validate(paper);
  return paper;
}

DumpReader::DumpReader(const std::filesystem::path& path, DumpFormat format) : in_(path), format_(format) {
  if (!in_) throw std::runtime_error("cannot open dump " + path.string());
}

std::optional<PaperRecord> DumpReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (normalize_whitespace(line).empty()) continue;
    try {
      return paper_from_json(json::parse(line), format_);
    } catch (const json::exception& e) {
      violations_.push_back({line_no_, std::string("invalid JSON: ") + e.what()});
    } catch (const SchemaViolation& e) {
      violations_.push_back({line_no_, e.what()});
    }
  }
  return std::nullopt;
}

DumpLoad load_dump(const std::filesystem::path& path, DumpFormat format) {
  DumpReader reader(path, format);
  DumpLoad load;
  while (auto record = reader.next()) load.records.push_back(std::move(*record));
  load.violations = reader.violations();
  return load;
}

std::string dump_to_jsonl(std::span<const PaperRecord> papers) {
  std::string out;
  for (const auto& p : papers) {
    out += to_json(p).dump();
    out += '\n';
  }
  return out;
}

void write_dump(const std::filesystem::path& path, std::span<const PaperRecord> papers) {
  write_file_atomic(path, dump_to_jsonl(papers));
}

std::string rebuild_inverted_abstract(const json& inverted_index) {
  if (!inverted_index.is_object()) return {};
  std::map<std::size_t, std::string> by_position;
  for (const auto& [word, positions] : inverted_index.items()) {
    if (!positions.is_array()) continue;
    for (const auto& pos : positions) {
      if (pos.is_number_unsigned() || pos.is_number_integer()) by_position[pos.get<std::size_t>()] = word;
    }
  }
  std::string out;
  for (const auto& [pos, word] : by_position) {
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

PaperRecord parse_openalex_work(std::string_view payload) {
  json work;
  try {
    work = json::parse(payload);
  } catch (const json::exception& e) {
    throw SchemaViolation(std::string("response is not JSON: ") + e.what());
  }
  if (!work.is_object()) throw SchemaViolation("response is not a JSON object");

  PaperRecord paper;
  paper.paper_id = string_field(work, "id");
  constexpr std::string_view kPrefix = "https://openalex.org/";
  if (paper.paper_id.starts_with(kPrefix)) paper.paper_id.erase(0, kPrefix.size());

  std::string title = string_field(work, "title");
  if (title.empty()) title = string_field(work, "display_name");
  paper.title = normalize_whitespace(title);

  std::string abstract = string_field(work, "abstract");
  if (abstract.empty()) {
    if (auto it = work.find("abstract_inverted_index"); it != work.end()) abstract = rebuild_inverted_abstract(*it);
  }
  paper.abstract = normalize_whitespace(abstract);
  paper.year = extract_year(work);

  if (auto loc = work.find("primary_location"); loc != work.end() && loc->is_object()) {
    if (auto src = loc->find("source"); src != loc->end() && src->is_object()) {
      paper.venue = string_field(*src, "display_name");
    }
  }

  auto authorships = work.find("authorships");
  if (authorships == work.end() || !authorships->is_array() || authorships->empty()) {
    throw SchemaViolation("work " + paper.paper_id + " has no authorships");
  }
  for (const auto& authorship : *authorships) {
    AuthorRecord author;
    author.position = paper.authors.size();
    if (auto a = authorship.find("author"); a != authorship.end() && a->is_object()) {
      author.display_name = string_field(*a, "display_name");
    }
    if (author.display_name.empty()) author.display_name = string_field(authorship, "raw_author_name");
    if (author.display_name.empty()) throw SchemaViolation("authorship without an author name");
    if (auto insts = authorship.find("institutions"); insts != authorship.end() && insts->is_array()) {
      for (const auto& inst : *insts) {
        auto cc = inst.find("country_code");
        if (cc == inst.end() || !cc->is_string()) continue;
        if (auto code = CountryCode::parse(cc->get_ref<const std::string&>())) author.affiliation_countries.insert(*code);
      }
    }
    paper.authors.push_back(std::move(author));
  }
  validate(paper);
  return paper;
}

}  // namespace l1trace
