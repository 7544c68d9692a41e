#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "l1trace/types.hpp"

namespace l1trace {

using json = nlohmann::json;

struct AuthorRecord {
  std::string display_name;
  std::size_t position = 0;
  // Empty when no listed institution carried a country code.
  std::set<CountryCode> affiliation_countries;

  bool operator==(const AuthorRecord&) const = default;
};

struct PaperRecord {
  std::string paper_id;
  std::string title;
  std::string abstract;
  int year = 0;
  std::string venue;
  std::vector<AuthorRecord> authors;

  bool operator==(const PaperRecord&) const = default;
};

inline constexpr int kMinYear = 1950;
inline constexpr int kMaxYear = 2100;

class SchemaViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingYear : public SchemaViolation {
 public:
  MissingYear() : SchemaViolation("record has neither a publication year nor a publication date") {}
};

// Throws SchemaViolation when an invariant of PaperRecord does not hold.
void validate(const PaperRecord& paper);

// Prefers an explicit year field ("year", then "publication_year") over the
// prefix of "publication_date". Throws MissingYear when none is usable.
int extract_year(const json& raw);

enum class DumpFormat { anthology, arxiv };

std::optional<DumpFormat> dump_format_from_string(std::string_view text);
std::string_view to_string(DumpFormat format);

json to_json(const AuthorRecord& author);
json to_json(const PaperRecord& paper);

// Parses one dump object. Title and abstract are whitespace-normalized and the
// result is validated. Author positions follow list order.
PaperRecord paper_from_json(const json& object, DumpFormat format = DumpFormat::anthology);

struct LineError {
  std::size_t line = 0;
  std::string message;
};

// Streams PaperRecords out of a JSONL dump in file order. Lines that fail to
// parse or validate are collected in violations() instead of being dropped
// silently. Blank lines are skipped.
class DumpReader {
 public:
  DumpReader(const std::filesystem::path& path, DumpFormat format);

  std::optional<PaperRecord> next();

  const std::vector<LineError>& violations() const { return violations_; }

 private:
  std::ifstream in_;
  DumpFormat format_;
  std::size_t line_no_ = 0;
  std::vector<LineError> violations_;
};

struct DumpLoad {
  std::vector<PaperRecord> records;
  std::vector<LineError> violations;
};

DumpLoad load_dump(const std::filesystem::path& path, DumpFormat format);

std::string dump_to_jsonl(std::span<const PaperRecord> papers);
void write_dump(const std::filesystem::path& path, std::span<const PaperRecord> papers);

// OpenAlex /works payload -> PaperRecord. The abstract is rebuilt from
// abstract_inverted_index when no plain abstract is present. Affiliation
// countries are the union of country codes over the author's institutions on
// this work; institutions without a code contribute nothing.
// Throws SchemaViolation for missing authorships, year, title or abstract.
PaperRecord parse_openalex_work(std::string_view payload);

std::string rebuild_inverted_abstract(const json& inverted_index);

}  // namespace l1trace
