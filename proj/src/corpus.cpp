#include "l1trace/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_map>

#include "l1trace/text_util.hpp"

namespace l1trace {

namespace {

std::vector<const LabeledPaper*> sorted_unique(std::span<const LabeledPaper> pool) {
  std::vector<const LabeledPaper*> out;
  out.reserve(pool.size());
  for (const auto& p : pool) out.push_back(&p);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto* a, const auto* b) { return a->paper.paper_id < b->paper.paper_id; });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const auto* a, const auto* b) { return a->paper.paper_id == b->paper.paper_id; }),
            out.end());
  return out;
}

CorpusRow row_of(const LabeledPaper& p, bool duplicate) {
  return {p.paper.paper_id, p.era, p.label, p.paper.title, p.paper.abstract, duplicate, p.paper.year};
}

}  // namespace

EraAssignment assign_era(int year) {
  if (year < 1950) throw std::invalid_argument("year " + std::to_string(year) + " precedes 1950");
  if (year <= 2015) return {Era::pre_nn, false};
  if (year <= 2022) return {Era::pre_llm, false};
  return {Era::post_llm, year > kLastCollectedYear};
}

std::size_t SamplingConfig::cap_for(L1Label label) const {
  auto it = per_year_cap_overrides.find(label);
  return it == per_year_cap_overrides.end() ? per_year_cap : it->second;
}

void SamplingConfig::validate() const {
  if (per_language_train == 0) throw std::invalid_argument("per_language_train must be > 0");
  if (per_cell_eval == 0) throw std::invalid_argument("per_cell_eval must be > 0");
  if (per_year_cap == 0) throw std::invalid_argument("per_year_cap must be > 0");
  for (const auto& [label, cap] : per_year_cap_overrides) {
    if (cap == 0) throw std::invalid_argument("per_year_cap override for " + std::string(to_string(label)) + " must be > 0");
  }
}

nlohmann::json to_json(const SamplingConfig& config) {
  nlohmann::json overrides = nlohmann::json::object();
  for (const auto& [label, cap] : config.per_year_cap_overrides) overrides[std::string(to_string(label))] = cap;
  return {{"per_language_train", config.per_language_train},
          {"per_cell_eval", config.per_cell_eval},
          {"per_year_cap", config.per_year_cap},
          {"per_year_cap_overrides", std::move(overrides)},
          {"rng_seed", config.rng_seed},
          {"allow_duplication", config.allow_duplication}};
}

SamplingConfig sampling_config_from_json(const nlohmann::json& object) {
  SamplingConfig config;
  if (!object.is_object()) throw std::invalid_argument("sampling config must be an object");
  config.per_language_train = object.value("per_language_train", config.per_language_train);
  config.per_cell_eval = object.value("per_cell_eval", config.per_cell_eval);
  config.per_year_cap = object.value("per_year_cap", config.per_year_cap);
  config.rng_seed = object.value("rng_seed", config.rng_seed);
  config.allow_duplication = object.value("allow_duplication", config.allow_duplication);
  if (auto it = object.find("per_year_cap_overrides"); it != object.end()) {
    for (const auto& [name, cap] : it->items()) {
      auto label = label_from_string(name);
      if (!label) throw std::invalid_argument("per_year_cap_overrides: unknown label " + name);
      config.per_year_cap_overrides[*label] = cap.get<std::size_t>();
    }
  }
  config.validate();
  return config;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index over an empty range");
  const std::uint64_t bound = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

Corpus sample_training(std::span<const LabeledPaper> pool, const SamplingConfig& config) {
  config.validate();
  auto sorted = sorted_unique(pool);
  std::mt19937_64 rng(config.rng_seed);

  Corpus corpus;
  corpus.manifest.kind = "train";
  corpus.manifest.seed = config.rng_seed;
  corpus.manifest.config = config;

  for (L1Label label : kAllLabels) {
    std::vector<const LabeledPaper*> members;
    for (const auto* p : sorted) {
      if (p->label == label) members.push_back(p);
    }
    seeded_shuffle(members, rng);

    const std::size_t cap = config.cap_for(label);
    std::map<int, std::size_t> per_year;
    std::vector<const LabeledPaper*> chosen;
    for (const auto* p : members) {
      if (chosen.size() == config.per_language_train) break;
      auto& used = per_year[p->paper.year];
      if (used >= cap) continue;
      ++used;
      chosen.push_back(p);
    }
    if (chosen.size() < config.per_language_train) {
      std::map<int, std::size_t> available;
      for (const auto* p : members) ++available[p->paper.year];
      std::size_t achievable = 0;
      for (const auto& [year, n] : available) achievable += std::min(n, cap);
      throw InsufficientPool("label " + std::string(to_string(label)) + " reaches only " + std::to_string(achievable) +
                                 " of " + std::to_string(config.per_language_train) +
                                 " training papers under a per-year cap of " + std::to_string(cap),
                             achievable, config.per_language_train);
    }
    std::sort(chosen.begin(), chosen.end(),
              [](const auto* a, const auto* b) { return a->paper.paper_id < b->paper.paper_id; });
    for (const auto* p : chosen) {
      corpus.rows.push_back(row_of(*p, false));
      ++corpus.manifest.cells[{p->era, label}].unique_count;
      ++corpus.manifest.year_histogram[label][p->paper.year];
    }
  }
  return corpus;
}

Corpus build_eval_cells(std::span<const LabeledPaper> pool, const SamplingConfig& config) {
  config.validate();
  auto sorted = sorted_unique(pool);
  std::mt19937_64 rng(config.rng_seed);

  Corpus corpus;
  corpus.manifest.kind = "eval";
  corpus.manifest.seed = config.rng_seed;
  corpus.manifest.config = config;

  for (Era era : kAllEras) {
    for (L1Label label : kAllLabels) {
      std::vector<const LabeledPaper*> members;
      for (const auto* p : sorted) {
        if (p->era == era && p->label == label) members.push_back(p);
      }
      if (members.empty()) throw EmptyCell(era, label);
      seeded_shuffle(members, rng);
      if (members.size() > config.per_cell_eval) members.resize(config.per_cell_eval);
      std::sort(members.begin(), members.end(),
                [](const auto* a, const auto* b) { return a->paper.paper_id < b->paper.paper_id; });

      const std::size_t missing = config.per_cell_eval - members.size();
      if (missing > 0 && !config.allow_duplication) {
        throw InsufficientPool("eval cell (" + std::string(to_string(era)) + ", " + std::string(to_string(label)) +
                                   ") has " + std::to_string(members.size()) + " of " +
                                   std::to_string(config.per_cell_eval) + " papers and duplication is disabled",
                               members.size(), config.per_cell_eval);
      }
      auto& cell = corpus.manifest.cells[{era, label}];
      for (const auto* p : members) {
        corpus.rows.push_back(row_of(*p, false));
        ++corpus.manifest.year_histogram[label][p->paper.year];
      }
      for (std::size_t k = 0; k < missing; ++k) {
        corpus.rows.push_back(row_of(*members[uniform_index(rng, members.size())], true));
      }
      cell.unique_count = members.size();
      cell.duplicated_count = missing;
    }
  }
  return corpus;
}

std::string content_key(std::string_view title, std::string_view abstract) {
  return sha256_hex(ascii_lower(normalize_whitespace(title)) + "\n" + ascii_lower(normalize_whitespace(abstract)));
}

DedupResult cross_dedup(std::span<const CorpusRow> train, std::span<const CorpusRow> eval) {
  std::unordered_map<std::string, std::string> eval_ids;
  std::unordered_map<std::string, std::string> eval_content;
  for (const auto& row : eval) {
    eval_ids.emplace(row.paper_id, row.paper_id);
    eval_content.emplace(content_key(row.title, row.abstract), row.paper_id);
  }
  DedupResult out;
  for (const auto& row : train) {
    if (auto it = eval_ids.find(row.paper_id); it != eval_ids.end()) {
      out.report.push_back({row.paper_id, it->second, "paper_id"});
      continue;
    }
    if (auto it = eval_content.find(content_key(row.title, row.abstract)); it != eval_content.end()) {
      out.report.push_back({row.paper_id, it->second, "content_hash"});
      continue;
    }
    out.train.push_back(row);
  }
  return out;
}

nlohmann::json to_json(const CorpusRow& row) {
  return {{"paper_id", row.paper_id}, {"era", to_string(row.era)},   {"label", to_string(row.label)},
          {"title", row.title},       {"abstract", row.abstract},    {"is_duplicate", row.is_duplicate}};
}

CorpusRow corpus_row_from_json(const nlohmann::json& object) {
  CorpusRow row;
  row.paper_id = object.at("paper_id").get<std::string>();
  auto era = era_from_string(object.at("era").get<std::string>());
  auto label = label_from_string(object.at("label").get<std::string>());
  if (!era || !label) throw SchemaViolation("corpus row " + row.paper_id + " has an invalid era or label");
  row.era = *era;
  row.label = *label;
  row.title = object.at("title").get<std::string>();
  row.abstract = object.at("abstract").get<std::string>();
  row.is_duplicate = object.value("is_duplicate", false);
  return row;
}

nlohmann::json to_json(const CorpusManifest& manifest) {
  nlohmann::json cells = nlohmann::json::array();
  std::size_t total = 0;
  for (const auto& [key, counts] : manifest.cells) {
    cells.push_back({{"era", to_string(key.first)},
                     {"label", to_string(key.second)},
                     {"unique_count", counts.unique_count},
                     {"duplicated_count", counts.duplicated_count}});
    total += counts.unique_count + counts.duplicated_count;
  }
  nlohmann::json years = nlohmann::json::object();
  for (const auto& [label, hist] : manifest.year_histogram) {
    nlohmann::json h = nlohmann::json::object();
    for (const auto& [year, n] : hist) h[std::to_string(year)] = n;
    years[std::string(to_string(label))] = std::move(h);
  }
  nlohmann::json dedup = nlohmann::json::array();
  for (const auto& d : manifest.dedup_report) {
    dedup.push_back({{"removed_paper_id", d.removed_paper_id},
                     {"matched_eval_id", d.matched_eval_id},
                     {"matched_by", d.matched_by}});
  }
  return {{"kind", manifest.kind}, {"seed", manifest.seed},        {"config", to_json(manifest.config)},
          {"cells", std::move(cells)}, {"total_rows", total},       {"year_histogram", std::move(years)},
          {"dedup_report", std::move(dedup)}};
}

std::string corpus_to_jsonl(std::span<const CorpusRow> rows) {
  std::string out;
  for (const auto& row : rows) {
    out += to_json(row).dump();
    out += '\n';
  }
  return out;
}

std::vector<CorpusRow> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  std::vector<CorpusRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (normalize_whitespace(line).empty()) continue;
    rows.push_back(corpus_row_from_json(nlohmann::json::parse(line)));
  }
  return rows;
}

std::vector<LabeledPaper> read_labeled_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open labeled pool " + path.string());
  std::vector<LabeledPaper> pool;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (normalize_whitespace(line).empty()) continue;
    try {
      pool.push_back(labeled_paper_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw SchemaViolation(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pool;
}

}  // namespace l1trace
