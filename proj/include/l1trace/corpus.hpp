#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "l1trace/labeling.hpp"
#include "l1trace/types.hpp"

namespace l1trace {

// Last year covered by the post-LLM era as collected; later years still map
// to post_llm but are flagged.
inline constexpr int kLastCollectedYear = 2025;

struct EraAssignment {
  Era era;
  bool beyond_collected_range = false;
};

// <=2015 pre_nn, 2016-2022 pre_llm, >=2023 post_llm. Throws
// std::invalid_argument for years before 1950.
EraAssignment assign_era(int year);

struct SamplingConfig {
  std::size_t per_language_train = 200;
  std::size_t per_cell_eval = 50;
  std::size_t per_year_cap = 20;
  std::map<L1Label, std::size_t> per_year_cap_overrides;
  std::uint64_t rng_seed = 0;
  bool allow_duplication = true;

  std::size_t cap_for(L1Label label) const;

  // Throws std::invalid_argument when any count is zero.
  void validate() const;
};

nlohmann::json to_json(const SamplingConfig& config);
SamplingConfig sampling_config_from_json(const nlohmann::json& object);

struct CorpusRow {
  std::string paper_id;
  Era era;
  L1Label label;
  std::string title;
  std::string abstract;
  bool is_duplicate = false;
  int year = 0;  // kept for cap bookkeeping; not serialized

  bool operator==(const CorpusRow&) const = default;
};

struct CellCounts {
  std::size_t unique_count = 0;
  std::size_t duplicated_count = 0;
};

struct DedupEntry {
  std::string removed_paper_id;
  std::string matched_eval_id;
  std::string matched_by;  // "paper_id" or "content_hash"
};

struct CorpusManifest {
  std::string kind;  // "train" or "eval"
  std::map<std::pair<Era, L1Label>, CellCounts> cells;
  std::map<L1Label, std::map<int, std::size_t>> year_histogram;
  std::uint64_t seed = 0;
  SamplingConfig config;
  std::vector<DedupEntry> dedup_report;
};

struct Corpus {
  std::vector<CorpusRow> rows;
  CorpusManifest manifest;
};

class InsufficientPool : public std::runtime_error {
 public:
  InsufficientPool(std::string what, std::size_t achievable, std::size_t required)
      : std::runtime_error(std::move(what)), achievable_(achievable), required_(required) {}

  std::size_t achievable() const { return achievable_; }
  std::size_t required() const { return required_; }

 private:
  std::size_t achievable_;
  std::size_t required_;
};

class EmptyCell : public std::runtime_error {
 public:
  EmptyCell(Era era, L1Label label)
      : std::runtime_error("eval cell (" + std::string(to_string(era)) + ", " + std::string(to_string(label)) +
                           ") has no papers"),
        era_(era),
        label_(label) {}

  Era era() const { return era_; }
  L1Label label() const { return label_; }

 private:
  Era era_;
  L1Label label_;
};

// Uniform index in [0, n) from a 64-bit engine by rejection, so the draw
// sequence does not depend on the standard library's distributions.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

// Exactly per_language_train papers per label with at most cap_for(label)
// from any single year. Labels are processed in enum order from one seeded
// generator over the pool sorted by paper_id. Throws InsufficientPool naming
// the first label that cannot reach the target, with the achievable maximum.
Corpus sample_training(std::span<const LabeledPaper> pool, const SamplingConfig& config);

// Every (era, label) cell gets exactly per_cell_eval rows. Short cells keep all
// unique papers and are topped up by drawing uniformly with replacement from
// them (rows marked is_duplicate). Throws EmptyCell for a cell with no papers,
// and InsufficientPool for a short cell when duplication is disabled.
Corpus build_eval_cells(std::span<const LabeledPaper> pool, const SamplingConfig& config);

// sha256 over casefolded, whitespace-collapsed "title\nabstract".
std::string content_key(std::string_view title, std::string_view abstract);

struct DedupResult {
  std::vector<CorpusRow> train;
  std::vector<DedupEntry> report;
};

// Removes from train every row sharing a paper_id or a content key with any
// eval row.
DedupResult cross_dedup(std::span<const CorpusRow> train, std::span<const CorpusRow> eval);

nlohmann::json to_json(const CorpusRow& row);
CorpusRow corpus_row_from_json(const nlohmann::json& object);
nlohmann::json to_json(const CorpusManifest& manifest);

std::string corpus_to_jsonl(std::span<const CorpusRow> rows);
std::vector<CorpusRow> read_corpus(const std::filesystem::path& path);

std::vector<LabeledPaper> read_labeled_pool(const std::filesystem::path& path);

}  // namespace l1trace
