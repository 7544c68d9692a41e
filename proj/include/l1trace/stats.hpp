#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "l1trace/prompts.hpp"
#include "l1trace/types.hpp"

namespace l1trace {

struct PredictionRecord {
  std::string paper_id;
  Era era;
  L1Label gold;
  ParsedLabel predicted;
};

// predictions JSONL line: {paper_id, era, gold, raw_output}
PredictionRecord prediction_from_json(const nlohmann::json& object);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

inline constexpr std::size_t kInvalidColumn = kLabelCount;
inline constexpr std::size_t kColumnCount = kLabelCount + 1;

// Gold rows over the 8 labels; predicted columns are the 8 labels plus Invalid.
class ConfusionMatrix {
 public:
  using Grid = std::array<std::array<std::uint64_t, kColumnCount>, kLabelCount>;

  void add(L1Label gold, const std::optional<L1Label>& predicted);

  std::uint64_t at(std::size_t gold_row, std::size_t predicted_col) const { return counts_[gold_row][predicted_col]; }
  const Grid& counts() const { return counts_; }
  std::uint64_t total() const { return total_; }

  std::uint64_t row_sum(std::size_t gold_row) const;
  std::uint64_t column_sum(std::size_t predicted_col) const;
  std::uint64_t correct() const;

  static ConfusionMatrix from_grid(const Grid& grid);

 private:
  Grid counts_{};
  std::uint64_t total_ = 0;
};

class EmptyInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// All records must share one era (callers partition). Throws EmptyInput for an
// empty span and std::invalid_argument for mixed eras.
ConfusionMatrix confusion_matrix(std::span<const PredictionRecord> predictions);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  double accuracy = 0.0;
  std::array<ClassMetrics, kLabelCount> per_class{};
  double macro_f1 = 0.0;
};

// Harmonic mean; 0 when both inputs are 0.
double f1_score(double precision, double recall);

// Invalid predictions reduce recall and accuracy but never count as a class.
// Throws EmptyInput when the matrix has no entries.
MetricsReport metrics(const ConfusionMatrix& cm);

double mean(std::span<const double> values);

struct Table2x2 {
  std::uint64_t a = 0, b = 0, c = 0, d = 0;  // [[a, b], [c, d]]

  bool operator==(const Table2x2&) const = default;
};

class DegenerateMargins : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kFisherTieTolerance = 1e-7;

// log P(top-left = x) under the hypergeometric law with the table's margins.
double hypergeometric_log_pmf(std::uint64_t x, std::uint64_t row1, std::uint64_t row2, std::uint64_t col1);

// Two-sided Fisher exact test: sum of the point probabilities of all tables
// with the observed margins that are no more likely than the observed one
// (relative tolerance 1e-7). Computed in log space; clamped to (0, 1].
// Throws DegenerateMargins when a row or column sums to zero.
double fisher_exact_two_sided(const Table2x2& table);

struct AccuracyCount {
  std::uint64_t correct = 0;
  std::uint64_t total = 0;
};

struct FisherResult {
  Table2x2 table;
  double p_value = 1.0;
  double alpha = 0.05;
  bool significant = false;  // p_value < alpha
};

inline constexpr double kDefaultAlpha = 0.05;

FisherResult compare_eras(AccuracyCount a, AccuracyCount b, double alpha = kDefaultAlpha);

// Every integer c in [0, total] with |c / total - reported| <= half_width.
std::vector<std::uint64_t> reconstruct_counts(double reported, std::uint64_t total, double half_width = 0.0005);

struct EraSection {
  Era era;
  ConfusionMatrix confusion;
  MetricsReport metrics;
  std::uint64_t invalid_count = 0;
};

struct EraComparison {
  Era first;
  Era second;
  FisherResult result;
};

struct EraReport {
  double alpha = kDefaultAlpha;
  std::vector<EraSection> eras;  // era order
  std::vector<EraComparison> comparisons;
};

// Per-era confusion matrices and metrics, then every pairwise era comparison
// on accuracy counts. Comparisons whose margins are degenerate are skipped.
EraReport era_report(std::span<const PredictionRecord> predictions, double alpha = kDefaultAlpha);

nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const FisherResult& result);
nlohmann::json to_json(const EraReport& report);

std::string metrics_csv(const EraReport& report);
std::string confusion_csv(const ConfusionMatrix& cm);
std::string comparisons_csv(const EraReport& report);

// Fixed 4-decimal rendering used in CSV outputs; p-values use 6 significant digits.
std::string format_ratio(double value);

}  // namespace l1trace
