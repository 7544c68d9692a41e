#include "l1trace/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "l1trace/ingest.hpp"
#include "l1trace/text_util.hpp"

namespace l1trace {

namespace {

double log_choose(std::uint64_t n, std::uint64_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

PredictionRecord prediction_from_json(const nlohmann::json& object) {
  PredictionRecord record;
  record.paper_id = object.at("paper_id").get<std::string>();
  auto era = era_from_string(object.at("era").get<std::string>());
  if (!era) throw SchemaViolation("prediction " + record.paper_id + " has unknown era " + object.at("era").dump());
  auto gold = label_from_string(object.at("gold").get<std::string>());
  if (!gold) throw SchemaViolation("prediction " + record.paper_id + " has gold label outside the closed set");
  record.era = *era;
  record.gold = *gold;
  const auto& raw = object.at("raw_output");
  record.predicted = parse_label(raw.is_string() ? raw.get<std::string>() : std::string{});
  return record;
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (normalize_whitespace(line).empty()) continue;
    try {
      out.push_back(prediction_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw SchemaViolation(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void ConfusionMatrix::add(L1Label gold, const std::optional<L1Label>& predicted) {
  ++counts_[index_of(gold)][predicted ? index_of(*predicted) : kInvalidColumn];
  ++total_;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t gold_row) const {
  return std::accumulate(counts_[gold_row].begin(), counts_[gold_row].end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t predicted_col) const {
  std::uint64_t sum = 0;
  for (const auto& row : counts_) sum += row[predicted_col];
  return sum;
}

std::uint64_t ConfusionMatrix::correct() const {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < kLabelCount; ++i) sum += counts_[i][i];
  return sum;
}

ConfusionMatrix ConfusionMatrix::from_grid(const Grid& grid) {
  ConfusionMatrix cm;
  cm.counts_ = grid;
  for (const auto& row : grid) cm.total_ += std::accumulate(row.begin(), row.end(), std::uint64_t{0});
  return cm;
}

ConfusionMatrix confusion_matrix(std::span<const PredictionRecord> predictions) {
  if (predictions.empty()) throw EmptyInput("confusion matrix over zero predictions");
  ConfusionMatrix cm;
  const Era era = predictions.front().era;
  for (const auto& p : predictions) {
    if (p.era != era) throw std::invalid_argument("confusion matrix input mixes eras");
    cm.add(p.gold, p.predicted.value);
  }
  return cm;
}

double f1_score(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw EmptyInput("metrics over an empty confusion matrix");
  MetricsReport report;
  report.accuracy = ratio(cm.correct(), cm.total());
  std::array<double, kLabelCount> f1s{};
  for (std::size_t g = 0; g < kLabelCount; ++g) {
    auto& m = report.per_class[g];
    m.precision = ratio(cm.at(g, g), cm.column_sum(g));
    m.recall = ratio(cm.at(g, g), cm.row_sum(g));
    m.f1 = f1_score(m.precision, m.recall);
    f1s[g] = m.f1;
  }
  report.macro_f1 = mean(f1s);
  return report;
}

double hypergeometric_log_pmf(std::uint64_t x, std::uint64_t row1, std::uint64_t row2, std::uint64_t col1) {
  return log_choose(row1, x) + log_choose(row2, col1 - x) - log_choose(row1 + row2, col1);
}

double fisher_exact_two_sided(const Table2x2& t) {
  const std::uint64_t row1 = t.a + t.b;
  const std::uint64_t row2 = t.c + t.d;
  const std::uint64_t col1 = t.a + t.c;
  const std::uint64_t col2 = t.b + t.d;
  if (row1 == 0 || row2 == 0 || col1 == 0 || col2 == 0) {
    throw DegenerateMargins("Fisher exact test needs every row and column margin > 0");
  }
  const std::uint64_t lo = col1 > row2 ? col1 - row2 : 0;
  const std::uint64_t hi = std::min(row1, col1);

  const double observed = hypergeometric_log_pmf(t.a, row1, row2, col1);
  const double cutoff = observed + std::log1p(kFisherTieTolerance);

  // Sum relative to the observed term to stay in range for large tables.
  double sum = 0.0;
  for (std::uint64_t x = lo; x <= hi; ++x) {
    const double lp = hypergeometric_log_pmf(x, row1, row2, col1);
    if (lp <= cutoff) sum += std::exp(lp - observed);
  }
  const double p = sum * std::exp(observed);
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

FisherResult compare_eras(AccuracyCount a, AccuracyCount b, double alpha) {
  if (a.total == 0 || b.total == 0) throw std::invalid_argument("accuracy totals must be > 0");
  if (a.correct > a.total || b.correct > b.total) throw std::invalid_argument("correct count exceeds total");
  FisherResult result;
  result.table = {a.correct, a.total - a.correct, b.correct, b.total - b.correct};
  result.p_value = fisher_exact_two_sided(result.table);
  result.alpha = alpha;
  result.significant = result.p_value < alpha;
  return result;
}

std::vector<std::uint64_t> reconstruct_counts(double reported, std::uint64_t total, double half_width) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t c = 0; c <= total; ++c) {
    if (std::abs(static_cast<double>(c) / static_cast<double>(total) - reported) <= half_width + 1e-12) {
      out.push_back(c);
    }
  }
  return out;
}

EraReport era_report(std::span<const PredictionRecord> predictions, double alpha) {
  EraReport report;
  report.alpha = alpha;
  for (Era era : kAllEras) {
    std::vector<PredictionRecord> subset;
    for (const auto& p : predictions) {
      if (p.era == era) subset.push_back(p);
    }
    if (subset.empty()) continue;
    EraSection section{era, confusion_matrix(subset), {}, 0};
    section.metrics = metrics(section.confusion);
    section.invalid_count = section.confusion.column_sum(kInvalidColumn);
    report.eras.push_back(std::move(section));
  }
  for (std::size_t i = 0; i < report.eras.size(); ++i) {
    for (std::size_t j = i + 1; j < report.eras.size(); ++j) {
      const auto& a = report.eras[i];
      const auto& b = report.eras[j];
      try {
        report.comparisons.push_back({a.era, b.era,
                                      compare_eras({a.confusion.correct(), a.confusion.total()},
                                                   {b.confusion.correct(), b.confusion.total()}, alpha)});
      } catch (const DegenerateMargins&) {
        // All correct or all wrong in both eras: nothing to test.
      }
    }
  }
  return report;
}

}  // namespace l1trace
