// Acceptance suite: one PASS/FAIL line per criterion, details indented below
// any failure. Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "l1trace/corpus.hpp"
#include "l1trace/labeling.hpp"
#include "l1trace/stats.hpp"
#include "l1trace/template_assets.hpp"
#include "oracles/fisher_oracle.hpp"
#include "oracles/label_oracles.hpp"
#include "support/labeling_fixture.hpp"
#include "support/prompt_goldens.hpp"
#include "support/synthetic_pool.hpp"

using namespace l1trace;

namespace {

const std::filesystem::path kFixtures = L1TRACE_FIXTURE_DIR;

struct Outcome {
  bool pass = true;
  std::string summary;
  std::vector<std::string> details;

  void fail(std::string detail) {
    pass = false;
    details.push_back(std::move(detail));
  }
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// Per-class rows of the fine-tuned result tables: precision, recall and F1 per
// era (pre-NN, pre-LLM, post-LLM), labels in closed-set order.
struct ClassRow {
  const char* language;
  double precision[3];
  double recall[3];
  double f1[3];
};

const ClassRow kQwenTable[8] = {
    {"English (US)", {0.603, 0.569, 0.471}, {0.700, 0.500, 0.800}, {0.648, 0.574, 0.593}},
    {"English (UK)", {0.651, 0.696, 0.737}, {0.560, 0.320, 0.280}, {0.602, 0.438, 0.406}},
    {"French", {0.781, 0.720, 0.812}, {0.640, 0.720, 0.600}, {0.703, 0.720, 0.690}},
    {"German", {0.673, 0.630, 0.625}, {0.700, 0.580, 0.600}, {0.686, 0.604, 0.612}},
    {"Italian", {0.695, 0.661, 0.781}, {0.820, 0.820, 0.640}, {0.752, 0.732, 0.703}},
    {"Chinese", {0.836, 0.759, 0.878}, {0.920, 0.880, 0.860}, {0.876, 0.815, 0.869}},
    {"Japanese", {0.800, 0.808, 1.000}, {0.720, 0.420, 0.300}, {0.758, 0.553, 0.462}},
    {"Korean", {0.809, 0.524, 0.462}, {0.760, 0.880, 0.980}, {0.784, 0.657, 0.628}},
};

const ClassRow kGemmaTable[8] = {
    {"English (US)", {0.643, 0.571, 0.480}, {0.720, 0.480, 0.720}, {0.679, 0.522, 0.576}},
    {"English (UK)", {0.619, 0.790, 0.444}, {0.520, 0.300, 0.160}, {0.565, 0.435, 0.235}},
    {"French", {0.674, 0.630, 0.773}, {0.660, 0.680, 0.680}, {0.667, 0.654, 0.723}},
    {"German", {0.708, 0.605, 0.628}, {0.680, 0.520, 0.540}, {0.694, 0.559, 0.581}},
    {"Italian", {0.796, 0.672, 0.744}, {0.780, 0.820, 0.640}, {0.788, 0.739, 0.688}},
    {"Chinese", {0.738, 0.656, 0.852}, {0.900, 0.840, 0.920}, {0.812, 0.737, 0.885}},
    {"Japanese", {0.736, 0.683, 1.000}, {0.780, 0.560, 0.340}, {0.757, 0.615, 0.508}},
    {"Korean", {0.833, 0.540, 0.434}, {0.700, 0.820, 0.920}, {0.761, 0.651, 0.590}},
};

const char* kEraNames[3] = {"pre-NN", "pre-LLM", "post-LLM"};

// Headline accuracy and macro-F1 per era.
struct Headline {
  const char* model;
  const char* regime;
  double accuracy[3];
  double f1[3];
};

const Headline kHeadlines[4] = {
    {"Qwen3-14B", "few-shot", {0.378, 0.181, 0.145}, {0.393, 0.137, 0.067}},
    {"Gemma-3-12B-it", "few-shot", {0.304, 0.258, 0.191}, {0.304, 0.222, 0.111}},
    {"Qwen3-14B", "fine-tuned", {0.728, 0.650, 0.633}, {0.726, 0.637, 0.623}},
    {"Gemma-3-12B-it", "fine-tuned", {0.718, 0.628, 0.590}, {0.715, 0.614, 0.598}},
};

bool within(double got, double want, double tol) { return std::abs(got - want) <= tol + 1e-12; }

Outcome f1_algebra() {
  Outcome out;
  int rows = 0, ok = 0;
  for (const auto* table : {kQwenTable, kGemmaTable}) {
    const char* model = table == kQwenTable ? "Qwen3-14B" : "Gemma-3-12B-it";
    for (int i = 0; i < 8; ++i) {
      for (int e = 0; e < 3; ++e) {
        ++rows;
        const auto& r = table[i];
        double f1 = f1_score(r.precision[e], r.recall[e]);
        if (within(f1, r.f1[e], 0.001)) {
          ++ok;
        } else {
          out.fail(fmt("%s %s %s: f1(%.3f, %.3f) = %.5f, printed %.3f (off by %.5f)", model, kEraNames[e],
                       r.language, r.precision[e], r.recall[e], f1, r.f1[e], std::abs(f1 - r.f1[e])));
        }
      }
    }
  }
  out.summary = fmt("%d/%d rows within +/-0.001", ok, rows);
  return out;
}

Outcome macro_aggregation() {
  Outcome out;
  int ok = 0;
  for (int m = 0; m < 2; ++m) {
    const auto* table = m == 0 ? kQwenTable : kGemmaTable;
    const auto& headline = kHeadlines[2 + m];
    for (int e = 0; e < 3; ++e) {
      std::vector<double> f1s;
      for (int i = 0; i < 8; ++i) f1s.push_back(table[i].f1[e]);
      double macro = mean(f1s);
      if (within(macro, headline.f1[e], 0.001)) {
        ++ok;
      } else {
        out.fail(fmt("%s %s: mean of per-class F1 = %.6f, headline %.3f", headline.model, kEraNames[e], macro,
                     headline.f1[e]));
      }
    }
  }
  out.summary = fmt("%d/6 era macro-F1 values within +/-0.001", ok);
  return out;
}

Outcome balanced_identity() {
  Outcome out;
  // A balanced 50-per-class matrix with the pre-NN recalls on the diagonal;
  // the remaining mass goes to the next class.
  ConfusionMatrix::Grid grid{};
  std::vector<double> recalls;
  for (int i = 0; i < 8; ++i) {
    auto correct = static_cast<std::uint64_t>(std::lround(kQwenTable[i].recall[0] * 50));
    grid[i][i] = correct;
    grid[i][(i + 1) % 8] = 50 - correct;
    recalls.push_back(kQwenTable[i].recall[0]);
  }
  auto report = metrics(ConfusionMatrix::from_grid(grid));
  double mean_recall = mean(recalls);
  if (!within(mean_recall, 0.7275, 1e-12)) out.fail(fmt("mean recall %.6f != 0.7275", mean_recall));
  if (!within(report.accuracy, mean_recall, 1e-12)) {
    out.fail(fmt("accuracy %.6f differs from mean recall %.6f on a balanced matrix", report.accuracy, mean_recall));
  }
  if (!within(mean_recall, kHeadlines[2].accuracy[0], 0.0005)) {
    out.fail(fmt("mean recall %.6f is not within 0.0005 of the headline accuracy %.3f", mean_recall,
                 kHeadlines[2].accuracy[0]));
  }
  out.summary = fmt("mean pre-NN recall %.4f, balanced-matrix accuracy %.4f, headline %.3f", mean_recall,
                    report.accuracy, kHeadlines[2].accuracy[0]);
  return out;
}

struct PrintedFisher {
  int headline;  // index into kHeadlines
  int era_a, era_b;
  double p;
  bool upper_bound;  // printed as "<p"
  bool significant;
};

const PrintedFisher kPrintedFisher[12] = {
    {0, 0, 2, 0.0001, true, true},    {0, 0, 1, 0.0001, true, true},   {0, 1, 2, 0.2127, false, false},
    {1, 0, 2, 0.0022, false, true},   {1, 0, 1, 0.1568, false, false}, {1, 1, 2, 0.0272, false, true},
    {2, 0, 2, 0.0049, false, true},   {2, 0, 1, 0.0218, false, true},  {2, 1, 2, 0.6583, false, false},
    {3, 0, 2, 0.0002, false, true},   {3, 0, 1, 0.0083, false, true},  {3, 1, 2, 0.3105, false, false},
};

Outcome fisher_reproduction() {
  Outcome out;
  int p_ok = 0, verdict_ok = 0;
  auto start = std::chrono::steady_clock::now();
  for (const auto& row : kPrintedFisher) {
    const auto& h = kHeadlines[row.headline];
    auto count = [&](int era) { return static_cast<std::uint64_t>(std::lround(h.accuracy[era] * 400)); };
    auto result = compare_eras({count(row.era_a), 400}, {count(row.era_b), 400}, 0.05);
    const double p = result.p_value;
    bool p_match = row.upper_bound ? p < row.p
                                   : std::abs(p - row.p) <= std::max(0.10 * row.p, 0.0005) + 1e-12;
    const std::string label = fmt("%s %s %s vs %s [[%llu,%llu],[%llu,%llu]]", h.model, h.regime,
                                  kEraNames[row.era_a], kEraNames[row.era_b],
                                  static_cast<unsigned long long>(result.table.a),
                                  static_cast<unsigned long long>(result.table.b),
                                  static_cast<unsigned long long>(result.table.c),
                                  static_cast<unsigned long long>(result.table.d));
    if (p_match) {
      ++p_ok;
    } else {
      out.fail(fmt("%s: p = %.6g, printed %s%.4f", label.c_str(), p, row.upper_bound ? "<" : "", row.p));
    }
    if (result.significant == row.significant) {
      ++verdict_ok;
    } else {
      out.fail(fmt("%s: significance %s, printed %s", label.c_str(), result.significant ? "yes" : "no",
                   row.significant ? "yes" : "no"));
    }
  }
  auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (elapsed >= 1.0) out.fail(fmt("took %.3f s", elapsed));
  out.summary = fmt("%d/12 p-values within tolerance, %d/12 verdicts at alpha 0.05, %.1f ms", p_ok, verdict_ok,
                    elapsed * 1e3);
  return out;
}

Outcome fisher_oracle_equivalence() {
  Outcome out;
  std::size_t tables = 0, degenerate = 0;
  double worst = 0.0;
  for (std::uint64_t n = 0; n <= 40; ++n) {
    for (std::uint64_t a = 0; a <= n; ++a) {
      for (std::uint64_t b = 0; a + b <= n; ++b) {
        for (std::uint64_t c = 0; a + b + c <= n; ++c) {
          const std::uint64_t d = n - a - b - c;
          ++tables;
          bool oracle_degenerate = false;
          oracle::Rational exact;
          try {
            exact = oracle::fisher_two_sided_exact(a, b, c, d);
          } catch (const std::invalid_argument&) {
            oracle_degenerate = true;
          }
          bool lib_degenerate = false;
          double p = 0.0;
          try {
            p = fisher_exact_two_sided({a, b, c, d});
          } catch (const DegenerateMargins&) {
            lib_degenerate = true;
          }
          if (oracle_degenerate || lib_degenerate) {
            ++degenerate;
            if (oracle_degenerate != lib_degenerate && out.details.size() < 10) {
              out.fail(fmt("[[%llu,%llu],[%llu,%llu]]: degenerate-margin handling differs",
                           (unsigned long long)a, (unsigned long long)b, (unsigned long long)c, (unsigned long long)d));
            }
            continue;
          }
          const double diff = std::abs(p - exact.to_double());
          worst = std::max(worst, diff);
          if (diff > 1e-9 && out.details.size() < 10) {
            out.fail(fmt("[[%llu,%llu],[%llu,%llu]]: %.12g vs exact %.12g", (unsigned long long)a,
                         (unsigned long long)b, (unsigned long long)c, (unsigned long long)d, p, exact.to_double()));
          }
        }
      }
    }
  }
  out.summary = fmt("%zu tables with total <= 40 (%zu with an empty margin, rejected by both), max |diff| %.2e",
                    tables, degenerate, worst);
  return out;
}

Outcome labeling_rules() {
  Outcome out;
  std::mt19937_64 rng(6);
  const std::vector<const char*> codes{"US", "GB", "FR", "DE", "IT", "CN", "JP", "KR", "BE", "CA"};
  const std::set<std::string> english{"US", "GB"};
  std::size_t papers = 0, verdicts = 0, rejected = 0, clamped = 0, immersion = 0;

  for (int trial = 0; trial < 4000; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    PaperRecord paper{"R" + std::to_string(trial), "T", "A", 2018, "ACL", {}};
    std::vector<VerifiedAuthor> verified;
    for (std::size_t i = 0; i < n; ++i) {
      AuthorRecord a{"N" + std::to_string(i), i, {}};
      std::set<std::string> affs;
      for (std::size_t k = rng() % 3; k > 0; --k) {
        const char* c = codes[rng() % codes.size()];
        a.affiliation_countries.insert(CountryCode::of(c));
        affs.insert(c);
      }
      const char* first = codes[rng() % codes.size()];
      const char* second = codes[rng() % codes.size()];
      auto v = verify_author(a, {a.display_name, {CountryCode::of(first), CountryCode::of(second)}, ""},
                             default_english_countries());
      auto [want, want_country] = oracle::verdict_by_hand(affs, first, second, english);
      ++verdicts;
      // Totality: exactly one verdict, with a country iff verified.
      if (std::string(to_string(v.verdict)) != want || v.country.has_value() != v.is_verified() ||
          (v.country && v.country->str() != *want_country)) {
        out.fail("verdict mismatch for affiliations/candidates in trial " + std::to_string(trial));
      }
      if (v.verdict == Verdict::english_immersion_excluded) ++immersion;
      paper.authors.push_back(a);
      verified.push_back(std::move(v));
    }
    ++papers;
    auto consensus = paper_consensus(paper, verified);
    if (consensus.country.has_value() == consensus.reason.has_value()) out.fail("consensus is neither label nor reason");
    if (n > kMaxAuthors) {
      ++rejected;
      if (consensus.reason != UnlabeledReason::too_many_authors) out.fail(fmt("%zu authors not rejected", n));
      continue;
    }
    auto keys = oracle::key_positions_by_hand(n);
    if (std::set<std::size_t>(consensus.key_positions.begin(), consensus.key_positions.end()) != keys) {
      out.fail(fmt("key positions wrong for %zu authors", n));
    }
    if (n == 2) {
      ++clamped;
      if (consensus.key_positions != std::vector<std::size_t>{0, 1}) out.fail("two-author key set is not {0, 1}");
    }
    bool all_verified = true;
    std::set<std::string> countries;
    for (auto k : keys) {
      all_verified = all_verified && verified[k].is_verified();
      if (verified[k].country) countries.insert(verified[k].country->str());
    }
    const bool should_label = all_verified && countries.size() == 1;
    if (should_label != consensus.country.has_value()) {
      out.fail(fmt("paper with %zu authors: key-author agreement rule violated", n));
    }
  }

  const auto dir = kFixtures / "labeling";
  auto first = testing::run_labeling_fixture(dir);
  auto second = testing::run_labeling_fixture(dir);
  for (auto& problem : testing::compare_with_expected(first, dir)) out.fail("golden: " + problem);
  if (first.labeled_jsonl != second.labeled_jsonl || first.audit_jsonl != second.audit_jsonl) {
    out.fail("golden run output differs between runs");
  }
  std::size_t labeled = 0;
  for (const auto& o : first.outcomes) labeled += o.labeled ? 1 : 0;
  out.summary = fmt("%zu random papers / %zu verdicts (%zu >5-author, %zu two-author, %zu immersion); "
                    "golden %zu works, %zu labeled, stable across runs",
                    papers, verdicts, rejected, clamped, immersion, first.outcomes.size(), labeled);
  return out;
}

Outcome corpus_construction() {
  Outcome out;
  SamplingConfig config;
  config.rng_seed = 20240601;

  // Eval: cells with 12..90 unique papers, some short and some long.
  auto pool = testing::eval_pool([](Era era, L1Label label) -> std::size_t {
    return 12 + (static_cast<std::size_t>(era) * 31 + static_cast<std::size_t>(label) * 17) % 79;
  });
  std::map<std::pair<Era, L1Label>, std::size_t> available;
  for (const auto& p : pool) ++available[{p.era, p.label}];
  auto eval = build_eval_cells(pool, config);
  std::map<std::pair<Era, L1Label>, std::size_t> rows, dups;
  for (const auto& row : eval.rows) {
    ++rows[{row.era, row.label}];
    if (row.is_duplicate) ++dups[{row.era, row.label}];
  }
  if (eval.rows.size() != 1200) out.fail(fmt("eval has %zu rows", eval.rows.size()));
  if (rows.size() != 24) out.fail(fmt("eval has %zu cells", rows.size()));
  std::size_t padded = 0;
  for (const auto& [cell, n] : rows) {
    const std::size_t unique = std::min<std::size_t>(available[cell], 50);
    const std::size_t want_dups = available[cell] >= 50 ? 0 : 50 - available[cell];
    if (n != 50) out.fail(fmt("cell has %zu rows", n));
    if (dups[cell] != want_dups || eval.manifest.cells.at(cell).duplicated_count != want_dups ||
        eval.manifest.cells.at(cell).unique_count != unique) {
      out.fail(fmt("cell with %zu unique papers has %zu duplicates", available[cell], dups[cell]));
    }
    if (want_dups > 0) ++padded;
  }

  // Training: per label, 12 papers a year over 1999-2018 plus 100 a year over
  // 2019-2021, so an uncapped draw would overfill the recent years.
  auto train_pool = testing::pool_per_label(240, 1999, 2018, "TR");
  for (auto& p : testing::pool_per_label(300, 2019, 2021, "TH")) train_pool.push_back(std::move(p));
  auto train = sample_training(train_pool, config);
  std::map<L1Label, std::size_t> per_label;
  std::map<std::pair<L1Label, int>, std::size_t> per_year;
  for (const auto& row : train.rows) {
    ++per_label[row.label];
    ++per_year[{row.label, row.year}];
  }
  for (L1Label label : kAllLabels) {
    if (per_label[label] != 200) out.fail(fmt("%s has %zu training rows", std::string(to_string(label)).c_str(),
                                              per_label[label]));
  }
  std::size_t max_year = 0;
  for (const auto& [key, n] : per_year) max_year = std::max(max_year, n);
  if (max_year > 20) out.fail(fmt("a (label, year) pair holds %zu rows", max_year));

  // Plant one eval paper in the training set under a new id with cosmetic changes.
  auto rows_with_plant = train.rows;
  const auto& victim = eval.rows.front();
  CorpusRow planted = victim;
  planted.paper_id = "planted-copy";
  planted.title = "  " + victim.title + "  ";
  for (auto& ch : planted.abstract) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  rows_with_plant.push_back(planted);
  auto dedup = cross_dedup(rows_with_plant, eval.rows);
  if (dedup.report.size() != 1 || dedup.report[0].removed_paper_id != "planted-copy" ||
      dedup.train.size() != train.rows.size()) {
    out.fail(fmt("cross_dedup removed %zu rows", dedup.report.size()));
  }
  out.summary = fmt("1,200 eval rows in 24 cells of 50 (%zu padded), 8 x 200 training rows, max %zu per year, "
                    "planted duplicate removed",
                    padded, max_year);
  return out;
}

Outcome prompt_goldens() {
  Outcome out;
  for (auto& problem : testing::check_prompt_goldens(kFixtures / "prompts")) out.fail(problem);
  try {
    templates::verify_all();
  } catch (const templates::TemplateDrift& e) {
    out.fail(e.what());
  }
  // A one-byte edit must be caught.
  auto sums = templates::checksums();
  std::size_t caught = 0;
  for (const auto& [name, sum] : sums) {
    std::string edited(templates::get(name));
    edited += ' ';
    try {
      templates::verify(name, edited, sum);
    } catch (const templates::TemplateDrift&) {
      ++caught;
    }
  }
  if (caught != sums.size()) out.fail("a template edit went undetected");
  out.summary = fmt("name-origin, few-shot and fine-tune prompts match golden bytes; %zu/%zu checksum drifts caught",
                    caught, sums.size());
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"AC1", "F1 algebra", f1_algebra},
      {"AC2", "macro aggregation", macro_aggregation},
      {"AC3", "balanced-set identity", balanced_identity},
      {"AC4", "Fisher reproduction", fisher_reproduction},
      {"AC5", "Fisher oracle equivalence", fisher_oracle_equivalence},
      {"AC6", "labeling rules suite", labeling_rules},
      {"AC7", "corpus construction", corpus_construction},
      {"AC8", "prompt byte-exactness", prompt_goldens},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.summary = std::string("threw: ") + e.what();
    }
    std::printf("%s %s %s: %s\n", outcome.pass ? "PASS" : "FAIL", c.id, c.title, outcome.summary.c_str());
    for (const auto& d : outcome.details) std::printf("    %s\n", d.c_str());
    failures += outcome.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
