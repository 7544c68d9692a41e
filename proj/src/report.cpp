#include <cstdio>

#include "l1trace/stats.hpp"

namespace l1trace {

namespace {

std::string format_p(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", p);
  return buf;
}

std::string era_pair(Era a, Era b) { return std::string(to_string(a)) + "_vs_" + std::string(to_string(b)); }

}  // namespace

std::string format_ratio(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json per_class = nlohmann::json::object();
  for (L1Label label : kAllLabels) {
    const auto& m = report.per_class[index_of(label)];
    per_class[std::string(to_string(label))] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  }
  return {{"accuracy", report.accuracy}, {"macro_f1", report.macro_f1}, {"per_class", std::move(per_class)}};
}

nlohmann::json to_json(const FisherResult& result) {
  const auto& t = result.table;
  return {{"table", {{t.a, t.b}, {t.c, t.d}}},
          {"p_value", result.p_value},
          {"alpha", result.alpha},
          {"significant", result.significant}};
}

nlohmann::json to_json(const EraReport& report) {
  nlohmann::json eras = nlohmann::json::array();
  for (const auto& section : report.eras) {
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& row : section.confusion.counts()) grid.push_back(row);
    eras.push_back({{"era", to_string(section.era)},
                    {"total", section.confusion.total()},
                    {"correct", section.confusion.correct()},
                    {"invalid", section.invalid_count},
                    {"metrics", to_json(section.metrics)},
                    {"confusion", std::move(grid)}});
  }
  nlohmann::json out{{"alpha", report.alpha}, {"eras", std::move(eras)}};
  nlohmann::json labels = nlohmann::json::array();
  for (L1Label label : kAllLabels) labels.push_back(to_string(label));
  out["labels"] = std::move(labels);
  if (!report.comparisons.empty()) {
    nlohmann::json fisher = nlohmann::json::array();
    for (const auto& c : report.comparisons) {
      auto j = to_json(c.result);
      j["first"] = to_string(c.first);
      j["second"] = to_string(c.second);
      fisher.push_back(std::move(j));
    }
    out["fisher"] = std::move(fisher);
  }
  return out;
}

std::string metrics_csv(const EraReport& report) {
  std::string out = "era,label,precision,recall,f1\n";
  for (const auto& section : report.eras) {
    const std::string era(to_string(section.era));
    for (L1Label label : kAllLabels) {
      const auto& m = section.metrics.per_class[index_of(label)];
      out += era + "," + std::string(to_string(label)) + "," + format_ratio(m.precision) + "," +
             format_ratio(m.recall) + "," + format_ratio(m.f1) + "\n";
    }
    out += era + ",accuracy,,," + format_ratio(section.metrics.accuracy) + "\n";
    out += era + ",macro_f1,,," + format_ratio(section.metrics.macro_f1) + "\n";
  }
  return out;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "gold\\predicted";
  for (L1Label label : kAllLabels) out += "," + std::string(to_string(label));
  out += ",invalid\n";
  for (L1Label label : kAllLabels) {
    out += std::string(to_string(label));
    for (std::size_t col = 0; col < kColumnCount; ++col) out += "," + std::to_string(cm.at(index_of(label), col));
    out += "\n";
  }
  return out;
}

std::string comparisons_csv(const EraReport& report) {
  std::string out = "comparison,a,b,c,d,p_value,alpha,significant\n";
  for (const auto& c : report.comparisons) {
    const auto& t = c.result.table;
    out += era_pair(c.first, c.second) + "," + std::to_string(t.a) + "," + std::to_string(t.b) + "," +
           std::to_string(t.c) + "," + std::to_string(t.d) + "," + format_p(c.result.p_value) + "," +
           format_p(c.result.alpha) + "," + (c.result.significant ? "yes" : "no") + "\n";
  }
  return out;
}

}  // namespace l1trace
