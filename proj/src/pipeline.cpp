#include "l1trace/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <set>

#include "l1trace/prompts.hpp"
#include "l1trace/stats.hpp"
#include "l1trace/template_assets.hpp"
#include "l1trace/text_util.hpp"

namespace l1trace {

namespace fs = std::filesystem;

namespace {

using Outputs = std::map<std::string, std::string>;  // path relative to work_dir -> bytes

struct StageRun {
  Outputs outputs;
  std::vector<fs::path> inputs;
  nlohmann::json details = nlohmann::json::object();
};

fs::path require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw MissingInput(path);
  return path;
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() ? p : base / p;
}

std::string jsonl(const std::vector<nlohmann::json>& lines) {
  std::string out;
  for (const auto& line : lines) {
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<std::string> read_ids(const fs::path& path) {
  std::ifstream in(require_file(path));
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    auto id = normalize_whitespace(line);
    if (!id.empty() && id.front() != '#') ids.push_back(id);
  }
  return ids;
}

std::vector<PaperRecord> read_papers(const fs::path& path) {
  auto load = load_dump(require_file(path), DumpFormat::anthology);
  if (!load.violations.empty()) {
    throw StageFailed(path.string() + ":" + std::to_string(load.violations.front().line) + ": " +
                      load.violations.front().message);
  }
  return std::move(load.records);
}

StageRun run_fetch(const PipelineConfig& cfg, const StageServices& services) {
  StageRun run;
  if (!cfg.ids && cfg.dumps.empty()) throw ConfigInvalid("fetch needs inputs.ids or inputs.dumps");
  std::vector<PaperRecord> papers;
  std::vector<nlohmann::json> violations;

  for (const auto& dump : cfg.dumps) {
    run.inputs.push_back(require_file(dump.path));
    auto load = load_dump(dump.path, dump.format);
    for (auto& record : load.records) papers.push_back(std::move(record));
    for (const auto& v : load.violations) {
      violations.push_back({{"source", dump.path.string()}, {"line", v.line}, {"error", v.message}});
    }
  }

  if (cfg.ids) {
    run.inputs.push_back(require_file(*cfg.ids));
    std::unique_ptr<HttplibTransport> owned_transport;
    std::unique_ptr<SteadyClock> owned_clock;
    HttpTransport* transport = services.transport;
    Clock* clock = services.clock;
    if (!transport) transport = (owned_transport = std::make_unique<HttplibTransport>()).get();
    if (!clock) clock = (owned_clock = std::make_unique<SteadyClock>()).get();
    MetadataClient client(cfg.metadata, *transport, *clock);
    for (const auto& id : read_ids(*cfg.ids)) {
      try {
        papers.push_back(client.fetch_work(id));
      } catch (const NotFound& e) {
        violations.push_back({{"source", "openalex"}, {"id", id}, {"error", e.what()}});
      } catch (const Malformed& e) {
        violations.push_back({{"source", "openalex"}, {"id", id}, {"error", e.what()}});
      }
    }
    run.details["network_requests"] = client.network_requests();
  }

  run.details["papers"] = papers.size();
  run.details["violations"] = violations.size();
  run.outputs["papers.jsonl"] = dump_to_jsonl(papers);
  run.outputs["fetch_violations.jsonl"] = jsonl(violations);
  return run;
}

StageRun run_label(const PipelineConfig& cfg, const StageServices& services) {
  StageRun run;
  const fs::path papers_path = cfg.work_dir / "papers.jsonl";
  run.inputs.push_back(require_file(papers_path));
  auto papers = read_papers(papers_path);

  LabelingConfig labeling;
  labeling.english_countries = cfg.english_countries;
  if (cfg.mapping_table) {
    run.inputs.push_back(require_file(*cfg.mapping_table));
    labeling.table = MappingTable::load(*cfg.mapping_table);
  }

  std::unique_ptr<OriginClient> owned_client;
  std::unique_ptr<HttplibTransport> owned_transport;
  std::unique_ptr<SteadyClock> owned_clock;
  std::unique_ptr<RateLimiter> owned_limiter;
  OriginClient* client = services.origin_client;
  if (!client && cfg.origin_stub) {
    run.inputs.push_back(require_file(*cfg.origin_stub));
    client = (owned_client = std::make_unique<StubOriginClient>(StubOriginClient::load(*cfg.origin_stub))).get();
  }
  if (!client) {
    HttpTransport* transport = services.transport;
    Clock* clock = services.clock;
    if (!transport) transport = (owned_transport = std::make_unique<HttplibTransport>()).get();
    if (!clock) clock = (owned_clock = std::make_unique<SteadyClock>()).get();
    owned_limiter = std::make_unique<RateLimiter>(cfg.chat.requests_per_second, *clock);
    client = (owned_client = std::make_unique<ChatCompletionClient>(cfg.chat, *transport, *owned_limiter)).get();
  }

  std::vector<nlohmann::json> labeled;
  std::vector<nlohmann::json> audit;
  std::map<std::string, std::size_t> reasons;
  for (const auto& paper : papers) {
    LabelOutcome outcome;
    try {
      outcome = label_paper(paper, *client, labeling);
    } catch (const ClientError& e) {
      throw StageFailed("labeling " + paper.paper_id + ": " + e.what());
    }
    if (outcome.labeled) {
      labeled.push_back(to_json(*outcome.labeled));
    } else {
      ++reasons[std::string(to_string(*outcome.reason))];
      audit.push_back(audit_json(outcome));
    }
  }
  run.details["labeled"] = labeled.size();
  run.details["unlabeled"] = reasons;
  run.outputs["labeled.jsonl"] = jsonl(labeled);
  run.outputs["unlabeled_audit.jsonl"] = jsonl(audit);
  return run;
}

StageRun run_build_corpus(const PipelineConfig& cfg) {
  StageRun run;
  const fs::path eval_pool_path = cfg.eval_pool.value_or(cfg.work_dir / "labeled.jsonl");
  run.inputs.push_back(require_file(eval_pool_path));
  auto eval_pool = read_labeled_pool(eval_pool_path);
  auto eval = build_eval_cells(eval_pool, cfg.sampling);
  run.outputs["corpus/eval.jsonl"] = corpus_to_jsonl(eval.rows);

  if (cfg.train_pool) {
    run.inputs.push_back(require_file(*cfg.train_pool));
    auto train_pool = read_labeled_pool(*cfg.train_pool);
    auto train = sample_training(train_pool, cfg.sampling);
    auto dedup = cross_dedup(train.rows, eval.rows);
    train.rows = std::move(dedup.train);
    train.manifest.dedup_report = std::move(dedup.report);
    run.outputs["corpus/train.jsonl"] = corpus_to_jsonl(train.rows);
    run.outputs["corpus/train_manifest.json"] = to_json(train.manifest).dump(2) + "\n";
    run.details["train_rows"] = train.rows.size();
    run.details["dedup_removed"] = train.manifest.dedup_report.size();
  }
  run.outputs["corpus/eval_manifest.json"] = to_json(eval.manifest).dump(2) + "\n";
  run.details["eval_rows"] = eval.rows.size();
  return run;
}

std::vector<CorpusRow> exemplar_source(const PipelineConfig& cfg, std::vector<fs::path>& inputs) {
  if (cfg.exemplar_pool) {
    inputs.push_back(require_file(*cfg.exemplar_pool));
    std::vector<CorpusRow> rows;
    for (const auto& p : read_labeled_pool(*cfg.exemplar_pool)) {
      rows.push_back({p.paper.paper_id, p.era, p.label, p.paper.title, p.paper.abstract, false, p.paper.year});
    }
    return rows;
  }
  const fs::path train = cfg.work_dir / "corpus/train.jsonl";
  if (fs::is_regular_file(train)) {
    inputs.push_back(train);
    return read_corpus(train);
  }
  return {};
}

// One exemplar per label for the given era, preferring same-era papers and
// never reusing an evaluation paper. Labels follow the closed-set order.
std::vector<Exemplar> pick_exemplars(std::vector<CorpusRow> source, Era era, const std::set<std::string>& excluded) {
  std::sort(source.begin(), source.end(), [](const auto& a, const auto& b) { return a.paper_id < b.paper_id; });
  std::vector<Exemplar> out;
  for (L1Label label : kAllLabels) {
    const CorpusRow* same_era = nullptr;
    const CorpusRow* any_era = nullptr;
    for (const auto& row : source) {
      if (row.label != label || excluded.contains(row.paper_id)) continue;
      if (!any_era) any_era = &row;
      if (row.era == era) {
        same_era = &row;
        break;
      }
    }
    if (const CorpusRow* pick = same_era ? same_era : any_era) out.push_back({pick->title, pick->abstract, label});
  }
  return out;
}

StageRun run_prompt(const PipelineConfig& cfg) {
  StageRun run;
  const fs::path eval_path = cfg.work_dir / "corpus/eval.jsonl";
  run.inputs.push_back(require_file(eval_path));
  auto eval = read_corpus(eval_path);

  std::set<std::string> eval_ids;
  for (const auto& row : eval) eval_ids.insert(row.paper_id);
  auto source = exemplar_source(cfg, run.inputs);

  std::map<Era, std::vector<Exemplar>> exemplars;
  nlohmann::json exemplar_log = nlohmann::json::object();
  for (Era era : kAllEras) {
    exemplars[era] = pick_exemplars(source, era, eval_ids);
    auto& labels = exemplar_log[std::string(to_string(era))] = nlohmann::json::array();
    for (const auto& ex : exemplars[era]) labels.push_back(to_string(ex.label));
  }

  std::vector<nlohmann::json> fewshot;
  std::vector<nlohmann::json> finetune;
  for (const auto& row : eval) {
    auto fs_prompt = build_fewshot_prompt(row.title, row.abstract, exemplars[row.era]);
    fewshot.push_back({{"paper_id", row.paper_id}, {"system", fs_prompt.system}, {"user", fs_prompt.user}});
    auto ft_prompt = build_finetune_query(row.title, row.abstract);
    finetune.push_back({{"paper_id", row.paper_id}, {"system", ft_prompt.system}, {"user", ft_prompt.user}});
  }
  run.outputs["prompts/eval_fewshot.jsonl"] = jsonl(fewshot);
  run.outputs["prompts/eval_finetune.jsonl"] = jsonl(finetune);

  const fs::path train_path = cfg.work_dir / "corpus/train.jsonl";
  if (fs::is_regular_file(train_path)) {
    if (std::find(run.inputs.begin(), run.inputs.end(), train_path) == run.inputs.end()) run.inputs.push_back(train_path);
    std::vector<nlohmann::json> train;
    for (const auto& row : read_corpus(train_path)) {
      auto ex = build_finetune_example(row.title, row.abstract, row.label);
      train.push_back({{"paper_id", row.paper_id},
                       {"system", ex.prompt.system},
                       {"user", ex.prompt.user},
                       {"completion", ex.completion}});
    }
    run.outputs["prompts/train_finetune.jsonl"] = jsonl(train);
  }
  run.details["exemplars"] = std::move(exemplar_log);
  run.details["eval_prompts"] = eval.size();
  return run;
}

StageRun run_evaluate(const PipelineConfig& cfg) {
  StageRun run;
  const fs::path predictions_path = cfg.predictions.value_or(cfg.work_dir / "predictions.jsonl");
  run.inputs.push_back(require_file(predictions_path));
  auto predictions = read_predictions(predictions_path);
  if (predictions.empty()) throw StageFailed("predictions file is empty: " + predictions_path.string());
  auto report = era_report(predictions, cfg.alpha);
  run.outputs["eval/report.json"] = to_json(report).dump(2) + "\n";
  run.outputs["eval/metrics.csv"] = metrics_csv(report);
  for (const auto& section : report.eras) {
    run.outputs["eval/confusion_" + std::string(to_string(section.era)) + ".csv"] = confusion_csv(section.confusion);
  }
  run.details["predictions"] = predictions.size();
  return run;
}

StageRun run_compare(const PipelineConfig& cfg) {
  StageRun run;
  const fs::path report_path = cfg.work_dir / "eval/report.json";
  run.inputs.push_back(require_file(report_path));
  auto doc = nlohmann::json::parse(read_file(report_path));

  EraReport report;
  report.alpha = cfg.alpha;
  std::vector<std::pair<Era, AccuracyCount>> counts;
  for (const auto& section : doc.at("eras")) {
    auto era = era_from_string(section.at("era").get<std::string>());
    if (!era) throw StageFailed("report lists unknown era " + section.at("era").dump());
    counts.push_back({*era, {section.at("correct").get<std::uint64_t>(), section.at("total").get<std::uint64_t>()}});
  }
  nlohmann::json comparisons = nlohmann::json::array();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (std::size_t j = i + 1; j < counts.size(); ++j) {
      try {
        auto result = compare_eras(counts[i].second, counts[j].second, cfg.alpha);
        report.comparisons.push_back({counts[i].first, counts[j].first, result});
        auto entry = to_json(result);
        entry["first"] = to_string(counts[i].first);
        entry["second"] = to_string(counts[j].first);
        comparisons.push_back(std::move(entry));
      } catch (const DegenerateMargins&) {
      }
    }
  }
  run.outputs["eval/comparisons.csv"] = comparisons_csv(report);
  run.outputs["eval/comparisons.json"] =
      nlohmann::json{{"alpha", cfg.alpha}, {"comparisons", std::move(comparisons)}}.dump(2) + "\n";
  return run;
}

StageRun dispatch(Stage stage, const PipelineConfig& cfg, const StageServices& services) {
  switch (stage) {
    case Stage::fetch: return run_fetch(cfg, services);
    case Stage::label: return run_label(cfg, services);
    case Stage::build_corpus: return run_build_corpus(cfg);
    case Stage::prompt: return run_prompt(cfg);
    case Stage::evaluate: return run_evaluate(cfg);
    case Stage::compare: return run_compare(cfg);
  }
  throw StageFailed("unknown stage");
}

std::string relative_name(const fs::path& path, const fs::path& base) {
  auto rel = path.lexically_relative(base);
  if (rel.empty() || rel.native().starts_with("..")) return path.lexically_normal().generic_string();
  return rel.generic_string();
}

}  // namespace

std::vector<FinetuneConfigRecord> reference_finetune_configs() {
  return {
      {"Qwen3-14B", 2, 8, 4, 1.0e-3, 16, 64, 0.0001, 0.0},
      {"Gemma-3-12B-it", 3, 16, 2, 2.0e-4, 16, 32, 0.1, 0.01},
  };
}

nlohmann::json to_json(const FinetuneConfigRecord& r) {
  return {{"model", r.model},
          {"epochs", r.epochs},
          {"batch_size", r.batch_size},
          {"gradient_accumulation", r.gradient_accumulation},
          {"learning_rate", r.learning_rate},
          {"lora_rank", r.lora_rank},
          {"lora_alpha", r.lora_alpha},
          {"lora_dropout", r.lora_dropout},
          {"weight_decay", r.weight_decay}};
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* value = std::getenv(name.c_str());
    if (!value || !*value) return std::nullopt;
    return std::string(value);
  };
}

PipelineConfig config_from_json(const nlohmann::json& object, const fs::path& base_dir, const EnvLookup& env) {
  if (!object.is_object()) throw ConfigInvalid("config root must be a JSON object");
  PipelineConfig cfg;
  try {
    cfg.work_dir = resolve(base_dir, object.value("work_dir", std::string("run")));

    if (auto m = object.find("metadata"); m != object.end()) {
      cfg.metadata.base_url = m->value("base_url", cfg.metadata.base_url);
      cfg.metadata.mailto = m->value("mailto", cfg.metadata.mailto);
      cfg.metadata.requests_per_second = m->value("requests_per_second", cfg.metadata.requests_per_second);
      cfg.metadata.max_retries = m->value("max_retries", cfg.metadata.max_retries);
      cfg.metadata.bypass_cache = m->value("bypass_cache", cfg.metadata.bypass_cache);
      if (m->contains("cache_dir")) cfg.metadata.cache_dir = resolve(base_dir, m->at("cache_dir").get<std::string>());
    }
    if (!object.contains("metadata") || !object.at("metadata").contains("cache_dir")) {
      cfg.metadata.cache_dir = cfg.work_dir / "cache/openalex";
    }

    if (auto c = object.find("chat"); c != object.end()) {
      cfg.chat.base_url = c->value("base_url", cfg.chat.base_url);
      cfg.chat.model = c->value("model", cfg.chat.model);
      cfg.chat.temperature = c->value("temperature", cfg.chat.temperature);
      cfg.chat.requests_per_second = c->value("requests_per_second", cfg.chat.requests_per_second);
      if (c->contains("stub_responses")) cfg.origin_stub = resolve(base_dir, c->at("stub_responses").get<std::string>());
    }

    if (auto e = object.find("english_countries"); e != object.end()) {
      cfg.english_countries.clear();
      for (const auto& code : *e) {
        auto parsed = CountryCode::parse(code.get<std::string>());
        if (!parsed) throw ConfigInvalid("english_countries: invalid code " + code.dump());
        cfg.english_countries.insert(*parsed);
      }
    }
    if (object.contains("mapping_table")) cfg.mapping_table = resolve(base_dir, object.at("mapping_table").get<std::string>());
    if (object.contains("sampling")) cfg.sampling = sampling_config_from_json(object.at("sampling"));
    cfg.alpha = object.value("alpha", cfg.alpha);

    if (auto in = object.find("inputs"); in != object.end()) {
      auto opt_path = [&](const char* key) -> std::optional<fs::path> {
        if (!in->contains(key) || in->at(key).is_null()) return std::nullopt;
        return resolve(base_dir, in->at(key).get<std::string>());
      };
      cfg.ids = opt_path("ids");
      cfg.eval_pool = opt_path("eval_pool");
      cfg.train_pool = opt_path("train_pool");
      cfg.exemplar_pool = opt_path("exemplar_pool");
      cfg.predictions = opt_path("predictions");
      if (auto dumps = in->find("dumps"); dumps != in->end()) {
        for (const auto& d : *dumps) {
          auto format = dump_format_from_string(d.value("format", std::string("anthology")));
          if (!format) throw ConfigInvalid("unknown dump format " + d.value("format", std::string()));
          cfg.dumps.push_back({resolve(base_dir, d.at("path").get<std::string>()), *format});
        }
      }
    }

    if (auto f = object.find("finetune"); f != object.end()) {
      cfg.finetune.clear();
      for (const auto& r : *f) {
        cfg.finetune.push_back({r.at("model").get<std::string>(), r.at("epochs").get<int>(),
                                r.at("batch_size").get<int>(), r.at("gradient_accumulation").get<int>(),
                                r.at("learning_rate").get<double>(), r.at("lora_rank").get<int>(),
                                r.at("lora_alpha").get<int>(), r.at("lora_dropout").get<double>(),
                                r.at("weight_decay").get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalid(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigInvalid(std::string("config: ") + e.what());
  }

  if (auto v = env("L1TRACE_MAILTO")) cfg.metadata.mailto = *v;
  if (auto v = env("L1TRACE_METADATA_BASE_URL")) cfg.metadata.base_url = *v;
  if (auto v = env("L1TRACE_CHAT_BASE_URL")) cfg.chat.base_url = *v;
  if (auto v = env("L1TRACE_CHAT_MODEL")) cfg.chat.model = *v;
  if (auto v = env("L1TRACE_CHAT_API_KEY")) cfg.chat.api_key = *v;

  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigInvalid("alpha must lie in (0, 1)");
  if (!(cfg.metadata.requests_per_second > 0.0)) throw ConfigInvalid("metadata.requests_per_second must be > 0");
  if (!(cfg.chat.requests_per_second > 0.0)) throw ConfigInvalid("chat.requests_per_second must be > 0");
  if (cfg.metadata.max_retries < 0) throw ConfigInvalid("metadata.max_retries must be >= 0");
  if (cfg.english_countries.empty()) throw ConfigInvalid("english_countries must not be empty");
  return cfg;
}

PipelineConfig load_config(const fs::path& path, const EnvLookup& env) {
  if (!fs::is_regular_file(path)) throw ConfigInvalid("config file not found: " + path.string());
  auto doc = nlohmann::json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw ConfigInvalid("config is not valid JSON: " + path.string());
  return config_from_json(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path(), env);
}

nlohmann::json to_json(const PipelineConfig& cfg) {
  auto opt = [](const std::optional<fs::path>& p) {
    return p ? nlohmann::json(p->generic_string()) : nlohmann::json(nullptr);
  };
  nlohmann::json english = nlohmann::json::array();
  for (const auto& c : cfg.english_countries) english.push_back(c.str());
  nlohmann::json dumps = nlohmann::json::array();
  for (const auto& d : cfg.dumps) dumps.push_back({{"path", d.path.generic_string()}, {"format", to_string(d.format)}});
  nlohmann::json finetune = nlohmann::json::array();
  for (const auto& r : cfg.finetune) finetune.push_back(to_json(r));
  return {{"work_dir", cfg.work_dir.generic_string()},
          {"metadata",
           {{"base_url", cfg.metadata.base_url},
            {"mailto", cfg.metadata.mailto.empty() ? "" : "<set>"},
            {"requests_per_second", cfg.metadata.requests_per_second},
            {"max_retries", cfg.metadata.max_retries},
            {"cache_dir", cfg.metadata.cache_dir.generic_string()},
            {"bypass_cache", cfg.metadata.bypass_cache}}},
          {"chat",
           {{"base_url", cfg.chat.base_url},
            {"model", cfg.chat.model},
            {"temperature", cfg.chat.temperature},
            {"requests_per_second", cfg.chat.requests_per_second},
            {"api_key", cfg.chat.api_key.empty() ? "" : "<redacted>"},
            {"stub_responses", opt(cfg.origin_stub)}}},
          {"english_countries", std::move(english)},
          {"mapping_table", opt(cfg.mapping_table)},
          {"sampling", to_json(cfg.sampling)},
          {"alpha", cfg.alpha},
          {"inputs",
           {{"ids", opt(cfg.ids)},
            {"dumps", std::move(dumps)},
            {"eval_pool", opt(cfg.eval_pool)},
            {"train_pool", opt(cfg.train_pool)},
            {"exemplar_pool", opt(cfg.exemplar_pool)},
            {"predictions", opt(cfg.predictions)}}},
          {"finetune", std::move(finetune)}};
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::fetch: return "fetch";
    case Stage::label: return "label";
    case Stage::build_corpus: return "build-corpus";
    case Stage::prompt: return "prompt";
    case Stage::evaluate: return "evaluate";
    case Stage::compare: return "compare";
  }
  return "unknown";
}

std::optional<Stage> stage_from_string(std::string_view text) {
  for (Stage s : kAllStages) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

fs::path manifest_path(const PipelineConfig& cfg, Stage stage) {
  return cfg.work_dir / "manifests" / (std::string(to_string(stage)) + ".json");
}

fs::path failure_marker_path(const PipelineConfig& cfg, Stage stage) {
  return cfg.work_dir / "manifests" / (std::string(to_string(stage)) + ".FAILED");
}

StageResult run_stage(Stage stage, const PipelineConfig& cfg, const StageServices& services) {
  const fs::path marker = failure_marker_path(cfg, stage);
  StageResult result;
  auto fail = [&](int code, const std::string& message) {
    result.exit_code = code;
    result.message = message;
    try {
      write_file_atomic(marker, message + "\n");
    } catch (const std::exception&) {
      // The exit code still reports the failure.
    }
    return result;
  };

  try {
    templates::verify_all();
    std::error_code ec;
    fs::remove(marker, ec);
    fs::remove(manifest_path(cfg, stage), ec);

    StageRun run = dispatch(stage, cfg, services);

    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& [rel, bytes] : run.outputs) {
      write_file_atomic(cfg.work_dir / rel, bytes);
      outputs.push_back({{"path", rel}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
    }
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& in : run.inputs) {
      inputs.push_back({{"path", relative_name(in, cfg.work_dir)}, {"sha256", sha256_hex(read_file(in))}});
    }
    nlohmann::json template_sums = templates::checksums();
    result.manifest = {{"stage", to_string(stage)}, {"config", to_json(cfg)},       {"templates", template_sums},
                       {"inputs", std::move(inputs)}, {"outputs", std::move(outputs)}, {"details", run.details}};
    write_file_atomic(manifest_path(cfg, stage), result.manifest.dump(2) + "\n");
    result.message = std::string(to_string(stage)) + ": ok";
    return result;
  } catch (const ConfigInvalid& e) {
    return fail(kExitConfig, e.what());
  } catch (const MissingInput& e) {
    return fail(kExitMissingInput, e.what());
  } catch (const std::exception& e) {
    return fail(kExitStageFailure, std::string(to_string(stage)) + " failed: " + e.what());
  }
}

}  // namespace l1trace
