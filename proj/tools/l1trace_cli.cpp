// l1trace: corpus labeling, sampling, prompt generation and evaluation stages.
//
//   l1trace fetch        --config cfg.json
//   l1trace label        --config cfg.json
//   l1trace build-corpus --pool labeled.jsonl --config cfg.json --out dir
//   l1trace prompt       --config cfg.json
//   l1trace evaluate     --predictions preds.jsonl --out dir [--alpha 0.05]
//   l1trace compare      --config cfg.json | --a 291/400 --b 260/400
//   l1trace run          --config cfg.json        (all stages in order)
//
// Exit codes: 0 ok, 2 config, 3 missing input, 4 stage failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "l1trace/pipeline.hpp"
#include "l1trace/stats.hpp"
#include "l1trace/template_assets.hpp"

namespace {

using namespace l1trace;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "Pipeline config (JSON)");
  cmd->add_option("--seed", flags.seed, "Override sampling.rng_seed");
  cmd->add_option("--alpha", flags.alpha, "Override significance level");
  cmd->add_option("--out", flags.out, "Override work_dir");
}

PipelineConfig resolve_config(const CommonFlags& flags) {
  PipelineConfig cfg = flags.config.empty() ? config_from_json(nlohmann::json::object(), ".") : load_config(flags.config);
  if (flags.seed) cfg.sampling.rng_seed = *flags.seed;
  if (flags.alpha) {
    if (!(*flags.alpha > 0.0 && *flags.alpha < 1.0)) throw ConfigInvalid("--alpha must lie in (0, 1)");
    cfg.alpha = *flags.alpha;
  }
  if (!flags.out.empty()) {
    // A cache that lives under the old work_dir moves with it.
    if (cfg.metadata.cache_dir == cfg.work_dir / "cache/openalex") cfg.metadata.cache_dir = flags.out + "/cache/openalex";
    cfg.work_dir = flags.out;
  }
  return cfg;
}

int report(const StageResult& result) {
  if (result.exit_code == kExitOk) {
    std::cout << result.message << "\n";
  } else {
    std::cerr << "error: " << result.message << "\n";
  }
  return result.exit_code;
}

AccuracyCount parse_count(const std::string& text) {
  auto slash = text.find('/');
  if (slash == std::string::npos) throw ConfigInvalid("expected correct/total, got '" + text + "'");
  try {
    return {std::stoull(text.substr(0, slash)), std::stoull(text.substr(slash + 1))};
  } catch (const std::exception&) {
    throw ConfigInvalid("expected correct/total, got '" + text + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"l1trace: native-language corpus and evaluation toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string pool, train_pool, predictions, count_a, count_b;

  auto* fetch = app.add_subcommand("fetch", "Fetch OpenAlex works or load dumps into papers.jsonl");
  add_common(fetch, flags);
  auto* label = app.add_subcommand("label", "Assign L1 labels to papers.jsonl");
  add_common(label, flags);
  auto* build = app.add_subcommand("build-corpus", "Build the balanced eval (and optional train) corpus");
  add_common(build, flags);
  build->add_option("--pool", pool, "Labeled eval pool (JSONL)");
  build->add_option("--train-pool", train_pool, "Labeled training pool (JSONL)");
  auto* prompt = app.add_subcommand("prompt", "Emit few-shot and fine-tune prompt JSONL");
  add_common(prompt, flags);
  auto* evaluate = app.add_subcommand("evaluate", "Metrics, confusion matrices and era comparisons");
  add_common(evaluate, flags);
  evaluate->add_option("--predictions", predictions, "Predictions JSONL {paper_id, era, gold, raw_output}");
  auto* compare = app.add_subcommand("compare", "Fisher exact comparison of era accuracies");
  add_common(compare, flags);
  compare->add_option("--a", count_a, "correct/total for the first era");
  compare->add_option("--b", count_b, "correct/total for the second era");
  auto* run = app.add_subcommand("run", "Run every stage in order");
  add_common(run, flags);
  app.add_subcommand("check-templates", "Verify embedded prompt template checksums");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (app.got_subcommand("check-templates")) {
      templates::verify_all();
      for (const auto& [name, sum] : templates::checksums()) std::cout << sum << "  " << name << "\n";
      return kExitOk;
    }

    PipelineConfig cfg = resolve_config(flags);

    if (compare->parsed() && (!count_a.empty() || !count_b.empty())) {
      if (count_a.empty() || count_b.empty()) throw ConfigInvalid("--a and --b must be given together");
      auto result = compare_eras(parse_count(count_a), parse_count(count_b), cfg.alpha);
      const auto& t = result.table;
      std::printf("table [[%llu, %llu], [%llu, %llu]]  p = %.6g  alpha = %g  %s\n",
                  static_cast<unsigned long long>(t.a), static_cast<unsigned long long>(t.b),
                  static_cast<unsigned long long>(t.c), static_cast<unsigned long long>(t.d), result.p_value,
                  result.alpha, result.significant ? "significant" : "not significant");
      return kExitOk;
    }

    if (!pool.empty()) cfg.eval_pool = pool;
    if (!train_pool.empty()) cfg.train_pool = train_pool;
    if (!predictions.empty()) cfg.predictions = predictions;

    if (run->parsed()) {
      for (Stage stage : kAllStages) {
        int code = report(run_stage(stage, cfg));
        if (code != kExitOk) return code;
      }
      return kExitOk;
    }
    for (auto* sub : app.get_subcommands()) {
      if (auto stage = stage_from_string(sub->get_name())) return report(run_stage(*stage, cfg));
    }
    return kExitConfig;
  } catch (const ConfigInvalid& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const templates::TemplateDrift& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStageFailure;
  }
}
