#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "l1trace/corpus.hpp"
#include "l1trace/http.hpp"
#include "l1trace/ingest.hpp"
#include "l1trace/labeling.hpp"
#include "l1trace/metadata_client.hpp"

namespace l1trace {

// Fine-tuning hyperparameters kept as an inert record in run manifests.
struct FinetuneConfigRecord {
  std::string model;
  int epochs = 0;
  int batch_size = 0;
  int gradient_accumulation = 0;
  double learning_rate = 0.0;
  int lora_rank = 0;
  int lora_alpha = 0;
  double lora_dropout = 0.0;
  double weight_decay = 0.0;
};

std::vector<FinetuneConfigRecord> reference_finetune_configs();

nlohmann::json to_json(const FinetuneConfigRecord& record);

struct DumpInput {
  std::filesystem::path path;
  DumpFormat format = DumpFormat::anthology;
};

struct PipelineConfig {
  std::filesystem::path work_dir = "run";
  MetadataClientConfig metadata;
  ChatEndpointConfig chat;
  std::optional<std::filesystem::path> origin_stub;  // recorded name -> response JSON
  CountrySet english_countries = default_english_countries();
  std::optional<std::filesystem::path> mapping_table;
  SamplingConfig sampling;
  double alpha = 0.05;

  std::optional<std::filesystem::path> ids;  // one work id per line
  std::vector<DumpInput> dumps;
  std::optional<std::filesystem::path> eval_pool;      // default: <work_dir>/labeled.jsonl
  std::optional<std::filesystem::path> train_pool;     // labeled JSONL
  std::optional<std::filesystem::path> exemplar_pool;  // labeled JSONL
  std::optional<std::filesystem::path> predictions;    // default: <work_dir>/predictions.jsonl

  std::vector<FinetuneConfigRecord> finetune = reference_finetune_configs();
};

class ConfigInvalid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingInput : public std::runtime_error {
 public:
  explicit MissingInput(const std::filesystem::path& path)
      : std::runtime_error("missing input: " + path.string()), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

class StageFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

// Reads the process environment.
EnvLookup process_env();

// Relative paths resolve against base_dir. Environment overrides:
// L1TRACE_MAILTO, L1TRACE_METADATA_BASE_URL, L1TRACE_CHAT_BASE_URL,
// L1TRACE_CHAT_MODEL, L1TRACE_CHAT_API_KEY. Throws ConfigInvalid.
PipelineConfig config_from_json(const nlohmann::json& object, const std::filesystem::path& base_dir,
                                const EnvLookup& env = process_env());
PipelineConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env());

// Secrets (API key) are redacted.
nlohmann::json to_json(const PipelineConfig& config);

enum class Stage { fetch, label, build_corpus, prompt, evaluate, compare };

std::string_view to_string(Stage stage);
std::optional<Stage> stage_from_string(std::string_view text);

inline constexpr std::array<Stage, 6> kAllStages{Stage::fetch,  Stage::label,    Stage::build_corpus,
                                                  Stage::prompt, Stage::evaluate, Stage::compare};

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitMissingInput = 3, kExitStageFailure = 4 };

// Injection points for tests; null members fall back to real implementations.
struct StageServices {
  HttpTransport* transport = nullptr;
  Clock* clock = nullptr;
  OriginClient* origin_client = nullptr;
};

struct StageResult {
  int exit_code = kExitOk;
  std::string message;
  nlohmann::json manifest;  // empty on failure
};

std::filesystem::path manifest_path(const PipelineConfig& config, Stage stage);
std::filesystem::path failure_marker_path(const PipelineConfig& config, Stage stage);

// Runs one stage. Outputs are written only after the stage has computed all of
// them, each via rename, followed by manifests/<stage>.json listing every
// output with its sha256. On failure manifests/<stage>.FAILED holds the
// reason. Never throws for stage-level errors; see exit_code.
StageResult run_stage(Stage stage, const PipelineConfig& config, const StageServices& services = {});

}  // namespace l1trace
