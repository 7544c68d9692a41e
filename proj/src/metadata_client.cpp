#include "l1trace/metadata_client.hpp"

#include <cctype>
#include <chrono>

#include "l1trace/text_util.hpp"

namespace l1trace {

namespace {

std::string url_encode(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == '/' || c == ':' || c == '@') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0x0f]);
    }
  }
  return out;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ResponseCache::body_path(const std::string& request_key) const {
  return dir_ / (sha256_hex(request_key) + ".body");
}

std::optional<CacheEntry> ResponseCache::get(const std::string& request_key) const {
  auto body = body_path(request_key);
  auto meta = body;
  meta.replace_extension(".meta");
  if (!std::filesystem::exists(body) || !std::filesystem::exists(meta)) return std::nullopt;
  auto meta_json = json::parse(read_file(meta), nullptr, false);
  if (meta_json.is_discarded() || meta_json.value("request_key", "") != request_key) return std::nullopt;
  return CacheEntry{request_key, read_file(body), meta_json.value("fetched_at", std::int64_t{0})};
}

void ResponseCache::put(const std::string& request_key, const std::string& payload) const {
  auto body = body_path(request_key);
  auto meta = body;
  meta.replace_extension(".meta");
  auto now = std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch());
  write_file_atomic(body, payload);
  write_file_atomic(meta, json{{"request_key", request_key}, {"fetched_at", now.count()}}.dump() + "\n");
}

std::string normalize_work_id(std::string_view id) {
  std::string s = normalize_whitespace(id);
  for (std::string_view prefix : {"https://openalex.org/", "http://openalex.org/", "openalex:"}) {
    if (s.starts_with(prefix)) return s.substr(prefix.size());
  }
  for (std::string_view prefix : {"https://doi.org/", "http://doi.org/", "doi:"}) {
    if (s.starts_with(prefix)) return "doi:" + ascii_lower(s.substr(prefix.size()));
  }
  if (s.starts_with("10.")) return "doi:" + ascii_lower(s);
  return s;
}

std::string work_request_key(std::string_view id) { return "GET works/" + normalize_work_id(id); }

MetadataClient::MetadataClient(MetadataClientConfig config, HttpTransport& transport, Clock& clock)
    : config_(std::move(config)),
      transport_(transport),
      clock_(clock),
      limiter_(config_.requests_per_second, clock),
      cache_(config_.cache_dir) {}

std::string MetadataClient::fetch_payload(const std::string& id, const std::string& key) {
  std::string url = config_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/works/" + url_encode(normalize_work_id(id));
  if (!config_.mailto.empty()) url += "?mailto=" + url_encode(config_.mailto);

  auto backoff = std::chrono::seconds(1);
  for (int attempt = 0;; ++attempt) {
    limiter_.acquire();
    ++network_requests_;
    HttpResponse response = transport_.get(url, {{"Accept", "application/json"}});
    if (response.status == 200) return std::move(response.body);
    if (response.status == 404) throw NotFound(id);
    bool retryable = response.status == 429 || response.status == 0 || response.status >= 500;
    if (!retryable) {
      throw FetchError("unexpected HTTP " + std::to_string(response.status) + " for " + key);
    }
    if (attempt >= config_.max_retries) {
      if (response.status == 429) throw RateLimited("retry budget exhausted for " + key);
      throw FetchError("giving up on " + key + " after HTTP " + std::to_string(response.status));
    }
    clock_.sleep_until(clock_.now() + backoff);
    backoff *= 2;
  }
}

PaperRecord MetadataClient::fetch_work(const std::string& paper_id) {
  if (normalize_whitespace(paper_id).empty()) throw std::invalid_argument("paper_id is empty");
  const std::string key = work_request_key(paper_id);
  if (!config_.bypass_cache) {
    if (auto hit = cache_.get(key)) {
      try {
        return parse_openalex_work(hit->payload);
      } catch (const SchemaViolation& e) {
        throw Malformed("cached response for " + key + ": " + e.what());
      }
    }
  }
  std::string payload = fetch_payload(paper_id, key);
  PaperRecord paper;
  try {
    paper = parse_openalex_work(payload);
  } catch (const SchemaViolation& e) {
    throw Malformed(key + ": " + e.what());
  }
  cache_.put(key, payload);
  return paper;
}

}  // namespace l1trace
