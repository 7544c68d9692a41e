#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "l1trace/http.hpp"
#include "l1trace/ingest.hpp"

namespace l1trace {

struct CacheEntry {
  std::string request_key;
  std::string payload;
  std::int64_t fetched_at = 0;  // unix seconds
};

// One file pair per request key: <sha256(key)>.body holds the raw payload,
// <sha256(key)>.meta holds the key and fetch time. Entries never expire.
// Writes go through rename so concurrent writers of the same key are safe.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<CacheEntry> get(const std::string& request_key) const;
  void put(const std::string& request_key, const std::string& payload) const;

  std::filesystem::path body_path(const std::string& request_key) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

class FetchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFound : public FetchError {
 public:
  explicit NotFound(const std::string& id) : FetchError("work not found upstream: " + id) {}
};

class Malformed : public FetchError {
 public:
  using FetchError::FetchError;
};

class RateLimited : public FetchError {
 public:
  using FetchError::FetchError;
};

struct MetadataClientConfig {
  std::string base_url = "https://api.openalex.org";
  std::string mailto;  // polite-pool address, not part of the request key
  double requests_per_second = 10.0;
  int max_retries = 3;
  std::filesystem::path cache_dir = ".cache/openalex";
  bool bypass_cache = false;
};

// Normalizes an OpenAlex work id or DOI to the path segment used upstream:
// "https://openalex.org/W1" -> "W1", "https://doi.org/10.1/X" -> "doi:10.1/x".
std::string normalize_work_id(std::string_view id);

// "GET works/<normalized id>". Independent of base URL and mailto.
std::string work_request_key(std::string_view id);

class MetadataClient {
 public:
  MetadataClient(MetadataClientConfig config, HttpTransport& transport, Clock& clock);

  // Served from the cache when present (unless bypass_cache). Network
  // responses are cached only after they parse into a valid PaperRecord.
  PaperRecord fetch_work(const std::string& paper_id);

  std::size_t network_requests() const { return network_requests_.load(); }

 private:
  std::string fetch_payload(const std::string& id, const std::string& key);

  MetadataClientConfig config_;
  HttpTransport& transport_;
  Clock& clock_;
  RateLimiter limiter_;
  ResponseCache cache_;
  std::atomic<std::size_t> network_requests_{0};
};

}  // namespace l1trace
