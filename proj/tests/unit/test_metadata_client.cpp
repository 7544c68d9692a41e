#include <doctest.h>

#include <thread>

#include "l1trace/metadata_client.hpp"
#include "l1trace/text_util.hpp"
#include "test_support.hpp"

using namespace l1trace;
using namespace l1trace::testing;

namespace {

std::string work_payload(const std::string& id, int authors) {
  json authorships = json::array();
  for (int i = 0; i < authors; ++i) {
    authorships.push_back({{"author", {{"display_name", "Author " + std::to_string(i)}}},
                           {"institutions", {{{"country_code", "JP"}}}}});
  }
  return json{{"id", "https://openalex.org/" + id},
              {"title", "Title of " + id},
              {"abstract_inverted_index", {{"Abstract", {0}}, {"text", {1}}}},
              {"publication_year", 2014},
              {"authorships", authorships}}
      .dump();
}

MetadataClientConfig config_for(const TempDir& dir, double rps = 10.0) {
  MetadataClientConfig cfg;
  cfg.base_url = "https://api.test";
  cfg.cache_dir = dir / "cache";
  cfg.requests_per_second = rps;
  cfg.max_retries = 2;
  return cfg;
}

}  // namespace

TEST_CASE("work ids normalize into stable request keys") {
  CHECK(normalize_work_id("https://openalex.org/W123") == "W123");
  CHECK(normalize_work_id(" W123 ") == "W123");
  CHECK(normalize_work_id("https://doi.org/10.18653/V1/P16-1001") == "doi:10.18653/v1/p16-1001");
  CHECK(normalize_work_id("10.18653/V1/P16-1001") == "doi:10.18653/v1/p16-1001");
  CHECK(work_request_key("https://openalex.org/W123") == work_request_key("W123"));
}

TEST_CASE("fetch_work parses, caches and replays byte-identically") {
  TempDir dir;
  FakeClock clock;
  FakeTransport transport(&clock);
  transport.fixed["https://api.test/works/W1?mailto=me@example.org"] = {200, work_payload("W1", 3)};
  auto cfg = config_for(dir);
  cfg.mailto = "me@example.org";

  MetadataClient client(cfg, transport, clock);
  auto first = client.fetch_work("W1");
  CHECK(first.authors.size() == 3);
  CHECK(first.authors[2].position == 2);
  CHECK(client.network_requests() == 1);

  auto second = client.fetch_work("https://openalex.org/W1");
  CHECK(second == first);
  CHECK(client.network_requests() == 1);
  CHECK(transport.requests.size() == 1);

  // A new client over the same cache dir never touches the network.
  FakeTransport offline;
  MetadataClient warm(cfg, offline, clock);
  CHECK(warm.fetch_work("W1") == first);
  CHECK(offline.requests.empty());

  ResponseCache cache(cfg.cache_dir);
  auto entry = cache.get(work_request_key("W1"));
  REQUIRE(entry);
  CHECK(entry->payload == work_payload("W1", 3));
}

TEST_CASE("fetch_work errors") {
  TempDir dir;
  FakeClock clock;
  FakeTransport transport(&clock);
  auto cfg = config_for(dir);
  MetadataClient client(cfg, transport, clock);

  CHECK_THROWS_AS(client.fetch_work("W404"), NotFound);

  transport.fixed["https://api.test/works/W2"] = {200, R"({"id":"W2","title":"t","publication_year":2000})"};
  CHECK_THROWS_AS(client.fetch_work("W2"), Malformed);
  CHECK_FALSE(ResponseCache(cfg.cache_dir).get(work_request_key("W2")));

  transport.fixed["https://api.test/works/W3"] = {429, "slow down"};
  auto before = transport.requests.size();
  CHECK_THROWS_AS(client.fetch_work("W3"), RateLimited);
  CHECK(transport.requests.size() - before == 3);  // first try + 2 retries

  CHECK_THROWS_AS(client.fetch_work("  "), std::invalid_argument);
}

TEST_CASE("fetch_work retries transient failures") {
  TempDir dir;
  FakeClock clock;
  FakeTransport transport(&clock);
  transport.scripted["https://api.test/works/W5"] = {{429, ""}, {503, ""}, {200, work_payload("W5", 1)}};
  MetadataClient client(config_for(dir), transport, clock);
  auto paper = client.fetch_work("W5");
  CHECK(paper.paper_id == "W5");
  CHECK(client.network_requests() == 3);
}

TEST_CASE("bypass_cache refetches") {
  TempDir dir;
  FakeClock clock;
  FakeTransport transport(&clock);
  transport.fixed["https://api.test/works/W6"] = {200, work_payload("W6", 2)};
  auto cfg = config_for(dir);
  MetadataClient(cfg, transport, clock).fetch_work("W6");
  cfg.bypass_cache = true;
  MetadataClient fresh(cfg, transport, clock);
  fresh.fetch_work("W6");
  CHECK(fresh.network_requests() == 1);
  CHECK(transport.requests.size() == 2);
}

TEST_CASE("rate limiter never exceeds the configured rate (fake clock)") {
  TempDir dir;
  FakeClock clock;
  FakeTransport transport(&clock);
  for (int i = 0; i < 40; ++i) {
    std::string id = "W" + std::to_string(100 + i);
    transport.fixed["https://api.test/works/" + id] = {200, work_payload(id, 1)};
  }
  const double rps = 4.0;
  MetadataClient client(config_for(dir, rps), transport, clock);
  for (int i = 0; i < 40; ++i) client.fetch_work("W" + std::to_string(100 + i));

  REQUIRE(transport.times.size() == 40);
  // Any window of one second holds at most rps requests.
  for (std::size_t i = 0; i < transport.times.size(); ++i) {
    std::size_t in_window = 0;
    for (std::size_t j = i; j < transport.times.size(); ++j) {
      if (transport.times[j] - transport.times[i] < std::chrono::seconds(1)) ++in_window;
    }
    CHECK(in_window <= static_cast<std::size_t>(rps));
  }
  CHECK(transport.times.back() - transport.times.front() >= std::chrono::milliseconds(39 * 250));
}

TEST_CASE("rate limiter rejects non-positive rates") {
  FakeClock clock;
  CHECK_THROWS_AS(RateLimiter(0.0, clock), std::invalid_argument);
  CHECK_THROWS_AS(RateLimiter(-1.0, clock), std::invalid_argument);
}

TEST_CASE("cache tolerates concurrent writers of one key") {
  TempDir dir;
  ResponseCache cache(dir / "cache");
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 25; ++i) cache.put("GET works/W1", "identical payload");
    });
  }
  for (auto& th : threads) th.join();
  auto entry = cache.get("GET works/W1");
  REQUIRE(entry);
  CHECK(entry->payload == "identical payload");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir / "cache")) ++files;
  CHECK(files == 2);
}
