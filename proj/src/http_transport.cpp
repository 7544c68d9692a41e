#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cmath>
#include <stdexcept>
#include <thread>

#include "l1trace/http.hpp"

namespace l1trace {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("URL without scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

httplib::Headers to_headers(const HttpHeaders& headers) {
  httplib::Headers out;
  for (const auto& [k, v] : headers) out.emplace(k, v);
  return out;
}

HttpResponse convert(const httplib::Result& result) {
  if (!result) return {0, httplib::to_string(result.error())};
  return {result->status, result->body};
}

}  // namespace

HttpResponse HttplibTransport::get(const std::string& url, const HttpHeaders& headers) {
  auto [origin, path] = split_url(url);
  httplib::Client client(origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_follow_location(true);
  return convert(client.Get(path, to_headers(headers)));
}

HttpResponse HttplibTransport::post_json(const std::string& url, const std::string& body, const HttpHeaders& headers) {
  auto [origin, path] = split_url(url);
  httplib::Client client(origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  return convert(client.Post(path, to_headers(headers), body, "application/json"));
}

Clock::time_point SteadyClock::now() { return std::chrono::steady_clock::now(); }

void SteadyClock::sleep_until(time_point t) { std::this_thread::sleep_until(t); }

RateLimiter::RateLimiter(double requests_per_second, Clock& clock) : rate_(requests_per_second), clock_(clock) {
  if (!(requests_per_second > 0.0) || !std::isfinite(requests_per_second)) {
    throw std::invalid_argument("rate limit must be a positive number of requests per second");
  }
  interval_ = std::chrono::duration_cast<Clock::time_point::duration>(std::chrono::duration<double>(1.0 / rate_));
  if (interval_.count() == 0) interval_ = Clock::time_point::duration(1);
}

void RateLimiter::acquire() {
  Clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    auto now = clock_.now();
    slot = (!primed_ || next_slot_ < now) ? now : next_slot_;
    next_slot_ = slot + interval_;
    primed_ = true;
  }
  if (clock_.now() < slot) clock_.sleep_until(slot);
}

}  // namespace l1trace
