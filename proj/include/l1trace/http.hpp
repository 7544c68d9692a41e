#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <string>

namespace l1trace {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::map<std::string, std::string>;

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse get(const std::string& url, const HttpHeaders& headers = {}) = 0;
  virtual HttpResponse post_json(const std::string& url, const std::string& body, const HttpHeaders& headers = {}) = 0;
};

// cpp-httplib backed transport; accepts absolute http:// and https:// URLs.
// A transport error (no connection, TLS failure) surfaces as status 0.
class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(30)) : timeout_(timeout) {}

  HttpResponse get(const std::string& url, const HttpHeaders& headers = {}) override;
  HttpResponse post_json(const std::string& url, const std::string& body, const HttpHeaders& headers = {}) override;

 private:
  std::chrono::seconds timeout_;
};

class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_until(time_point t) = 0;
};

class SteadyClock final : public Clock {
 public:
  time_point now() override;
  void sleep_until(time_point t) override;
};

// Spaces requests at least 1/rps apart. Slots are reserved under the lock and
// waited for outside it, so concurrent callers queue in arrival order.
class RateLimiter {
 public:
  RateLimiter(double requests_per_second, Clock& clock);

  void acquire();

  double rate() const { return rate_; }

 private:
  double rate_;
  Clock::time_point::duration interval_;
  Clock& clock_;
  std::mutex mutex_;
  Clock::time_point next_slot_{};
  bool primed_ = false;
};

}  // namespace l1trace
