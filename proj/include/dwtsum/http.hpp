#pragma once

// Minimal JSON-over-HTTP POST with bounded retries and exponential backoff,
// shared by the embedding provider and the chat-completion client.

#include <chrono>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dwtsum/error.hpp"

namespace dwtsum::http {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // always starts with '/'
};

inline Url parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::config, "endpoint URL '" + url + "' has no scheme");
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorKind::config, "endpoint URL '" + url + "' must use http or https");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Url out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (out.origin.size() <= scheme_end + 3) {
    throw Error(ErrorKind::config, "endpoint URL '" + url + "' has no host");
  }
  return out;
}

/// Reads a bearer token from the named environment variable. An empty name
/// means the endpoint needs no authentication.
inline std::optional<std::string> bearer_from_env(const std::string& var_name) {
  if (var_name.empty()) return std::nullopt;
  const char* value = std::getenv(var_name.c_str());
  if (value == nullptr || *value == '\0') {
    throw Error(ErrorKind::config, "environment variable " + var_name + " is not set");
  }
  return std::string(value);
}

struct RetryPolicy {
  int timeout_ms = 30000;
  int max_retries = 3;
  int backoff_ms = 250;  // delay before retry r is backoff_ms * 2^r
};

struct Response {
  nlohmann::json body;
  int attempts = 0;
};

inline bool retryable_status(int status) { return status == 429 || status >= 500; }

inline Response post_json(const std::string& url, const nlohmann::json& payload,
                          const std::optional<std::string>& bearer, const RetryPolicy& policy) {
  const Url target = parse_url(url);
  httplib::Client client(target.origin);
  const auto timeout = std::chrono::milliseconds(policy.timeout_ms);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                static_cast<time_t>((policy.timeout_ms % 1000) * 1000));
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (bearer) headers.emplace("Authorization", "Bearer " + *bearer);
  const std::string body = payload.dump();

  std::string last_failure;
  const int total = policy.max_retries + 1;
  for (int attempt = 1; attempt <= total; ++attempt) {
    auto res = client.Post(target.path, headers, body, "application/json");
    if (!res) {
      last_failure = "connection failed (" + httplib::to_string(res.error()) + ")";
    } else if (res->status >= 200 && res->status < 300) {
      try {
        return {nlohmann::json::parse(res->body), attempt};
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::parse, "response from " + url + " is not JSON: " + e.what());
      }
    } else {
      last_failure = "HTTP " + std::to_string(res->status);
      if (!retryable_status(res->status)) {
        throw Error(ErrorKind::transport, "POST " + url + " failed: " + last_failure +
                                              " after " + std::to_string(attempt) + " attempt(s)");
      }
    }
    if (attempt < total) {
      std::this_thread::sleep_for(std::chrono::milliseconds(policy.backoff_ms) * (1LL << (attempt - 1)));
    }
  }
  throw Error(ErrorKind::transport, "POST " + url + " failed: " + last_failure + " after " +
                                        std::to_string(total) + " attempt(s)");
}

}  // namespace dwtsum::http
