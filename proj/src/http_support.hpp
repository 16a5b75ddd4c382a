#pragma once

// Shared private HTTP plumbing. Keep httplib out of public headers; it is
// include-heavy and drags OpenSSL symbols along.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <string>
#include <utility>

#include "esp/errors.hpp"

namespace esp::detail {

// Splits "http://host:port/some/path" into {"http://host:port", "/some/path"}.
inline std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::ConfigError, "endpoint is not an absolute URL: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline httplib::Client make_client(const std::string& base, int timeout_ms) {
  httplib::Client client(base);
  client.set_connection_timeout(std::chrono::milliseconds(timeout_ms));
  client.set_read_timeout(std::chrono::milliseconds(timeout_ms));
  client.set_write_timeout(std::chrono::milliseconds(timeout_ms));
  return client;
}

}  // namespace esp::detail
