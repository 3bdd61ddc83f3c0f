#pragma once

// Live transport. Define CPPHTTPLIB_OPENSSL_SUPPORT before including this
// header (the CMake target does) to reach https endpoints.

#include <regex>
#include <string>

#include <httplib.h>

#include "cotox/http.hpp"

namespace cotox::http {

class LiveClient : public Client {
 public:
  Response send(const Request& req) override {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    Response r;
    if (!std::regex_match(req.url, m, kUrl)) {
      r.error = TransportError::ConnectionFailed;
      r.error_detail = "bad url " + req.url;
      return r;
    }
    httplib::Client cli(m[1].str());
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(req.timeout).count();
    cli.set_connection_timeout(10);
    cli.set_read_timeout(static_cast<time_t>(secs > 0 ? secs : 60));
    cli.set_follow_location(true);
    httplib::Headers headers;
    for (const auto& [k, v] : req.headers) headers.emplace(k, v);
    const std::string path = m[2].matched ? m[2].str() : "/";

    httplib::Result res = req.method == "POST"
                              ? cli.Post(path, headers, req.body, "application/json")
                              : cli.Get(path, headers);
    if (!res) {
      r.error = res.error() == httplib::Error::Read || res.error() == httplib::Error::Write
                    ? TransportError::Timeout
                    : TransportError::ConnectionFailed;
      r.error_detail = httplib::to_string(res.error());
      return r;
    }
    r.status = res->status;
    r.body = res->body;
    for (const auto& [k, v] : res->headers) r.headers[util::to_lower(k)] = v;
    return r;
  }
};

}  // namespace cotox::http
