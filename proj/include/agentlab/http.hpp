// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

// Minimal blocking HTTP client used by the chat backend, the URL loader and
// the threat-intelligence adapters.
namespace agentlab::http {

struct Url {
    std::string scheme;  // "http" or "https"
    std::string host;
    int port = 0;
    std::string target;  // path plus query, always starts with '/'

    std::string origin() const;
};

/// Throws IoError for anything that is not an absolute http(s) URL.
Url parse_url(const std::string& url);

std::string url_encode(const std::string& value);

using Headers = std::vector<std::pair<std::string, std::string>>;

struct Response {
    int status = 0;
    std::string body;
};

/// Transport failures throw IoError; non-2xx statuses are returned.
Response get(const std::string& url, const Headers& headers = {}, int timeout_seconds = 30);
Response post_json(const std::string& url, const std::string& body, const Headers& headers = {},
                   int timeout_seconds = 120);

}  // namespace agentlab::http
