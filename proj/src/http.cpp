// SPDX-License-Identifier: Apache-2.0
#include "agentlab/http.hpp"

#include <cctype>
#include <cstdio>

#include <httplib.h>

#include "agentlab/error.hpp"
#include "agentlab/text.hpp"

namespace agentlab::http {

std::string Url::origin() const {
    return scheme + "://" + host + ":" + std::to_string(port);
}

Url parse_url(const std::string& url) {
    Url out;
    auto sep = url.find("://");
    if (sep == std::string::npos) throw IoError("not an absolute URL: " + url);
    out.scheme = text::to_lower(url.substr(0, sep));
    if (out.scheme != "http" && out.scheme != "https") {
        throw IoError("unsupported URL scheme: " + url);
    }
    auto rest = url.substr(sep + 3);
    auto slash = rest.find_first_of("/?");
    auto authority = rest.substr(0, slash);
    out.target = slash == std::string::npos ? "/" : rest.substr(slash);
    if (out.target.front() == '?') out.target.insert(0, "/");
    if (authority.empty()) throw IoError("URL has no host: " + url);

    out.port = out.scheme == "https" ? 443 : 80;
    if (auto colon = authority.rfind(':');
        colon != std::string::npos && authority.find(']') == std::string::npos) {
        try {
            out.port = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            throw IoError("bad port in URL: " + url);
        }
        authority.resize(colon);
    }
    out.host = authority;
    return out;
}

std::string url_encode(const std::string& value) {
    std::string out;
    for (unsigned char c : value) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", c);
            out += buf;
        }
    }
    return out;
}

namespace {

httplib::Headers to_httplib(const Headers& headers) {
    httplib::Headers out;
    for (const auto& [k, v] : headers) out.emplace(k, v);
    return out;
}

template <typename Call>
Response perform(const Url& url, int timeout_seconds, Call&& call) {
    httplib::Client client(url.origin());
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);
    client.set_follow_location(true);
    auto result = call(client);
    if (!result) {
        throw IoError("request to " + url.host + " failed: " + httplib::to_string(result.error()));
    }
    return Response{result->status, result->body};
}

}  // namespace

Response get(const std::string& url, const Headers& headers, int timeout_seconds) {
    auto parsed = parse_url(url);
    return perform(parsed, timeout_seconds, [&](httplib::Client& client) {
        return client.Get(parsed.target, to_httplib(headers));
    });
}

Response post_json(const std::string& url, const std::string& body, const Headers& headers,
                   int timeout_seconds) {
    auto parsed = parse_url(url);
    return perform(parsed, timeout_seconds, [&](httplib::Client& client) {
        return client.Post(parsed.target, to_httplib(headers), body, "application/json");
    });
}

}  // namespace agentlab::http
