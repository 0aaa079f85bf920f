#include <httplib.h>

#include "crisisfilter/pipeline.hpp"

namespace crisisfilter {

HttpFetcher::HttpFetcher(std::chrono::milliseconds timeout, int retries) : timeout_(timeout), retries_(retries) {}

FetchResult HttpFetcher::fetch(const std::string& locator) const
{
    FetchResult r;
    const auto scheme_end = locator.find("://");
    if (scheme_end == std::string::npos) {
        r.error = "not a URL: " + locator;
        return r;
    }
    const auto path_start = locator.find('/', scheme_end + 3);
    const std::string origin = locator.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : locator.substr(path_start);

    const auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - sec);
    for (int attempt = 0; attempt <= retries_; ++attempt) {
        httplib::Client client(origin);
        if (!client.is_valid()) {
            r.error = "unsupported URL: " + locator;
            return r;
        }
        client.set_connection_timeout(sec.count(), usec.count());
        client.set_read_timeout(sec.count(), usec.count());
        client.set_follow_location(true);
        auto res = client.Get(path);
        if (!res) {
            r.error = "request failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            r.error = "HTTP status " + std::to_string(res->status);
            // Client errors will not improve on retry.
            if (res->status >= 400 && res->status < 500) {
                return r;
            }
            continue;
        }
        r.bytes.assign(res->body.begin(), res->body.end());
        r.error.clear();
        r.ok = true;
        return r;
    }
    return r;
}

}  // namespace crisisfilter
