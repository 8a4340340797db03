#ifndef VVAE_HTTP_TRANSPORT_HPP
#define VVAE_HTTP_TRANSPORT_HPP

// Real network transport. Kept apart from llm_client.hpp so code that only
// uses the mock backend does not pull in cpp-httplib and OpenSSL's TLS layer.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <memory>
#include <string>

#include "vvae/llm_client.hpp"

namespace vvae {

class HttplibTransport final : public Transport {
public:
    explicit HttplibTransport(int timeout_s = 120) : timeout_s_(timeout_s) {}

    HttpResponse post(const std::string& url, const std::string& body,
                      const std::vector<std::pair<std::string, std::string>>& headers) override {
        // Split "scheme://host[:port]/path".
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw ConfigError("endpoint must be an absolute URL: " + url);
        const auto path_start = url.find('/', scheme_end + 3);
        const std::string origin = url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

        httplib::Client cli(origin);
        cli.set_connection_timeout(timeout_s_, 0);
        cli.set_read_timeout(timeout_s_, 0);
        httplib::Headers hs;
        std::string content_type = "application/json";
        for (const auto& [k, v] : headers) {
            if (k == "Content-Type") {
                content_type = v;
            } else {
                hs.emplace(k, v);
            }
        }
        auto res = cli.Post(path, hs, body, content_type);
        if (!res) throw TransportError("POST " + url + " failed: " + httplib::to_string(res.error()));
        return {res->status, res->body};
    }

private:
    int timeout_s_;
};

inline std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

} // namespace vvae

#endif // VVAE_HTTP_TRANSPORT_HPP
