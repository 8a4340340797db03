#ifndef VVAE_LLM_CLIENT_HPP
#define VVAE_LLM_CLIENT_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vvae/error.hpp"
#include "vvae/hashing.hpp"
#include "vvae/jsonl.hpp"
#include "vvae/persona_space.hpp"
#include "vvae/prompt_templates.hpp"
#include "vvae/text.hpp"

// Chat-completion backends (remote HTTP or rule-based mock) behind one
// cached, rate-limited client, plus the prompt templates.
namespace vvae {

enum class Role { user, assistant };

inline std::string_view to_string(Role r) { return r == Role::user ? "user" : "assistant"; }

struct ChatMessage {
    Role role = Role::user;
    std::string content;
};

struct ChatRequest {
    std::string system;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 512;

    void validate() const {
        if (messages.empty()) throw ConfigError("chat request has no messages");
        if (temperature < 0.0) throw ConfigError("chat request temperature must be >= 0");
        if (max_tokens <= 0) throw ConfigError("chat request max_tokens must be positive");
    }
};

// ---------------------------------------------------------------------------
// Prompt templates

enum class TemplateName { persona_extraction, unstructured_extraction, few_shot_chat };

inline std::string_view to_string(TemplateName n) {
    switch (n) {
    case TemplateName::persona_extraction: return "persona_extraction";
    case TemplateName::unstructured_extraction: return "unstructured_extraction";
    case TemplateName::few_shot_chat: return "few_shot_chat";
    }
    return "?";
}

namespace detail {

inline bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

/// Calls on_text for literal runs and on_name for each {name} placeholder.
template <typename OnText, typename OnName>
void scan_placeholders(std::string_view body, OnText&& on_text, OnName&& on_name) {
    std::size_t i = 0;
    std::size_t literal_start = 0;
    while (i < body.size()) {
        if (body[i] == '{') {
            std::size_t j = i + 1;
            while (j < body.size() && is_placeholder_char(body[j])) ++j;
            if (j > i + 1 && j < body.size() && body[j] == '}') {
                on_text(body.substr(literal_start, i - literal_start));
                on_name(body.substr(i + 1, j - i - 1));
                i = j + 1;
                literal_start = i;
                continue;
            }
        }
        ++i;
    }
    on_text(body.substr(literal_start));
}

} // namespace detail

struct PromptTemplate {
    TemplateName name = TemplateName::persona_extraction;
    std::string body;

    std::set<std::string> placeholders() const {
        std::set<std::string> out;
        detail::scan_placeholders(body, [](std::string_view) {}, [&](std::string_view n) { out.emplace(n); });
        return out;
    }
};

inline PromptTemplate builtin_template(TemplateName n) {
    switch (n) {
    case TemplateName::persona_extraction: return {n, std::string(prompts::kPersonaExtraction)};
    case TemplateName::unstructured_extraction: return {n, std::string(prompts::kUnstructuredExtraction)};
    case TemplateName::few_shot_chat: return {n, std::string(prompts::kFewShotChat)};
    }
    throw ConfigError("unknown template");
}

/// Loads `<dir>/<name>.txt` if present, else the built-in body.
inline PromptTemplate load_template(TemplateName n, const std::string& dir) {
    if (dir.empty()) return builtin_template(n);
    const auto path = std::filesystem::path(dir) / (std::string(to_string(n)) + ".txt");
    if (!std::filesystem::exists(path)) return builtin_template(n);
    std::string body = read_file(path.string());
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    return {n, std::move(body)};
}

/// Single-pass substitution; bound values are never rescanned.
inline std::string render(const PromptTemplate& tpl, const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(tpl.body.size());
    detail::scan_placeholders(
        tpl.body, [&](std::string_view t) { out.append(t); },
        [&](std::string_view n) {
            auto it = bindings.find(std::string(n));
            if (it == bindings.end()) throw TemplateError(std::string(n));
            out.append(it->second);
        });
    return out;
}

/// Example block for few_shot_chat; empty list yields an empty string (zero-shot).
inline std::string format_examples(const std::vector<std::string>& examples) {
    if (examples.empty()) return {};
    std::string out = "\nExample replies from this character:\n";
    for (std::size_t i = 0; i < examples.size(); ++i) {
        out += std::to_string(i + 1) + ". " + examples[i] + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Configuration

enum class BackendKind { remote, mock };

struct RetryPolicy {
    int max_attempts = 3;
    int backoff_base_ms = 500;
};

/// Mock rule: when `marker` occurs in the transcript, dimension `key` gets `value`.
struct MockRule {
    std::string marker;
    std::string key;
    std::string value;
};

/// Mock rule: when `marker` occurs, the first attempt returns `reply` verbatim.
struct MockRawReply {
    std::string marker;
    std::string reply;
};

struct MockConfig {
    std::vector<MockRule> rules;
    std::vector<MockRawReply> raw_replies;
    std::string text_reply = "The reply follows from the context; the character is warm and informal.";
    std::vector<std::string> keys = default_schema().keys();
};

inline MockConfig mock_config_from_json(const nlohmann::json& j) {
    MockConfig m;
    for (const auto& r : j.value("rules", nlohmann::json::array())) {
        m.rules.push_back({r.at("marker").get<std::string>(), r.at("key").get<std::string>(),
                           r.at("value").get<std::string>()});
    }
    for (const auto& r : j.value("raw_replies", nlohmann::json::array())) {
        m.raw_replies.push_back({r.at("marker").get<std::string>(), r.at("reply").get<std::string>()});
    }
    if (j.contains("text_reply")) m.text_reply = j.at("text_reply").get<std::string>();
    if (j.contains("keys")) m.keys = j.at("keys").get<std::vector<std::string>>();
    return m;
}

struct BackendConfig {
    BackendKind kind = BackendKind::mock;
    std::string endpoint;
    std::string model;
    std::string token_env = "VVAE_API_TOKEN";
    int max_concurrent = 4;
    RetryPolicy retry;
    std::string cache_dir;
    MockConfig mock;

    void validate() const {
        if (kind == BackendKind::remote && (endpoint.empty() || model.empty())) {
            throw ConfigError("remote backend requires endpoint and model");
        }
        if (max_concurrent <= 0) throw ConfigError("max_concurrent must be positive");
        if (retry.max_attempts <= 0) throw ConfigError("retry max_attempts must be positive");
        if (retry.backoff_base_ms < 0) throw ConfigError("retry backoff must be >= 0");
    }

    std::string model_name() const { return kind == BackendKind::mock ? "mock" : model; }
};

// ---------------------------------------------------------------------------
// Backends

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string complete(const ChatRequest& req) = 0;
};

/// Pure function of the request: scans the transcript sections of the prompt
/// for seeded markers. Requests asking for a JSON object get one JSON field
/// per schema key ("none" unless a rule fired); anything else gets text_reply.
class MockBackend final : public Backend {
public:
    explicit MockBackend(MockConfig cfg) : cfg_(std::move(cfg)) {}

    std::string complete(const ChatRequest& req) override {
        req.validate();
        const std::string transcript = text::to_lower_ascii(transcript_of(req.messages.front().content));
        if (req.messages.size() == 1) {
            for (const auto& r : cfg_.raw_replies) {
                if (transcript.find(text::to_lower_ascii(r.marker)) != std::string::npos) return r.reply;
            }
        }
        if (req.system.find("JSON object") == std::string::npos) return cfg_.text_reply;
        nlohmann::ordered_json j;
        for (const auto& k : cfg_.keys) j[k] = "none";
        std::set<std::string> fired;
        for (const auto& r : cfg_.rules) {
            if (fired.count(r.key)) continue;
            if (transcript.find(text::to_lower_ascii(r.marker)) != std::string::npos) {
                j[r.key] = r.value;
                fired.insert(r.key);
            }
        }
        return dump_line(j);
    }

    /// Concatenated <context>/<response> sections, or the whole prompt when it has none.
    static std::string transcript_of(std::string_view prompt) {
        std::string out;
        for (std::string_view tag : {"context", "response"}) {
            const std::string open = "<" + std::string(tag) + ">";
            const std::string close = "</" + std::string(tag) + ">";
            std::size_t pos = 0;
            while ((pos = prompt.find(open, pos)) != std::string_view::npos) {
                const std::size_t start = pos + open.size();
                const std::size_t end = prompt.find(close, start);
                if (end == std::string_view::npos) break;
                out.append(prompt.substr(start, end - start));
                out.push_back('\n');
                pos = end + close.size();
            }
        }
        return out.empty() ? std::string(prompt) : out;
    }

private:
    MockConfig cfg_;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// One HTTP POST. Throws TransportError when no response was received.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const std::string& url, const std::string& body,
                              const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

/// Serialized OpenAI-style chat-completion request body.
inline nlohmann::ordered_json wire_request(const ChatRequest& req, const std::string& model) {
    nlohmann::ordered_json j;
    j["model"] = model;
    nlohmann::ordered_json msgs = nlohmann::ordered_json::array();
    if (!req.system.empty()) msgs.push_back({{"role", "system"}, {"content", req.system}});
    for (const auto& m : req.messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    j["messages"] = std::move(msgs);
    j["temperature"] = req.temperature;
    j["max_tokens"] = req.max_tokens;
    return j;
}

class RemoteBackend final : public Backend {
public:
    RemoteBackend(BackendConfig cfg, std::shared_ptr<Transport> transport)
        : cfg_(std::move(cfg)), transport_(std::move(transport)), gate_(cfg_.max_concurrent) {
        cfg_.validate();
        if (!transport_) throw ConfigError("remote backend needs a transport");
    }

    std::string complete(const ChatRequest& req) override {
        req.validate();
        const std::string body = dump_line(wire_request(req, cfg_.model));
        std::vector<std::pair<std::string, std::string>> headers{{"Content-Type", "application/json"}};
        if (const char* tok = std::getenv(cfg_.token_env.c_str()); tok != nullptr && *tok != '\0') {
            headers.emplace_back("Authorization", std::string("Bearer ") + tok);
        }
        std::optional<ApiError> last_api;
        std::string last_transport;
        for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
            if (attempt > 1 && cfg_.retry.backoff_base_ms > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.retry.backoff_base_ms << (attempt - 2)));
            }
            HttpResponse resp;
            try {
                gate_.acquire();
                struct Release {
                    std::counting_semaphore<>& g;
                    ~Release() { g.release(); }
                } release{gate_};
                resp = transport_->post(cfg_.endpoint, body, headers);
            } catch (const TransportError& e) {
                last_transport = e.what();
                last_api.reset();
                continue;
            }
            if (resp.status >= 200 && resp.status < 300) return parse_reply(resp);
            if (resp.status == 429 || resp.status >= 500) {
                last_api.emplace(resp.status, resp.body);
                continue;
            }
            throw ApiError(resp.status, resp.body);
        }
        if (last_api) throw *last_api;
        throw TransportError("request failed after " + std::to_string(cfg_.retry.max_attempts) +
                             " attempts: " + last_transport);
    }

private:
    static std::string parse_reply(const HttpResponse& resp) {
        try {
            auto j = nlohmann::json::parse(resp.body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw ApiError(resp.status, "unparseable completion body: " + resp.body);
        }
    }

    BackendConfig cfg_;
    std::shared_ptr<Transport> transport_;
    std::counting_semaphore<> gate_;
};

// ---------------------------------------------------------------------------
// Client with on-disk cache

/// Canonical serialization that keys the cache: model plus every request field.
inline std::string request_key(const ChatRequest& req, const std::string& model) {
    return sha256_hex(dump_line(wire_request(req, model)));
}

class LlmClient {
public:
    /// `transport` is required for remote backends; see make_http_transport().
    explicit LlmClient(BackendConfig cfg, std::shared_ptr<Transport> transport = nullptr) : cfg_(std::move(cfg)) {
        cfg_.validate();
        if (cfg_.kind == BackendKind::mock) {
            backend_ = std::make_unique<MockBackend>(cfg_.mock);
        } else {
            backend_ = std::make_unique<RemoteBackend>(cfg_, std::move(transport));
        }
    }

    /// Use a caller-supplied backend (tests, custom providers).
    LlmClient(BackendConfig cfg, std::unique_ptr<Backend> backend) : cfg_(std::move(cfg)), backend_(std::move(backend)) {
        cfg_.validate();
    }

    std::string complete(const ChatRequest& req) {
        req.validate();
        const std::string key = request_key(req, cfg_.model_name());
        if (!cfg_.cache_dir.empty()) {
            try {
                if (auto hit = cache_read(key)) {
                    ++cache_hits_;
                    return *hit;
                }
            } catch (const CacheError& e) {
                ++cache_errors_;
                std::cerr << "warning: " << e.what() << "; refetching\n";
            }
        }
        ++backend_calls_;
        std::string reply = backend_->complete(req);
        if (!cfg_.cache_dir.empty()) cache_write(key, reply);
        return reply;
    }

    const BackendConfig& config() const noexcept { return cfg_; }
    std::size_t cache_hits() const noexcept { return cache_hits_; }
    std::size_t cache_errors() const noexcept { return cache_errors_; }
    std::size_t backend_calls() const noexcept { return backend_calls_; }

    std::string cache_path(const std::string& key) const {
        return (std::filesystem::path(cfg_.cache_dir) / (key + ".json")).string();
    }

private:
    std::optional<std::string> cache_read(const std::string& key) const {
        const std::string path = cache_path(key);
        if (!std::filesystem::exists(path)) return std::nullopt;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(path));
        } catch (const std::exception&) {
            throw CacheError("corrupt cache entry " + path);
        }
        if (!j.is_object() || j.value("key", "") != key || !j.contains("response") || !j["response"].is_string()) {
            throw CacheError("corrupt cache entry " + path);
        }
        return j["response"].get<std::string>();
    }

    void cache_write(const std::string& key, const std::string& reply) const {
        nlohmann::ordered_json j;
        j["key"] = key;
        j["model"] = cfg_.model_name();
        j["response"] = reply;
        write_file_atomic(cache_path(key), dump_line(j) + "\n");
    }

    BackendConfig cfg_;
    std::unique_ptr<Backend> backend_;
    std::atomic<std::size_t> cache_hits_{0};
    std::atomic<std::size_t> cache_errors_{0};
    std::atomic<std::size_t> backend_calls_{0};
};

} // namespace vvae

#endif // VVAE_LLM_CLIENT_HPP
