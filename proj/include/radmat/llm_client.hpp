#pragma once

// Chat-completion client for OpenAI-compatible HTTP endpoints (Ollama,
// llama.cpp server, vLLM, ...). Plain HTTP only.

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "radmat/kv.hpp"
#include "radmat/reasoner.hpp"

namespace radmat {

struct EndpointConfig {
    std::string base_url;   // e.g. http://localhost:11434
    std::string model = "deepseek-r1:14b";
    std::string api_key;    // never logged
    double timeout_s = 120.0;
    int retries = 2;
    double backoff_s = 1.0; // first retry delay, doubled each time
    double temperature = 0.0;

    bool configured() const { return !base_url.empty(); }
};

/// Applies `key = value` fields from a file record: base_url, model, api_key,
/// timeout_s, retries, backoff_s, temperature.
inline EndpointConfig apply_record(EndpointConfig cfg, const KvRecord& r) {
    cfg.base_url = r.get_or("base_url", cfg.base_url);
    cfg.model = r.get_or("model", cfg.model);
    cfg.api_key = r.get_or("api_key", cfg.api_key);
    cfg.timeout_s = r.get_double_or("timeout_s", cfg.timeout_s);
    if (r.has("retries")) cfg.retries = static_cast<int>(r.get_int("retries"));
    cfg.backoff_s = r.get_double_or("backoff_s", cfg.backoff_s);
    cfg.temperature = r.get_double_or("temperature", cfg.temperature);
    return cfg;
}

inline constexpr const char* kEnvUrl = "RADMAT_LLM_URL";
inline constexpr const char* kEnvModel = "RADMAT_LLM_MODEL";
inline constexpr const char* kEnvApiKey = "RADMAT_LLM_API_KEY";
inline constexpr const char* kEnvTimeout = "RADMAT_LLM_TIMEOUT";
inline constexpr const char* kEnvRetries = "RADMAT_LLM_RETRIES";

inline EndpointConfig apply_environment(EndpointConfig cfg) {
    if (const char* v = std::getenv(kEnvUrl); v && *v) cfg.base_url = v;
    if (const char* v = std::getenv(kEnvModel); v && *v) cfg.model = v;
    if (const char* v = std::getenv(kEnvApiKey); v && *v) cfg.api_key = v;
    if (const char* v = std::getenv(kEnvTimeout); v && *v) {
        const auto t = parse_double(v);
        if (!t || !(*t > 0.0)) throw Error(ErrorKind::InvalidConfig, std::string(kEnvTimeout) + " must be a positive number");
        cfg.timeout_s = *t;
    }
    if (const char* v = std::getenv(kEnvRetries); v && *v) {
        KvRecord r;
        r.set("retries", std::string(v));
        const long long n = r.get_int("retries");
        if (n < 0) throw Error(ErrorKind::InvalidConfig, std::string(kEnvRetries) + " must be non-negative");
        cfg.retries = static_cast<int>(n);
    }
    return cfg;
}

struct ParsedUrl {
    std::string host;
    int port = 80;
    std::string path; // request path for chat completions
};

inline ParsedUrl parse_endpoint_url(const std::string& url) {
    constexpr std::string_view kScheme = "http://";
    if (url.rfind("https://", 0) == 0)
        throw Error(ErrorKind::InvalidConfig, "https endpoints are not supported; use a local http endpoint or proxy");
    if (url.rfind(kScheme, 0) != 0) throw Error(ErrorKind::InvalidConfig, "endpoint URL must start with http://");
    std::string rest = url.substr(kScheme.size());
    const auto slash = rest.find('/');
    std::string authority = rest.substr(0, slash);
    std::string prefix = slash == std::string::npos ? "" : rest.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    ParsedUrl out;
    const auto colon = authority.rfind(':');
    if (colon != std::string::npos) {
        out.host = authority.substr(0, colon);
        const std::string port = authority.substr(colon + 1);
        const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), out.port);
        if (ec != std::errc{} || ptr != port.data() + port.size() || out.port < 1 || out.port > 65535)
            throw Error(ErrorKind::InvalidConfig, "bad port in endpoint URL");
    } else {
        out.host = authority;
    }
    if (out.host.empty()) throw Error(ErrorKind::InvalidConfig, "endpoint URL has no host");

    constexpr std::string_view kTail = "/chat/completions";
    if (prefix.size() >= kTail.size() && prefix.compare(prefix.size() - kTail.size(), kTail.size(), kTail) == 0)
        out.path = prefix;
    else if (prefix.size() >= 3 && prefix.compare(prefix.size() - 3, 3, "/v1") == 0)
        out.path = prefix + std::string(kTail);
    else
        out.path = prefix + "/v1" + std::string(kTail);
    return out;
}

inline std::string chat_request_body(const Prompt& prompt, const EndpointConfig& cfg) {
    nlohmann::json body = {
        {"model", cfg.model},
        {"stream", false},
        {"temperature", cfg.temperature},
        {"messages", nlohmann::json::array({{{"role", "system"}, {"content", prompt.system_text}},
                                            {{"role", "user"}, {"content", prompt.user_text()}}})},
    };
    return body.dump();
}

/// Content of the first choice; also accepts Ollama's native /api/chat shape.
inline std::string chat_response_text(const std::string& body) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::EndpointError, "response is not JSON");
    if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
        const auto& c = j["choices"][0];
        if (c.contains("message") && c["message"].contains("content") && c["message"]["content"].is_string())
            return c["message"]["content"].get<std::string>();
        if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
    }
    if (j.contains("message") && j["message"].contains("content") && j["message"]["content"].is_string())
        return j["message"]["content"].get<std::string>();
    throw Error(ErrorKind::EndpointError, "response has no completion text");
}

/// One client per endpoint; requests through it are serialized.
class HttpChatClient final : public ChatClient {
public:
    explicit HttpChatClient(EndpointConfig cfg) : cfg_(std::move(cfg)), url_(parse_endpoint_url(cfg_.base_url)) {
        if (cfg_.retries < 0) throw Error(ErrorKind::InvalidConfig, "retries must be non-negative");
        if (!(cfg_.timeout_s > 0.0)) throw Error(ErrorKind::InvalidConfig, "timeout must be positive");
    }

    const EndpointConfig& config() const { return cfg_; }

    std::string complete(const Prompt& prompt) override {
        std::lock_guard lock(mutex_);
        const auto body = chat_request_body(prompt, cfg_);
        const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
            std::chrono::duration<double>(cfg_.timeout_s));

        std::optional<std::string> last_status_error;
        std::string last_transport_error;
        double delay = cfg_.backoff_s;
        for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::duration<double>(delay));
                delay *= 2.0;
            }
            httplib::Client cli(url_.host, url_.port);
            cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                       static_cast<time_t>(timeout.count() % 1'000'000));
            cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                 static_cast<time_t>(timeout.count() % 1'000'000));
            cli.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                  static_cast<time_t>(timeout.count() % 1'000'000));
            httplib::Headers headers;
            if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

            auto res = cli.Post(url_.path, headers, body, "application/json");
            if (!res) {
                last_transport_error = httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 200 && res->status < 300) return chat_response_text(res->body);
            last_status_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
            const bool retryable = res->status >= 500 || res->status == 429 || res->status == 408;
            if (!retryable) break;
        }
        if (last_status_error) throw Error(ErrorKind::EndpointError, *last_status_error);
        throw Error(ErrorKind::EndpointUnreachable,
                    "cannot reach " + url_.host + ":" + std::to_string(url_.port) + " (" + last_transport_error + ")");
    }

private:
    EndpointConfig cfg_;
    ParsedUrl url_;
    std::mutex mutex_;
};

inline constexpr std::string_view kStubEndpoint = "stub://rules";

/// `stub://rules` selects the in-process rule stub; anything else is HTTP.
inline std::unique_ptr<ChatClient> make_chat_client(const EndpointConfig& cfg, const RuleTable& rules = {}) {
    if (cfg.base_url == kStubEndpoint) return std::make_unique<RuleStubClient>(rules);
    if (!cfg.configured())
        throw Error(ErrorKind::InvalidConfig, std::string("no model endpoint configured (set --llm-url or ") + kEnvUrl + ")");
    return std::make_unique<HttpChatClient>(cfg);
}

} // namespace radmat
