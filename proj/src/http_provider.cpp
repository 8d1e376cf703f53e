#include <regex>
#include <thread>

// Eigen must come before httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "tgrag/errors.hpp"
#include "tgrag/json_io.hpp"
#include "tgrag/providers.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace tgrag {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ConfigError("invalid provider endpoint URL: '" + url + "'");
    Endpoint ep{m[1].str(), m[2].str()};
    while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
    return ep;
}

std::string next_request_id() {
    static std::atomic<std::uint64_t> counter{0};
    return "req-" + std::to_string(counter.fetch_add(1) + 1);
}

/// POSTs `body` to `<endpoint><path>` with retry on transport failures, 429 and
/// 5xx responses. Returns the parsed JSON body of the first 200 response.
json post_with_retry(const ProviderConfig& cfg, InflightLimiter* limiter, std::atomic<std::size_t>& attempts,
                     const std::string& path, const json& body, const std::string& request_id) {
    const auto ep = split_endpoint(cfg.endpoint);
    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);
    const auto payload = body.dump();
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);

    std::string last_error = "no attempt made";
    const int total = std::max(0, cfg.max_retries) + 1;
    for (int attempt = 0; attempt < total; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(cfg.retry_backoff * (1 << std::min(attempt - 1, 6)));
        attempts.fetch_add(1);

        httplib::Client client(ep.origin);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        if (limiter) limiter->acquire();
        auto res = client.Post(ep.prefix + path, headers, payload, "application/json");
        if (limiter) limiter->release();

        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            spdlog::debug("{}: attempt {}/{} failed: {}", request_id, attempt + 1, total, last_error);
            continue;
        }
        if (res->status == 200) {
            try {
                return json::parse(res->body);
            } catch (const json::parse_error& e) {
                throw ProviderError("protocol error: response is not JSON: " + std::string(e.what()), request_id);
            }
        }
        last_error = "HTTP " + std::to_string(res->status);
        if (res->status != 429 && res->status < 500) {
            throw ProviderError(last_error + ": " + res->body.substr(0, 300), request_id);
        }
    }
    throw ProviderError("provider request failed after " + std::to_string(total) + " attempts: " + last_error,
                        request_id);
}

}  // namespace

// --- chat --------------------------------------------------------------------

OpenAIChatProvider::OpenAIChatProvider(ProviderConfig cfg, std::shared_ptr<InflightLimiter> limiter)
    : cfg_(std::move(cfg)), limiter_(std::move(limiter)) {
    split_endpoint(cfg_.endpoint);
    if (cfg_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

std::string OpenAIChatProvider::chat(const ChatRequest& req) {
    req.validate();
    const auto id = req.request_id.empty() ? next_request_id() : req.request_id;
    json messages = json::array();
    if (!req.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
    messages.push_back({{"role", "user"}, {"content", req.user_prompt}});
    const json body{{"model", cfg_.model_name},
                    {"messages", messages},
                    {"max_tokens", req.max_tokens},
                    {"temperature", req.temperature}};

    const auto resp = post_with_retry(cfg_, limiter_.get(), attempts_, "/chat/completions", body, id);
    std::string content;
    try {
        const auto& msg = resp.at("choices").at(0).at("message");
        if (msg.contains("content") && msg["content"].is_string()) content = msg["content"].get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError("protocol error: malformed chat response: " + std::string(e.what()), id);
    }
    if (content.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw EmptyResponseError("empty completion", id);
    }
    return content;
}

// --- embeddings --------------------------------------------------------------

OpenAIEmbeddingProvider::OpenAIEmbeddingProvider(ProviderConfig cfg, std::size_t dim,
                                                 std::shared_ptr<InflightLimiter> limiter)
    : cfg_(std::move(cfg)), dim_(dim), limiter_(std::move(limiter)) {
    split_endpoint(cfg_.endpoint);
    if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
}

std::vector<Embedding> OpenAIEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    check_embed_inputs(texts);
    if (texts.empty()) return {};
    const auto id = next_request_id();
    const json body{{"model", cfg_.model_name}, {"input", texts}};
    const auto resp = post_with_retry(cfg_, limiter_.get(), attempts_, "/embeddings", body, id);

    std::vector<Embedding> out(texts.size());
    std::vector<bool> seen(texts.size(), false);
    try {
        const auto& data = resp.at("data");
        if (data.size() != texts.size()) {
            throw ProviderError("protocol error: " + std::to_string(data.size()) + " embeddings for " +
                                    std::to_string(texts.size()) + " inputs",
                                id);
        }
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& item = data[i];
            const std::size_t pos = item.value("index", i);
            const auto values = item.at("embedding").get<std::vector<double>>();
            if (pos >= out.size() || seen[pos]) throw ProviderError("protocol error: bad embedding index", id);
            if (values.size() != dim_) {
                throw ProviderError("protocol error: embedding dimension " + std::to_string(values.size()) +
                                        " != declared " + std::to_string(dim_),
                                    id);
            }
            out[pos] = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
            if (!out[pos].allFinite()) throw ProviderError("protocol error: non-finite embedding value", id);
            seen[pos] = true;
        }
    } catch (const json::exception& e) {
        throw ProviderError("protocol error: malformed embedding response: " + std::string(e.what()), id);
    }
    return out;
}

}  // namespace tgrag
