#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace tgrag {

using Embedding = Eigen::VectorXd;

struct ChatRequest {
    std::string system_prompt;
    std::string user_prompt;
    int max_tokens = 1024;
    double temperature = 0.0;
    /// Free-form tag echoed in provider errors (e.g. a chunk id).
    std::string request_id;

    /// Throws PreconditionError unless max_tokens > 0 and temperature >= 0.
    void validate() const;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    /// Never returns an empty string: empty completions raise EmptyResponseError,
    /// transport failures raise ProviderError.
    virtual std::string chat(const ChatRequest& req) = 0;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dim() const = 0;
    /// Identity used for cache keys; two providers with the same name must embed identically.
    virtual std::string model_name() const = 0;
    /// One vector of length dim() per input. Throws PreconditionError naming the
    /// index of the first empty text.
    virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) = 0;

    Embedding embed_one(const std::string& text) { return embed({text}).front(); }
};

/// Throws PreconditionError if any text is empty.
void check_embed_inputs(const std::vector<std::string>& texts);

/// Caps the number of concurrent outbound requests.
class InflightLimiter {
public:
    explicit InflightLimiter(std::ptrdiff_t limit) : sem_(std::max<std::ptrdiff_t>(1, std::min<std::ptrdiff_t>(limit, kMax))) {}
    void acquire() { sem_.acquire(); }
    void release() { sem_.release(); }

    static constexpr std::ptrdiff_t kMax = 256;

private:
    std::counting_semaphore<kMax> sem_;
};

// --- mocks -------------------------------------------------------------------

/// Scripted chat model. Rules are tried in declaration order against
/// "<system>\n\n<user>"; the first match answers.
class MockChatProvider final : public ChatProvider {
public:
    enum class Mode { Strict, Lenient };
    using Responder = std::function<std::string(const ChatRequest&)>;

    static constexpr std::string_view kSentinel = "MOCK-RESPONSE";

    explicit MockChatProvider(Mode mode = Mode::Strict) : mode_(mode) {}

    /// ECMAScript regex, matched with regex_search.
    MockChatProvider& on_regex(const std::string& pattern, std::string response);
    MockChatProvider& on_regex(const std::string& pattern, Responder responder);
    MockChatProvider& on_substring(std::string needle, std::string response);
    MockChatProvider& on_substring(std::string needle, Responder responder);

    /// Loads `[{"match": "substring"|"regex", "pattern": ..., "response": ...}, ...]`,
    /// optionally wrapped as `{"mode": "strict"|"lenient", "rules": [...]}`.
    static std::shared_ptr<MockChatProvider> from_script_file(const std::filesystem::path& path);

    std::string chat(const ChatRequest& req) override;

    std::size_t calls() const;
    std::vector<ChatRequest> requests() const;

private:
    struct Rule {
        std::string pattern;
        std::optional<std::regex> re;
        Responder respond;
    };

    Mode mode_;
    std::vector<Rule> rules_;
    mutable std::mutex mu_;
    std::vector<ChatRequest> log_;
};

/// Deterministic embedder: a seeded hash seeds a Gaussian draw that is then
/// L2-normalized. WholeText hashes the full string; BagOfTokens sums one such
/// draw per lower-cased token, so lexical overlap raises cosine similarity.
class HashEmbedder final : public EmbeddingProvider {
public:
    enum class Mode { WholeText, BagOfTokens };

    explicit HashEmbedder(std::size_t dim = 64, std::uint64_t seed = 0, Mode mode = Mode::WholeText);

    std::size_t dim() const override { return dim_; }
    std::string model_name() const override;
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    Embedding gaussian(std::string_view key) const;

    std::size_t dim_;
    std::uint64_t seed_;
    Mode mode_;
    std::atomic<std::size_t> calls_{0};
};

/// Fixed text→vector table for fixtures whose rankings must be provable.
/// Unknown texts fall back to a WholeText HashEmbedder of the same dimension.
class TableEmbedder final : public EmbeddingProvider {
public:
    explicit TableEmbedder(std::size_t dim) : dim_(dim), fallback_(dim) {}
    TableEmbedder& set(std::string text, Embedding v);

    std::size_t dim() const override { return dim_; }
    std::string model_name() const override { return "table-d" + std::to_string(dim_); }
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;

private:
    std::size_t dim_;
    std::map<std::string, Embedding, std::less<>> table_;
    HashEmbedder fallback_;
};

// --- live providers ----------------------------------------------------------

struct ProviderConfig {
    std::string endpoint;  ///< base URL, e.g. http://localhost:8000/v1
    std::string model_name;
    std::string api_key;
    std::chrono::milliseconds timeout{60000};
    int max_retries = 2;
    std::chrono::milliseconds retry_backoff{200};

    /// Reads TGRAG_LLM_* (chat) or TGRAG_EMBED_* (embedding) plus TGRAG_API_KEY.
    static ProviderConfig from_env(bool embedding);
};

/// OpenAI-compatible /chat/completions client.
class OpenAIChatProvider final : public ChatProvider {
public:
    OpenAIChatProvider(ProviderConfig cfg, std::shared_ptr<InflightLimiter> limiter);
    std::string chat(const ChatRequest& req) override;
    std::size_t attempts() const noexcept { return attempts_.load(); }

private:
    ProviderConfig cfg_;
    std::shared_ptr<InflightLimiter> limiter_;
    std::atomic<std::size_t> attempts_{0};
};

/// OpenAI-compatible /embeddings client. `dim` is the declared dimension; a
/// response of any other width is a protocol error.
class OpenAIEmbeddingProvider final : public EmbeddingProvider {
public:
    OpenAIEmbeddingProvider(ProviderConfig cfg, std::size_t dim, std::shared_ptr<InflightLimiter> limiter);
    std::size_t dim() const override { return dim_; }
    std::string model_name() const override { return cfg_.model_name; }
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
    std::size_t attempts() const noexcept { return attempts_.load(); }

private:
    ProviderConfig cfg_;
    std::size_t dim_;
    std::shared_ptr<InflightLimiter> limiter_;
    std::atomic<std::size_t> attempts_{0};
};

/// On-disk cache keyed by (model_name, sha256(text)), stored under
/// `<dir>/<sha256(model_name)[0:16]>/<sha256(text)>.f64` as little-endian doubles.
class CachedEmbeddingProvider final : public EmbeddingProvider {
public:
    CachedEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner, std::filesystem::path dir);

    std::size_t dim() const override { return inner_->dim(); }
    std::string model_name() const override { return inner_->model_name(); }
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;

    std::size_t hits() const noexcept { return hits_.load(); }
    std::size_t misses() const noexcept { return misses_.load(); }

private:
    std::filesystem::path entry_path(const std::string& text) const;

    std::shared_ptr<EmbeddingProvider> inner_;
    std::filesystem::path dir_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> misses_{0};
};

}  // namespace tgrag
