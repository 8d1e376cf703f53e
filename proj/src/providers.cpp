#include "tgrag/providers.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>

#include "tgrag/errors.hpp"
#include "tgrag/hashing.hpp"
#include "tgrag/json_io.hpp"
#include "tgrag/tokenizer.hpp"

namespace tgrag {

void ChatRequest::validate() const {
    if (max_tokens <= 0) throw PreconditionError("chat request max_tokens must be positive");
    if (!(temperature >= 0.0)) throw PreconditionError("chat request temperature must be non-negative");
}

void check_embed_inputs(const std::vector<std::string>& texts) {
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) throw PreconditionError("empty text at index " + std::to_string(i) + " in embedding batch");
    }
}

// --- MockChatProvider --------------------------------------------------------

MockChatProvider& MockChatProvider::on_regex(const std::string& pattern, std::string response) {
    return on_regex(pattern, [r = std::move(response)](const ChatRequest&) { return r; });
}

MockChatProvider& MockChatProvider::on_regex(const std::string& pattern, Responder responder) {
    std::lock_guard lock(mu_);
    rules_.push_back({pattern, std::regex(pattern, std::regex::ECMAScript), std::move(responder)});
    return *this;
}

MockChatProvider& MockChatProvider::on_substring(std::string needle, std::string response) {
    return on_substring(std::move(needle), [r = std::move(response)](const ChatRequest&) { return r; });
}

MockChatProvider& MockChatProvider::on_substring(std::string needle, Responder responder) {
    std::lock_guard lock(mu_);
    rules_.push_back({std::move(needle), std::nullopt, std::move(responder)});
    return *this;
}

std::shared_ptr<MockChatProvider> MockChatProvider::from_script_file(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("mock script " + path.string() + " is not valid JSON: " + e.what());
    }
    Mode mode = Mode::Strict;
    json rules = doc;
    if (doc.is_object()) {
        if (doc.value("mode", "strict") == "lenient") mode = Mode::Lenient;
        rules = doc.value("rules", json::array());
    }
    if (!rules.is_array()) throw ConfigError("mock script " + path.string() + " must hold a rule array");

    auto mock = std::make_shared<MockChatProvider>(mode);
    for (const auto& r : rules) {
        const auto match = r.value("match", "substring");
        const auto pattern = r.at("pattern").get<std::string>();
        const auto response = r.at("response").get<std::string>();
        if (match == "regex") {
            mock->on_regex(pattern, response);
        } else if (match == "substring") {
            mock->on_substring(pattern, response);
        } else {
            throw ConfigError("unknown match kind '" + match + "' in " + path.string());
        }
    }
    return mock;
}

std::string MockChatProvider::chat(const ChatRequest& req) {
    req.validate();
    const std::string full = req.system_prompt + "\n\n" + req.user_prompt;
    Responder responder;
    {
        std::lock_guard lock(mu_);
        log_.push_back(req);
        for (const auto& rule : rules_) {
            const bool hit = rule.re ? std::regex_search(full, *rule.re) : full.find(rule.pattern) != std::string::npos;
            if (hit) {
                responder = rule.respond;
                break;
            }
        }
    }
    std::string out;
    if (responder) {
        out = responder(req);
    } else if (mode_ == Mode::Lenient) {
        out = std::string(kSentinel);
    } else {
        throw ProviderError("mock: no scripted response matches prompt", req.request_id);
    }
    if (out.empty()) throw EmptyResponseError("mock: empty completion", req.request_id);
    return out;
}

std::size_t MockChatProvider::calls() const {
    std::lock_guard lock(mu_);
    return log_.size();
}

std::vector<ChatRequest> MockChatProvider::requests() const {
    std::lock_guard lock(mu_);
    return log_;
}

// --- HashEmbedder ------------------------------------------------------------

HashEmbedder::HashEmbedder(std::size_t dim, std::uint64_t seed, Mode mode) : dim_(dim), seed_(seed), mode_(mode) {
    if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
}

std::string HashEmbedder::model_name() const {
    return std::string(mode_ == Mode::WholeText ? "hash-text" : "hash-bow") + "-d" + std::to_string(dim_) + "-s" +
           std::to_string(seed_);
}

Embedding HashEmbedder::gaussian(std::string_view key) const {
    std::mt19937_64 rng(fnv1a64(key) ^ (seed_ * 0x9e3779b97f4a7c15ULL));
    auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53; };  // (0, 1]
    Embedding v(static_cast<Eigen::Index>(dim_));
    for (Eigen::Index i = 0; i < v.size(); i += 2) {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        v[i] = r * std::cos(theta);
        if (i + 1 < v.size()) v[i + 1] = r * std::sin(theta);
    }
    return v;
}

std::vector<Embedding> HashEmbedder::embed(const std::vector<std::string>& texts) {
    check_embed_inputs(texts);
    calls_.fetch_add(1);
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        Embedding v;
        if (mode_ == Mode::WholeText) {
            v = gaussian(text);
        } else {
            v = Embedding::Zero(static_cast<Eigen::Index>(dim_));
            for (const auto& span : default_tokenizer().tokenize(text)) {
                std::string tok = text.substr(span.begin, span.end - span.begin);
                for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                v += gaussian(tok);
            }
            if (v.norm() == 0.0) v = gaussian(text);
        }
        v.normalize();
        out.push_back(std::move(v));
    }
    return out;
}

// --- TableEmbedder -----------------------------------------------------------

TableEmbedder& TableEmbedder::set(std::string text, Embedding v) {
    if (static_cast<std::size_t>(v.size()) != dim_) throw PreconditionError("table embedding has wrong dimension");
    table_.insert_or_assign(std::move(text), std::move(v));
    return *this;
}

std::vector<Embedding> TableEmbedder::embed(const std::vector<std::string>& texts) {
    check_embed_inputs(texts);
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto it = table_.find(t);
        out.push_back(it != table_.end() ? it->second : fallback_.embed_one(t));
    }
    return out;
}

// --- ProviderConfig ----------------------------------------------------------

ProviderConfig ProviderConfig::from_env(bool embedding) {
    auto env = [](const char* name) -> std::string {
        const char* v = std::getenv(name);
        return v ? std::string(v) : std::string();
    };
    ProviderConfig cfg;
    cfg.endpoint = env(embedding ? "TGRAG_EMBED_ENDPOINT" : "TGRAG_LLM_ENDPOINT");
    cfg.model_name = env(embedding ? "TGRAG_EMBED_MODEL" : "TGRAG_LLM_MODEL");
    cfg.api_key = env("TGRAG_API_KEY");
    return cfg;
}

}  // namespace tgrag
