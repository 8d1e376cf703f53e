#include "tgrag/config.hpp"

#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "tgrag/json_io.hpp"

namespace tgrag {

namespace pt = boost::property_tree;

namespace {

struct Binding {
    const char* section;
    const char* key;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
};

std::size_t to_size(const std::string& v, const std::string& key) {
    std::size_t pos = 0;
    unsigned long long x = 0;
    try {
        if (!v.empty() && v.front() == '-') throw std::invalid_argument("negative");
        x = std::stoull(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected a non-negative integer, got \"" + v + "\"");
    return static_cast<std::size_t>(x);
}

int to_int(const std::string& v, const std::string& key) {
    std::size_t pos = 0;
    int x = 0;
    try {
        x = std::stoi(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected an integer, got \"" + v + "\"");
    return x;
}

double to_double(const std::string& v, const std::string& key) {
    std::size_t pos = 0;
    double x = 0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected a number, got \"" + v + "\"");
    return x;
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true or false, got \"" + v + "\"");
}

std::string join(const std::vector<std::string>& xs) {
    std::string out;
    for (const auto& x : xs) out += (out.empty() ? "" : ",") + x;
    return out;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    for (std::string item; std::getline(ss, item, ',');) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

std::vector<Binding> bindings(EngineConfig& c) {
    auto sz = [](std::size_t& f, const char* name) {
        return std::make_pair([&f] { return std::to_string(f); },
                              [&f, name](const std::string& v) { f = to_size(v, name); });
    };
    auto dbl = [](double& f, const char* name) {
        return std::make_pair([&f] { return fmt::format("{}", f); }, [&f, name](const std::string& v) { f = to_double(v, name); });
    };
    auto in = [](int& f, const char* name) {
        return std::make_pair([&f] { return std::to_string(f); }, [&f, name](const std::string& v) { f = to_int(v, name); });
    };
    auto bl = [](bool& f, const char* name) {
        return std::make_pair([&f] { return std::string(f ? "true" : "false"); },
                              [&f, name](const std::string& v) { f = to_bool(v, name); });
    };
    auto str = [](std::string& f) {
        return std::make_pair([&f] { return f; }, [&f](const std::string& v) { f = v; });
    };
    auto path = [](std::filesystem::path& f) {
        return std::make_pair([&f] { return f.string(); }, [&f](const std::string& v) { f = v; });
    };
    auto u64 = [](std::uint64_t& f, const char* name) {
        return std::make_pair([&f] { return std::to_string(f); },
                              [&f, name](const std::string& v) { f = static_cast<std::uint64_t>(to_size(v, name)); });
    };
    std::vector<Binding> b;
    auto add = [&](const char* section, const char* key, auto gs) { b.push_back({section, key, gs.first, gs.second}); };
    ProviderSettings& p = c.provider;
    add("paths", "corpus_root", path(c.corpus_root));
    add("paths", "workdir", path(c.workdir));
    add("chunking", "retrieval_size", sz(c.chunk_size_retrieval, "chunking.retrieval_size"));
    add("chunking", "dataset_size", sz(c.chunk_size_dataset, "chunking.dataset_size"));
    add("chunking", "overlap", sz(c.chunk_overlap, "chunking.overlap"));
    add("retrieval", "n", sz(c.n, "retrieval.n"));
    add("retrieval", "k", sz(c.k, "retrieval.k"));
    add("retrieval", "t", sz(c.t, "retrieval.t"));
    add("retrieval", "graph_token_budget", sz(c.graph_token_budget, "retrieval.graph_token_budget"));
    add("indexing", "node_embedding", str(c.node_embedding));
    add("decomposition", "max_subqueries", sz(c.max_subqueries, "decomposition.max_subqueries"));
    add("decomposition", "fallback", bl(c.decomposition_fallback, "decomposition.fallback"));
    add("decomposition", "prompt", path(c.decomposition_prompt));
    add("generation", "short_circuit", bl(c.short_circuit, "generation.short_circuit"));
    add("generation", "max_tokens", in(c.max_tokens, "generation.max_tokens"));
    add("dataset", "tek_threshold", dbl(c.tek_threshold, "dataset.tek_threshold"));
    b.push_back({"extraction", "entity_types", [&c] { return join(c.entity_types); },
                 [&c](const std::string& v) { c.entity_types = split_list(v); }});
    add("runtime", "workers", sz(c.workers, "runtime.workers"));
    add("providers", "kind", str(p.kind));
    add("providers", "mock_script", path(p.mock_script));
    add("providers", "embedder", str(p.embedder));
    add("providers", "embed_dim", sz(p.embed_dim, "providers.embed_dim"));
    add("providers", "embed_seed", u64(p.embed_seed, "providers.embed_seed"));
    add("providers", "chat_endpoint", str(p.chat_endpoint));
    add("providers", "chat_model", str(p.chat_model));
    add("providers", "embed_endpoint", str(p.embed_endpoint));
    add("providers", "embed_model", str(p.embed_model));
    add("providers", "inflight_limit", sz(p.inflight_limit, "providers.inflight_limit"));
    add("providers", "timeout_seconds", in(p.timeout_seconds, "providers.timeout_seconds"));
    add("providers", "max_retries", in(p.max_retries, "providers.max_retries"));
    add("providers", "temperature", dbl(p.temperature, "providers.temperature"));
    add("providers", "answer_temperature", dbl(p.answer_temperature, "providers.answer_temperature"));
    add("providers", "judge_temperature", dbl(p.judge_temperature, "providers.judge_temperature"));
    add("providers", "embed_cache", bl(p.embed_cache, "providers.embed_cache"));
    return b;
}

}  // namespace

RetrievalConfig EngineConfig::retrieval() const { return RetrievalConfig{n, k, t, graph_token_budget}; }

AnswerOptions EngineConfig::answer_options() const {
    AnswerOptions o;
    o.retrieval = retrieval();
    o.decomposition.max_subqueries = max_subqueries;
    o.decomposition.fallback_to_single = decomposition_fallback;
    if (!decomposition_prompt.empty()) o.decomposition.prompt_path = decomposition_prompt;
    o.decomposition.temperature = provider.temperature;
    o.generation.max_tokens = max_tokens;
    o.generation.temperature = provider.answer_temperature;
    o.generation.short_circuit = short_circuit;
    o.workers = workers;
    return o;
}

void EngineConfig::validate() const {
    retrieval().validate();
    if (chunk_size_retrieval == 0 || chunk_size_dataset == 0) throw ConfigError("chunk sizes must be positive");
    if (chunk_overlap >= chunk_size_retrieval || chunk_overlap >= chunk_size_dataset)
        throw ConfigError("chunk overlap must be smaller than both chunk sizes");
    if (max_subqueries == 0) throw ConfigError("decomposition.max_subqueries must be at least 1");
    if (max_tokens <= 0) throw ConfigError("generation.max_tokens must be positive");
    if (node_embedding != "mean" && node_embedding != "concat") throw ConfigError("indexing.node_embedding must be mean or concat");
    if (workers == 0) throw ConfigError("runtime.workers must be at least 1");
    if (provider.kind != "mock" && provider.kind != "openai") throw ConfigError("providers.kind must be mock or openai");
    if (provider.embedder != "hash" && provider.embedder != "hash-text" && provider.embedder != "openai")
        throw ConfigError("providers.embedder must be hash, hash-text or openai");
    if (provider.embed_dim == 0) throw ConfigError("providers.embed_dim must be positive");
    if (provider.inflight_limit == 0) throw ConfigError("providers.inflight_limit must be at least 1");
    if (provider.temperature < 0 || provider.answer_temperature < 0 || provider.judge_temperature < 0) throw ConfigError("temperatures must be non-negative");
    if (provider.max_retries < 0 || provider.timeout_seconds <= 0) throw ConfigError("invalid retry or timeout setting");
}

std::string EngineConfig::to_ini() const {
    pt::ptree tree;
    for (const auto& b : bindings(const_cast<EngineConfig&>(*this))) {
        tree.put(pt::ptree::path_type(std::string(b.section) + "/" + b.key, '/'), b.get());
    }
    std::ostringstream os;
    pt::write_ini(os, tree);
    return os.str();
}

void EngineConfig::apply_ini(const std::string& text, const std::string& origin) {
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    auto bs = bindings(*this);
    for (const auto& [section, keys] : tree) {
        if (keys.empty() && !keys.data().empty()) throw ConfigError(origin + ": key \"" + section + "\" outside a section");
        for (const auto& [key, value] : keys) {
            auto it = std::find_if(bs.begin(), bs.end(), [&](const Binding& b) { return section == b.section && key == b.key; });
            if (it == bs.end()) throw ConfigError(origin + ": unknown setting " + section + "." + key);
            it->set(value.data());
        }
    }
}

void EngineConfig::apply_ini_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    apply_ini(read_file(path), path.string());
}

std::shared_ptr<ChatProvider> make_chat_provider(const EngineConfig& cfg, std::shared_ptr<InflightLimiter> limiter) {
    const auto& p = cfg.provider;
    if (p.kind == "mock") {
        if (p.mock_script.empty()) return std::make_shared<MockChatProvider>(MockChatProvider::Mode::Lenient);
        if (!std::filesystem::exists(p.mock_script)) throw ConfigError("mock script not found: " + p.mock_script.string());
        return MockChatProvider::from_script_file(p.mock_script);
    }
    ProviderConfig pc = ProviderConfig::from_env(false);
    if (!p.chat_endpoint.empty()) pc.endpoint = p.chat_endpoint;
    if (!p.chat_model.empty()) pc.model_name = p.chat_model;
    pc.timeout = std::chrono::seconds(p.timeout_seconds);
    pc.max_retries = p.max_retries;
    if (pc.endpoint.empty()) throw ConfigError("no chat endpoint: set providers.chat_endpoint or TGRAG_LLM_ENDPOINT");
    return std::make_shared<OpenAIChatProvider>(std::move(pc), std::move(limiter));
}

std::shared_ptr<EmbeddingProvider> make_embedding_provider(const EngineConfig& cfg, std::shared_ptr<InflightLimiter> limiter) {
    const auto& p = cfg.provider;
    std::shared_ptr<EmbeddingProvider> inner;
    if (p.embedder == "hash") {
        inner = std::make_shared<HashEmbedder>(p.embed_dim, p.embed_seed, HashEmbedder::Mode::BagOfTokens);
    } else if (p.embedder == "hash-text") {
        inner = std::make_shared<HashEmbedder>(p.embed_dim, p.embed_seed, HashEmbedder::Mode::WholeText);
    } else {
        ProviderConfig pc = ProviderConfig::from_env(true);
        if (!p.embed_endpoint.empty()) pc.endpoint = p.embed_endpoint;
        if (!p.embed_model.empty()) pc.model_name = p.embed_model;
        pc.timeout = std::chrono::seconds(p.timeout_seconds);
        pc.max_retries = p.max_retries;
        if (pc.endpoint.empty()) throw ConfigError("no embedding endpoint: set providers.embed_endpoint or TGRAG_EMBED_ENDPOINT");
        inner = std::make_shared<OpenAIEmbeddingProvider>(std::move(pc), p.embed_dim, std::move(limiter));
    }
    if (!p.embed_cache) return inner;
    return std::make_shared<CachedEmbeddingProvider>(std::move(inner), cfg.workdir / "cache" / "embeddings");
}

}  // namespace tgrag
