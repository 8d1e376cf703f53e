#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tgrag/generate.hpp"
#include "tgrag/providers.hpp"
#include "tgrag/retriever.hpp"

namespace tgrag {

struct ProviderSettings {
    /// "mock" or "openai".
    std::string kind = "mock";
    /// Rules for the scripted chat mock; without one the mock answers leniently.
    std::filesystem::path mock_script;
    /// "hash" (bag of tokens), "hash-text" or "openai".
    std::string embedder = "hash";
    std::size_t embed_dim = 64;
    std::uint64_t embed_seed = 0;
    /// Empty values fall back to the TGRAG_* environment variables.
    std::string chat_endpoint;
    std::string chat_model;
    std::string embed_endpoint;
    std::string embed_model;
    std::size_t inflight_limit = 4;
    int timeout_seconds = 60;
    int max_retries = 2;
    /// Extraction, decomposition and dataset generation.
    double temperature = 0.0;
    /// Sub-answers and final synthesis.
    double answer_temperature = 0.2;
    double judge_temperature = 0.7;
    bool embed_cache = true;

    bool operator==(const ProviderSettings&) const = default;
};

struct EngineConfig {
    std::filesystem::path corpus_root;
    std::filesystem::path workdir = "tgrag-work";

    std::size_t chunk_size_retrieval = 1000;
    std::size_t chunk_size_dataset = 2000;
    std::size_t chunk_overlap = 0;

    std::size_t n = 30;
    std::size_t k = 15;
    std::size_t t = 5;
    std::size_t graph_token_budget = 1600;

    /// "mean" of knowledge vectors or "concat" (embed the joined knowledge text).
    std::string node_embedding = "mean";

    double tek_threshold = 0.75;

    std::size_t max_subqueries = 8;
    bool decomposition_fallback = false;
    std::filesystem::path decomposition_prompt;
    bool short_circuit = true;
    int max_tokens = 1024;

    std::vector<std::string> entity_types;
    std::size_t workers = 4;

    ProviderSettings provider;

    RetrievalConfig retrieval() const;
    AnswerOptions answer_options() const;
    /// Throws ConfigError on inconsistent values.
    void validate() const;

    /// INI text with one section per concern; every key is written.
    std::string to_ini() const;
    /// Overlays the keys present in `text`. Unknown keys are ConfigErrors.
    void apply_ini(const std::string& text, const std::string& origin = "config");
    void apply_ini_file(const std::filesystem::path& path);

    bool operator==(const EngineConfig&) const = default;
};

std::shared_ptr<ChatProvider> make_chat_provider(const EngineConfig& cfg, std::shared_ptr<InflightLimiter> limiter);
std::shared_ptr<EmbeddingProvider> make_embedding_provider(const EngineConfig& cfg, std::shared_ptr<InflightLimiter> limiter);

}  // namespace tgrag
