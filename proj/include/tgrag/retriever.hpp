#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tgrag/corpus.hpp"
#include "tgrag/kgraph.hpp"
#include "tgrag/providers.hpp"
#include "tgrag/tqd.hpp"
#include "tgrag/vectorindex.hpp"

namespace tgrag {

struct RetrievalConfig {
    std::size_t n = 30;  ///< candidate nodes
    std::size_t k = 15;  ///< valid knowledge units
    std::size_t t = 5;   ///< source texts
    std::size_t graph_token_budget = 1600;

    /// Throws ConfigError unless every field is at least 1.
    void validate() const;
};

struct ScoredEntity {
    std::string name;
    double score = 0.0;

    bool operator==(const ScoredEntity&) const = default;
};

struct ScoredKnowledge {
    std::string item_id;
    std::string owner;
    TimeLabel time_label;
    std::string text;
    double score = 0.0;

    bool operator==(const ScoredKnowledge&) const = default;
};

struct ValidRelation {
    std::string source;
    std::string target;
    double strength = 0.0;
    /// 1 or 2.
    int valid_endpoints = 0;
    /// Only the units visible in the retrieval's view.
    std::vector<KnowledgeUnit> knowledge;

    bool operator==(const ValidRelation&) const = default;
};

struct ScoredChunk {
    Chunk chunk;
    std::size_t score = 0;
    /// In-scope entities found in the chunk, sorted.
    std::vector<std::string> matched;

    bool operator==(const ScoredChunk&) const = default;
};

struct KnowledgeSelection {
    std::vector<ScoredKnowledge> valid_knowledge;
    /// Distinct owners of valid_knowledge in best-score order.
    std::vector<std::string> valid_nodes;
    std::size_t pool_size = 0;
};

/// One retrieval pass over one temporal view.
struct RetrievalResult {
    std::string subquery;
    /// Period of the view; nullopt for the all-periods view or a period with no data.
    std::optional<TimeLabel> time_label;
    /// The sub-query asked for a period the corpus does not cover.
    bool no_evidence = false;

    std::vector<ScoredEntity> candidates;
    std::size_t knowledge_pool_size = 0;
    std::vector<ScoredKnowledge> valid_knowledge;
    std::vector<std::string> valid_nodes;
    std::vector<ValidRelation> valid_relations;
    std::vector<std::string> source_scope;
    std::vector<ScoredChunk> valid_texts;

    bool empty() const noexcept { return candidates.empty() && valid_texts.empty(); }
    std::string view_name() const;
    nlohmann::json to_json() const;

    bool operator==(const RetrievalResult&) const = default;
};

/// Top-n node items by cosine to `q`, ties by item id. Empty index → empty list.
std::vector<ScoredEntity> retrieve_candidates(const Embedding& q, const SubgraphIndex& index, std::size_t n);
std::vector<ScoredEntity> retrieve_candidates(const SubQuery& sub, const SubgraphIndex& index, EmbeddingProvider& em,
                                              std::size_t n);

/// Global top-k over the knowledge units owned by the candidates.
KnowledgeSelection retrieve_knowledge(const std::vector<ScoredEntity>& candidates, const SubgraphIndex& index,
                                      const Embedding& q, std::size_t k);

/// Relations of the view with at least one endpoint in `valid_nodes`, ordered by
/// (valid endpoints desc, strength desc, source asc, target asc).
std::vector<ValidRelation> select_relations(const std::set<std::string>& valid_nodes, const TemporalSubgraph& sub);

/// Chunks of the view's period scored by how many distinct entities of
/// one_hop(valid_nodes) they mention; the top t with score ≥ 1, ordered by
/// (score desc, chunk id asc). Chunk text comes from `chunks`.
std::vector<ScoredChunk> extract_source_texts(const std::set<std::string>& valid_nodes, const TemporalSubgraph& sub,
                                              const TemporalGraph& graph, const ChunkStore& chunks, std::size_t t,
                                              std::vector<std::string>* scope_out = nullptr);

/// Everything a query needs to retrieve against.
struct RetrievalState {
    const TemporalGraph* graph = nullptr;
    const IndexSet* indexes = nullptr;
    const ChunkStore* chunks = nullptr;
};

/// One pass per period the sub-query resolves to (a single pass on the
/// all-periods view when it has no time constraint, and a single empty
/// no-evidence pass when its period is not covered).
std::vector<RetrievalResult> retrieve(const SubQuery& sub, const RetrievalState& state, EmbeddingProvider& em,
                                      const RetrievalConfig& cfg);

}  // namespace tgrag
