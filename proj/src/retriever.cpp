#include "tgrag/retriever.hpp"

#include <algorithm>
#include <unordered_map>

#include "tgrag/json_io.hpp"

namespace tgrag {

void RetrievalConfig::validate() const {
    if (n == 0 || k == 0 || t == 0) throw ConfigError("retrieval n, k and t must be at least 1");
    if (graph_token_budget == 0) throw ConfigError("graph token budget must be positive");
}

namespace {

// Rethrows an error from one pipeline stage with the stage name prepended,
// keeping its category.
template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ProviderError& e) {
        throw ProviderError(std::string(stage) + ": " + e.what(), e.request_id());
    } catch (const PreconditionError& e) {
        throw PreconditionError(std::string(stage) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string(stage) + ": " + e.what());
    }
}

}  // namespace

std::vector<ScoredEntity> retrieve_candidates(const Embedding& q, const SubgraphIndex& index, std::size_t n) {
    std::vector<ScoredEntity> out;
    if (index.nodes.empty()) return out;
    for (const auto& s : index.nodes.top_m(q, n)) out.push_back({index.nodes.items()[s.column].owner, s.score});
    return out;
}

std::vector<ScoredEntity> retrieve_candidates(const SubQuery& sub, const SubgraphIndex& index, EmbeddingProvider& em,
                                              std::size_t n) {
    if (index.nodes.empty()) return {};
    return retrieve_candidates(em.embed_one(sub.text), index, n);
}

KnowledgeSelection retrieve_knowledge(const std::vector<ScoredEntity>& candidates, const SubgraphIndex& index,
                                      const Embedding& q, std::size_t k) {
    KnowledgeSelection sel;
    std::vector<std::size_t> pool;
    for (const auto& c : candidates) {
        auto it = index.knowledge_by_owner.find(c.name);
        if (it == index.knowledge_by_owner.end()) throw PreconditionError("candidate " + c.name + " is not in the index");
        pool.insert(pool.end(), it->second.begin(), it->second.end());
    }
    sel.pool_size = pool.size();
    if (pool.empty()) return sel;
    std::set<std::string> seen;
    for (const auto& s : index.knowledge.top_m(q, k, &pool)) {
        const IndexedItem& item = index.knowledge.items()[s.column];
        sel.valid_knowledge.push_back({item.item_id, item.owner, *item.time_label, item.payload_text, s.score});
        if (seen.insert(item.owner).second) sel.valid_nodes.push_back(item.owner);
    }
    return sel;
}

std::vector<ValidRelation> select_relations(const std::set<std::string>& valid_nodes, const TemporalSubgraph& sub) {
    std::vector<ValidRelation> out;
    if (valid_nodes.empty()) return out;
    for (const auto& view : sub.relations()) {
        const TemporalRelation& r = *view.relation;
        const int hits = static_cast<int>(valid_nodes.count(r.source)) + static_cast<int>(valid_nodes.count(r.target));
        if (hits == 0) continue;
        ValidRelation v{r.source, r.target, view.strength, hits, {}};
        for (const KnowledgeUnit* u : view.knowledge) v.knowledge.push_back(*u);
        out.push_back(std::move(v));
    }
    std::sort(out.begin(), out.end(), [](const ValidRelation& a, const ValidRelation& b) {
        if (a.valid_endpoints != b.valid_endpoints) return a.valid_endpoints > b.valid_endpoints;
        if (a.strength != b.strength) return a.strength > b.strength;
        if (a.source != b.source) return a.source < b.source;
        return a.target < b.target;
    });
    return out;
}

std::vector<ScoredChunk> extract_source_texts(const std::set<std::string>& valid_nodes, const TemporalSubgraph& sub,
                                              const TemporalGraph& graph, const ChunkStore& chunks, std::size_t t,
                                              std::vector<std::string>* scope_out) {
    std::vector<ScoredChunk> out;
    if (valid_nodes.empty() || t == 0) return out;
    const std::set<std::string> scope = sub.one_hop(valid_nodes);
    if (scope_out) scope_out->assign(scope.begin(), scope.end());
    for (const auto& [chunk_id, names] : graph.chunk_index()) {
        std::vector<std::string> matched;
        std::set_intersection(names.begin(), names.end(), scope.begin(), scope.end(), std::back_inserter(matched));
        if (matched.empty()) continue;
        const Chunk* c = chunks.find(chunk_id);
        if (!c) throw DataError("chunk " + chunk_id + " is referenced by the graph but missing from the chunk store");
        if (!sub.admits(c->time_label)) continue;
        out.push_back({*c, matched.size(), std::move(matched)});
    }
    std::sort(out.begin(), out.end(), [](const ScoredChunk& a, const ScoredChunk& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.chunk.chunk_id < b.chunk.chunk_id;
    });
    if (out.size() > t) out.resize(t);
    return out;
}

std::string RetrievalResult::view_name() const {
    if (time_label) return time_label->raw();
    return no_evidence ? "none" : "all";
}

json RetrievalResult::to_json() const {
    json j;
    j["subquery"] = subquery;
    j["view"] = view_name();
    j["no_evidence"] = no_evidence;
    json c = json::array();
    for (const auto& e : candidates) c.push_back({{"entity", e.name}, {"score", e.score}});
    j["candidates"] = std::move(c);
    j["knowledge_pool_size"] = knowledge_pool_size;
    json k = json::array();
    for (const auto& u : valid_knowledge) {
        k.push_back({{"item_id", u.item_id}, {"entity", u.owner}, {"time", u.time_label.raw()}, {"text", u.text}, {"score", u.score}});
    }
    j["valid_knowledge"] = std::move(k);
    j["valid_nodes"] = valid_nodes;
    json r = json::array();
    for (const auto& v : valid_relations) {
        json units = json::array();
        for (const auto& u : v.knowledge) units.push_back({{"time", u.time_label.raw()}, {"text", u.text}});
        r.push_back({{"source", v.source},
                     {"target", v.target},
                     {"strength", v.strength},
                     {"valid_endpoints", v.valid_endpoints},
                     {"knowledge", std::move(units)}});
    }
    j["valid_relations"] = std::move(r);
    j["source_scope"] = source_scope;
    json d = json::array();
    for (const auto& s : valid_texts) {
        d.push_back({{"chunk_id", s.chunk.chunk_id}, {"time", s.chunk.time_label.raw()}, {"score", s.score}, {"matched", s.matched}});
    }
    j["valid_texts"] = std::move(d);
    return j;
}

namespace {

RetrievalResult run_pass(const SubQuery& sub, const TemporalSubgraph& view, const SubgraphIndex& index,
                         const RetrievalState& state, const Embedding& q, const RetrievalConfig& cfg) {
    RetrievalResult res;
    res.subquery = sub.text;
    res.time_label = view.time_label();
    res.candidates = in_stage("candidates", [&] { return retrieve_candidates(q, index, cfg.n); });
    auto sel = in_stage("knowledge", [&] { return retrieve_knowledge(res.candidates, index, q, cfg.k); });
    res.knowledge_pool_size = sel.pool_size;
    res.valid_knowledge = std::move(sel.valid_knowledge);
    res.valid_nodes = std::move(sel.valid_nodes);
    const std::set<std::string> valid(res.valid_nodes.begin(), res.valid_nodes.end());
    res.valid_relations = in_stage("relations", [&] { return select_relations(valid, view); });
    res.valid_texts = in_stage("source texts", [&] {
        return extract_source_texts(valid, view, *state.graph, *state.chunks, cfg.t, &res.source_scope);
    });
    return res;
}

}  // namespace

std::vector<RetrievalResult> retrieve(const SubQuery& sub, const RetrievalState& state, EmbeddingProvider& em,
                                      const RetrievalConfig& cfg) {
    if (!state.graph || !state.indexes || !state.chunks) throw PreconditionError("retrieve: incomplete engine state");
    cfg.validate();
    std::vector<RetrievalResult> out;

    std::vector<std::optional<TimeLabel>> views;
    if (!sub.time) {
        views.emplace_back(std::nullopt);
    } else {
        const auto available = state.graph->time_labels();
        if (!available.empty()) {
            for (const auto& t : resolve_time(*sub.time, available)) views.emplace_back(t);
        }
        if (views.empty()) {
            RetrievalResult none;
            none.subquery = sub.text;
            none.no_evidence = true;
            out.push_back(std::move(none));
            return out;
        }
    }

    const Embedding q = in_stage("embed query", [&] { return em.embed_one(sub.text); });
    for (const auto& t : views) {
        const SubgraphIndex* index = state.indexes->find(t);
        if (!index) throw StateError("no index for period " + (t ? t->raw() : std::string("all")) + "; re-run `tgrag index`");
        if (index->dim() != em.dim()) throw StateError("index dimension does not match the embedding provider");
        const TemporalSubgraph view(*state.graph, t);
        out.push_back(run_pass(sub, view, *index, state, q, cfg));
    }
    return out;
}

}  // namespace tgrag
