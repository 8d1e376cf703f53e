#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tgrag/corpus.hpp"
#include "tgrag/extract.hpp"

namespace tgrag {

/// One time-stamped description attached to an entity or relation.
struct KnowledgeUnit {
    std::string text;
    TimeLabel time_label;
    std::set<std::string> source_chunks;

    bool operator==(const KnowledgeUnit&) const = default;
};

struct TemporalEntity {
    std::string name;
    /// Empty for stub entities created from dangling relation endpoints.
    std::string entity_type;
    std::vector<KnowledgeUnit> knowledge;
    std::set<TimeLabel> time_set;

    bool operator==(const TemporalEntity&) const = default;
};

/// Directed relation identity.
struct RelationKey {
    std::string source;
    std::string target;

    auto operator<=>(const RelationKey&) const = default;
};

struct TemporalRelation {
    std::string source;
    std::string target;
    std::vector<KnowledgeUnit> knowledge;
    /// Highest extracted strength per period.
    std::map<TimeLabel, double> strengths;

    bool operator==(const TemporalRelation&) const = default;
};

struct UpsertReport {
    std::size_t new_entities = 0;
    std::size_t stub_entities = 0;
    std::size_t new_units = 0;
    std::size_t merged_units = 0;
    std::size_t type_conflicts = 0;
    std::vector<std::string> warnings;
};

/// The temporal knowledge graph: entities and directed relations whose
/// knowledge units carry time labels, plus a chunk → entity-name index.
/// Growth is append-only; existing units only ever gain source chunks.
class TemporalGraph {
public:
    using EntityMap = std::map<std::string, TemporalEntity, std::less<>>;
    using RelationMap = std::map<RelationKey, TemporalRelation>;
    using ChunkIndex = std::map<std::string, std::set<std::string>, std::less<>>;

    static constexpr int kSchemaVersion = 1;

    /// Merges one extraction output. Every record must carry a time label and a
    /// source chunk (extract_chunk stamps both).
    UpsertReport upsert(const ExtractionOutput& out);

    const EntityMap& entities() const noexcept { return entities_; }
    const RelationMap& relations() const noexcept { return relations_; }
    const ChunkIndex& chunk_index() const noexcept { return chunk_index_; }

    const TemporalEntity* find_entity(std::string_view name) const;
    std::set<TimeLabel> time_labels() const;
    /// Entity plus relation knowledge units.
    std::size_t knowledge_count() const;
    bool empty() const noexcept { return entities_.empty(); }

    /// Throws DataError describing the first broken structural invariant.
    void check_invariants() const;

    nlohmann::json to_json() const;
    static TemporalGraph from_json(const nlohmann::json& j);
    /// Canonical, byte-stable serialization.
    std::string dump() const;
    void save(const std::filesystem::path& path) const;
    /// Throws LoadError on truncated/corrupt files or a schema version mismatch.
    static TemporalGraph load(const std::filesystem::path& path);

    bool operator==(const TemporalGraph&) const = default;

private:
    TemporalEntity& ensure_entity(const std::string& name, UpsertReport& report, bool stub);

    EntityMap entities_;
    RelationMap relations_;
    ChunkIndex chunk_index_;
};

/// Restriction of a TemporalGraph to one period (or to all periods for the
/// full view). Holds pointers into the graph, which must outlive the view and
/// stay unmodified while it is in use.
class TemporalSubgraph {
public:
    struct EntityView {
        const TemporalEntity* entity = nullptr;
        std::vector<const KnowledgeUnit*> knowledge;
    };
    struct RelationView {
        const TemporalRelation* relation = nullptr;
        std::vector<const KnowledgeUnit*> knowledge;
        double strength = 0.0;
    };

    /// nullopt selects every period.
    TemporalSubgraph(const TemporalGraph& graph, std::optional<TimeLabel> time);

    const std::optional<TimeLabel>& time_label() const noexcept { return time_; }
    bool is_full_view() const noexcept { return !time_.has_value(); }
    /// True when `t` passes this view's time filter.
    bool admits(const TimeLabel& t) const noexcept { return !time_ || *time_ == t; }

    const std::map<std::string, EntityView, std::less<>>& entities() const noexcept { return entities_; }
    const std::vector<RelationView>& relations() const noexcept { return relations_; }
    const EntityView* find(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name) != nullptr; }
    std::size_t knowledge_count() const;
    bool empty() const noexcept { return entities_.empty() && relations_.empty(); }

    /// `names` plus every entity sharing a relation of this view with one of
    /// them, either direction. Throws PreconditionError for names not in the view.
    std::set<std::string> one_hop(const std::set<std::string>& names) const;

    nlohmann::json to_json() const;

private:
    std::optional<TimeLabel> time_;
    std::map<std::string, EntityView, std::less<>> entities_;
    std::vector<RelationView> relations_;
    std::map<std::string, std::set<std::string>, std::less<>> adjacency_;
};

TemporalSubgraph subgraph_at(const TemporalGraph& graph, const TimeLabel& t);
TemporalSubgraph full_view(const TemporalGraph& graph);

}  // namespace tgrag
