#include "tgrag/kgraph.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "tgrag/errors.hpp"
#include "tgrag/json_io.hpp"

namespace tgrag {

namespace {

/// Appends a unit or merges its source chunk into an identical (text, time) unit.
/// Returns true when a new unit was appended.
bool add_unit(std::vector<KnowledgeUnit>& units, const std::string& text, const TimeLabel& t,
              const std::string& chunk_id) {
    for (auto& u : units) {
        if (u.time_label == t && u.text == text) {
            if (!chunk_id.empty()) u.source_chunks.insert(chunk_id);
            return false;
        }
    }
    KnowledgeUnit u{text, t, {}};
    if (!chunk_id.empty()) u.source_chunks.insert(chunk_id);
    units.push_back(std::move(u));
    return true;
}

json unit_to_json(const KnowledgeUnit& u) {
    return json{{"text", u.text}, {"time_label", u.time_label}, {"source_chunks", u.source_chunks}};
}

KnowledgeUnit unit_from_json(const json& j) {
    KnowledgeUnit u;
    j.at("text").get_to(u.text);
    j.at("time_label").get_to(u.time_label);
    u.source_chunks = j.at("source_chunks").get<std::set<std::string>>();
    return u;
}

}  // namespace

// --- TemporalGraph -------------------------------------------------------------

TemporalEntity& TemporalGraph::ensure_entity(const std::string& name, UpsertReport& report, bool stub) {
    auto it = entities_.find(name);
    if (it != entities_.end()) return it->second;
    TemporalEntity e;
    e.name = name;
    if (stub) {
        ++report.stub_entities;
        report.warnings.push_back("relation endpoint " + name + " has no entity record; created stub entity");
    } else {
        ++report.new_entities;
    }
    return entities_.emplace(name, std::move(e)).first->second;
}

UpsertReport TemporalGraph::upsert(const ExtractionOutput& out) {
    UpsertReport report;
    for (const auto& rec : out.entities) {
        if (!rec.time_label || rec.source_chunk.empty()) {
            throw PreconditionError("entity record " + rec.name + " lacks a time label or source chunk");
        }
    }
    for (const auto& rec : out.relations) {
        if (!rec.time_label || rec.source_chunk.empty()) {
            throw PreconditionError("relation record " + rec.source_name + " -> " + rec.target_name +
                                    " lacks a time label or source chunk");
        }
    }

    for (const auto& rec : out.entities) {
        auto& e = ensure_entity(rec.name, report, false);
        if (e.entity_type.empty()) {
            e.entity_type = rec.entity_type;
        } else if (e.entity_type != rec.entity_type) {
            ++report.type_conflicts;
            report.warnings.push_back("entity " + rec.name + " typed '" + rec.entity_type + "', keeping '" +
                                      e.entity_type + "'");
        }
        if (add_unit(e.knowledge, rec.description, *rec.time_label, rec.source_chunk)) {
            ++report.new_units;
        } else {
            ++report.merged_units;
        }
        e.time_set.insert(*rec.time_label);
        if (!rec.source_chunk.empty()) chunk_index_[rec.source_chunk].insert(rec.name);
    }

    for (const auto& rec : out.relations) {
        ensure_entity(rec.source_name, report, true);
        ensure_entity(rec.target_name, report, true);
        RelationKey key{rec.source_name, rec.target_name};
        auto [it, inserted] = relations_.try_emplace(key);
        auto& r = it->second;
        if (inserted) {
            r.source = rec.source_name;
            r.target = rec.target_name;
        }
        if (add_unit(r.knowledge, rec.description, *rec.time_label, rec.source_chunk)) {
            ++report.new_units;
        } else {
            ++report.merged_units;
        }
        auto [sit, fresh] = r.strengths.try_emplace(*rec.time_label, rec.strength);
        if (!fresh) sit->second = std::max(sit->second, rec.strength);
    }

    for (const auto& w : report.warnings) spdlog::warn("graph upsert: {}", w);
    return report;
}

const TemporalEntity* TemporalGraph::find_entity(std::string_view name) const {
    auto it = entities_.find(name);
    return it == entities_.end() ? nullptr : &it->second;
}

std::set<TimeLabel> TemporalGraph::time_labels() const {
    std::set<TimeLabel> out;
    for (const auto& [_, e] : entities_) out.insert(e.time_set.begin(), e.time_set.end());
    for (const auto& [_, r] : relations_) {
        for (const auto& u : r.knowledge) out.insert(u.time_label);
    }
    return out;
}

std::size_t TemporalGraph::knowledge_count() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entities_) n += e.knowledge.size();
    for (const auto& [_, r] : relations_) n += r.knowledge.size();
    return n;
}

void TemporalGraph::check_invariants() const {
    ChunkIndex derived;
    for (const auto& [name, e] : entities_) {
        if (name != e.name || name.empty()) throw DataError("entity key mismatch for '" + name + "'");
        std::set<TimeLabel> times;
        for (std::size_t i = 0; i < e.knowledge.size(); ++i) {
            const auto& u = e.knowledge[i];
            if (u.text.empty() || u.source_chunks.empty()) {
                throw DataError("entity " + name + " has an empty knowledge unit");
            }
            for (std::size_t j = 0; j < i; ++j) {
                if (e.knowledge[j].text == u.text && e.knowledge[j].time_label == u.time_label) {
                    throw DataError("entity " + name + " holds duplicate knowledge units");
                }
            }
            times.insert(u.time_label);
            for (const auto& c : u.source_chunks) derived[c].insert(name);
        }
        if (times != e.time_set) throw DataError("entity " + name + " time_set disagrees with its knowledge");
    }
    for (const auto& [key, r] : relations_) {
        if (key.source != r.source || key.target != r.target) throw DataError("relation key mismatch");
        if (!entities_.contains(r.source) || !entities_.contains(r.target)) {
            throw DataError("relation " + r.source + " -> " + r.target + " has a missing endpoint");
        }
        if (r.knowledge.empty()) throw DataError("relation " + r.source + " -> " + r.target + " has no knowledge");
    }
    if (derived != chunk_index_) throw DataError("chunk_index disagrees with knowledge source chunks");
}

json TemporalGraph::to_json() const {
    json entities = json::array();
    for (const auto& [name, e] : entities_) {
        json units = json::array();
        for (const auto& u : e.knowledge) units.push_back(unit_to_json(u));
        entities.push_back({{"name", name}, {"entity_type", e.entity_type}, {"knowledge", units}});
    }
    json relations = json::array();
    for (const auto& [key, r] : relations_) {
        json units = json::array();
        for (const auto& u : r.knowledge) units.push_back(unit_to_json(u));
        json strengths = json::object();
        for (const auto& [t, s] : r.strengths) strengths[t.raw()] = s;
        relations.push_back({{"source", r.source}, {"target", r.target}, {"knowledge", units}, {"strengths", strengths}});
    }
    json chunk_index = json::object();
    for (const auto& [chunk, names] : chunk_index_) chunk_index[chunk] = names;
    return json{{"schema_version", kSchemaVersion},
                {"entities", entities},
                {"relations", relations},
                {"chunk_index", chunk_index}};
}

TemporalGraph TemporalGraph::from_json(const json& j) {
    if (!j.is_object() || !j.contains("schema_version")) {
        throw LoadError(LoadError::Kind::Corrupt, "graph document has no schema_version");
    }
    if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kSchemaVersion) {
        throw LoadError(LoadError::Kind::VersionMismatch,
                        "unsupported graph schema_version " + j["schema_version"].dump() + " (expected " +
                            std::to_string(kSchemaVersion) + ")");
    }
    TemporalGraph g;
    try {
        for (const auto& je : j.at("entities")) {
            TemporalEntity e;
            je.at("name").get_to(e.name);
            je.at("entity_type").get_to(e.entity_type);
            for (const auto& ju : je.at("knowledge")) {
                e.knowledge.push_back(unit_from_json(ju));
                e.time_set.insert(e.knowledge.back().time_label);
            }
            auto name = e.name;
            g.entities_.emplace(std::move(name), std::move(e));
        }
        for (const auto& jr : j.at("relations")) {
            TemporalRelation r;
            jr.at("source").get_to(r.source);
            jr.at("target").get_to(r.target);
            for (const auto& ju : jr.at("knowledge")) r.knowledge.push_back(unit_from_json(ju));
            for (const auto& [t, s] : jr.at("strengths").items()) r.strengths[TimeLabel::parse(t)] = s.get<double>();
            RelationKey key{r.source, r.target};
            g.relations_.emplace(std::move(key), std::move(r));
        }
        for (const auto& [chunk, names] : j.at("chunk_index").items()) {
            g.chunk_index_[chunk] = names.get<std::set<std::string>>();
        }
        g.check_invariants();
    } catch (const json::exception& e) {
        throw LoadError(LoadError::Kind::Corrupt, std::string("malformed graph document: ") + e.what());
    } catch (const LoadError&) {
        throw;
    } catch (const Error& e) {
        throw LoadError(LoadError::Kind::Corrupt, std::string("inconsistent graph document: ") + e.what());
    }
    return g;
}

std::string TemporalGraph::dump() const { return to_json().dump(1) + "\n"; }

void TemporalGraph::save(const std::filesystem::path& path) const { write_file(path, dump()); }

TemporalGraph TemporalGraph::load(const std::filesystem::path& path) {
    const auto text = read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw LoadError(LoadError::Kind::Corrupt, "corrupt graph file " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

// --- TemporalSubgraph ----------------------------------------------------------

TemporalSubgraph::TemporalSubgraph(const TemporalGraph& graph, std::optional<TimeLabel> time) : time_(std::move(time)) {
    for (const auto& [name, e] : graph.entities()) {
        EntityView v{&e, {}};
        for (const auto& u : e.knowledge) {
            if (admits(u.time_label)) v.knowledge.push_back(&u);
        }
        if (!v.knowledge.empty()) entities_.emplace(name, std::move(v));
    }
    for (const auto& [key, r] : graph.relations()) {
        RelationView v{&r, {}, 0.0};
        for (const auto& u : r.knowledge) {
            if (admits(u.time_label)) v.knowledge.push_back(&u);
        }
        if (v.knowledge.empty()) continue;
        bool first = true;
        for (const auto& [t, s] : r.strengths) {
            if (!admits(t)) continue;
            v.strength = first ? s : std::max(v.strength, s);
            first = false;
        }
        adjacency_[r.source].insert(r.target);
        adjacency_[r.target].insert(r.source);
        relations_.push_back(std::move(v));
    }
}

const TemporalSubgraph::EntityView* TemporalSubgraph::find(std::string_view name) const {
    auto it = entities_.find(name);
    return it == entities_.end() ? nullptr : &it->second;
}

std::size_t TemporalSubgraph::knowledge_count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : entities_) n += v.knowledge.size();
    for (const auto& v : relations_) n += v.knowledge.size();
    return n;
}

std::set<std::string> TemporalSubgraph::one_hop(const std::set<std::string>& names) const {
    std::set<std::string> out;
    for (const auto& n : names) {
        if (!contains(n)) throw PreconditionError("one_hop: entity '" + n + "' is not in the subgraph");
        out.insert(n);
        if (auto it = adjacency_.find(n); it != adjacency_.end()) out.insert(it->second.begin(), it->second.end());
    }
    return out;
}

json TemporalSubgraph::to_json() const {
    json entities = json::array();
    for (const auto& [name, v] : entities_) {
        json units = json::array();
        for (const auto* u : v.knowledge) units.push_back(unit_to_json(*u));
        entities.push_back({{"name", name}, {"entity_type", v.entity->entity_type}, {"knowledge", units}});
    }
    json relations = json::array();
    for (const auto& v : relations_) {
        json units = json::array();
        for (const auto* u : v.knowledge) units.push_back(unit_to_json(*u));
        relations.push_back({{"source", v.relation->source},
                             {"target", v.relation->target},
                             {"strength", v.strength},
                             {"knowledge", units}});
    }
    return json{{"time_label", time_ ? json(time_->raw()) : json("all")},
                {"entities", entities},
                {"relations", relations}};
}

TemporalSubgraph subgraph_at(const TemporalGraph& graph, const TimeLabel& t) { return TemporalSubgraph(graph, t); }

TemporalSubgraph full_view(const TemporalGraph& graph) { return TemporalSubgraph(graph, std::nullopt); }

}  // namespace tgrag
