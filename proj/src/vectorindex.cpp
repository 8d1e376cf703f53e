#include "tgrag/vectorindex.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "tgrag/json_io.hpp"
#include "tgrag/parallel.hpp"

namespace tgrag {

static_assert(std::endian::native == std::endian::little, "index files are stored little-endian");

namespace fs = std::filesystem;

namespace {

constexpr int kIndexSchemaVersion = 1;

// Embeds `texts` in batches, possibly concurrently. Results keep input order.
std::vector<Embedding> embed_batched(const std::vector<std::string>& texts, EmbeddingProvider& em,
                                     const IndexOptions& options) {
    std::vector<Embedding> out(texts.size());
    const std::size_t batch = std::max<std::size_t>(options.batch_size, 1);
    const std::size_t batches = (texts.size() + batch - 1) / batch;
    parallel_for(batches, options.workers, [&](std::size_t b) {
        const std::size_t lo = b * batch;
        const std::size_t hi = std::min(texts.size(), lo + batch);
        std::vector<std::string> slice(texts.begin() + static_cast<std::ptrdiff_t>(lo),
                                       texts.begin() + static_cast<std::ptrdiff_t>(hi));
        std::vector<Embedding> got;
        try {
            got = em.embed(slice);
        } catch (const ProviderError& e) {
            throw ProviderError("embedding batch " + std::to_string(b) + " (texts " + std::to_string(lo) + ".." +
                                    std::to_string(hi - 1) + ", first: \"" + slice.front().substr(0, 60) +
                                    "\") failed: " + e.what(),
                                e.request_id());
        }
        if (got.size() != slice.size()) throw ProviderError("embedding batch " + std::to_string(b) + ": wrong vector count");
        for (std::size_t i = 0; i < got.size(); ++i) {
            if (static_cast<std::size_t>(got[i].size()) != em.dim())
                throw ProviderError("embedding batch " + std::to_string(b) + ": wrong dimension");
            out[lo + i] = std::move(got[i]);
        }
    });
    return out;
}

json item_to_json(const IndexedItem& it, std::size_t column) {
    json j;
    j["item_id"] = it.item_id;
    j["kind"] = std::string(to_string(it.kind));
    j["owner"] = it.owner;
    j["time_label"] = it.time_label ? json(it.time_label->raw()) : json(nullptr);
    j["payload_text"] = it.payload_text;
    j["column"] = column;
    return j;
}

IndexedItem item_from_json(const json& j) {
    IndexedItem it;
    it.item_id = j.at("item_id").get<std::string>();
    it.kind = item_kind_from_string(j.at("kind").get<std::string>());
    it.owner = j.at("owner").get<std::string>();
    if (!j.at("time_label").is_null()) it.time_label = TimeLabel::parse(j.at("time_label").get<std::string>());
    it.payload_text = j.at("payload_text").get<std::string>();
    return it;
}

void write_floats(std::ofstream& os, const VectorTable::Matrix& m) {
    os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
}

VectorTable::Matrix read_floats(std::ifstream& is, std::size_t dim, std::size_t cols, const fs::path& path) {
    VectorTable::Matrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(cols));
    const auto bytes = static_cast<std::streamsize>(dim * cols * sizeof(float));
    is.read(reinterpret_cast<char*>(m.data()), bytes);
    if (is.gcount() != bytes) throw LoadError(LoadError::Kind::Corrupt, "truncated vector file " + path.string());
    return m;
}

json table_items_json(const VectorTable& t) {
    json arr = json::array();
    for (std::size_t i = 0; i < t.size(); ++i) arr.push_back(item_to_json(t.items()[i], i));
    return arr;
}

std::vector<IndexedItem> table_items_from(const json& arr) {
    std::vector<IndexedItem> items;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (arr[i].at("column").get<std::size_t>() != i) throw LoadError(LoadError::Kind::Corrupt, "manifest columns out of order");
        items.push_back(item_from_json(arr[i]));
    }
    return items;
}

// Reads and validates a manifest; returns it together with an opened .vec stream.
json open_manifest(const fs::path& dir, const std::string& stem, std::ifstream& vec) {
    const auto manifest_path = dir / (stem + ".manifest.json");
    const auto vec_path = dir / (stem + ".vec");
    json m;
    try {
        m = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw LoadError(LoadError::Kind::Corrupt, "corrupt manifest " + manifest_path.string() + ": " + e.what());
    }
    if (!m.is_object() || !m.contains("schema_version")) throw LoadError(LoadError::Kind::Corrupt, "corrupt manifest " + manifest_path.string());
    if (m["schema_version"] != kIndexSchemaVersion)
        throw LoadError(LoadError::Kind::VersionMismatch, "unsupported index schema in " + manifest_path.string());
    vec.open(vec_path, std::ios::binary);
    if (!vec) throw LoadError(LoadError::Kind::Io, "cannot open " + vec_path.string());
    return m;
}

}  // namespace

std::string_view to_string(ItemKind k) {
    switch (k) {
        case ItemKind::Node: return "node";
        case ItemKind::Knowledge: return "knowledge";
        case ItemKind::Chunk: return "chunk";
    }
    return "?";
}

ItemKind item_kind_from_string(std::string_view s) {
    if (s == "node") return ItemKind::Node;
    if (s == "knowledge") return ItemKind::Knowledge;
    if (s == "chunk") return ItemKind::Chunk;
    throw DataError("unknown item kind: " + std::string(s));
}

std::string node_item_id(std::string_view entity) { return "n:" + std::string(entity); }

std::string knowledge_item_id(std::string_view entity, std::size_t position) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%04zu", position);
    return "k:" + std::string(entity) + buf;
}

SubgraphIndex build_index(const TemporalSubgraph& sub, EmbeddingProvider& em, const IndexOptions& options) {
    const std::size_t dim = em.dim();
    if (dim == 0) throw PreconditionError("embedding provider reports dimension 0");
    SubgraphIndex idx;
    idx.time_label = sub.time_label();
    idx.nodes = VectorTable(dim);
    idx.knowledge = VectorTable(dim);

    // Each distinct knowledge text is embedded once.
    std::vector<std::string> texts;
    std::unordered_map<std::string, std::size_t> text_slot;
    auto slot_of = [&](const std::string& s) {
        auto [it, fresh] = text_slot.try_emplace(s, texts.size());
        if (fresh) texts.push_back(s);
        return it->second;
    };
    std::vector<std::vector<std::size_t>> unit_slots;
    std::vector<std::size_t> concat_slots;
    for (const auto& [name, view] : sub.entities()) {
        auto& slots = unit_slots.emplace_back();
        std::string joined;
        for (const KnowledgeUnit* u : view.knowledge) {
            slots.push_back(slot_of(u->text));
            if (!joined.empty()) joined += "\n";
            joined += u->text;
        }
        if (options.node_embedding == NodeEmbedding::ConcatenatedText) concat_slots.push_back(slot_of(joined));
    }
    const auto vectors = embed_batched(texts, em, options);

    std::size_t e = 0;
    for (const auto& [name, view] : sub.entities()) {
        const TemporalEntity& ent = *view.entity;
        const auto& slots = unit_slots[e];
        auto& owned = idx.knowledge_by_owner[name];
        Embedding mean = Embedding::Zero(static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < view.knowledge.size(); ++i) {
            const KnowledgeUnit* u = view.knowledge[i];
            const auto position = static_cast<std::size_t>(u - ent.knowledge.data());
            const Embedding& v = vectors[slots[i]];
            const double norm = v.norm();
            if (norm == 0.0) throw ProviderError("embedding of knowledge for " + name + " is the zero vector");
            owned.push_back(idx.knowledge.size());
            idx.knowledge.append({knowledge_item_id(name, position), ItemKind::Knowledge, name, u->time_label, u->text}, v);
            mean += v / norm;
        }
        Embedding node;
        if (options.node_embedding == NodeEmbedding::ConcatenatedText) {
            node = vectors[concat_slots[e]];
        } else {
            node = mean / static_cast<double>(view.knowledge.size());
            if (node.norm() < 1e-12) {
                idx.warnings.push_back("zero mean knowledge vector for " + name + "; using its first knowledge vector");
                spdlog::warn("{}", idx.warnings.back());
                node = vectors[slots.front()];
            }
        }
        node.normalize();
        std::string payload = ent.entity_type.empty() ? name : name + " (" + ent.entity_type + ")";
        idx.nodes.append({node_item_id(name), ItemKind::Node, name, idx.time_label, std::move(payload)}, node);
        ++e;
    }
    return idx;
}

VectorTable build_chunk_table(const ChunkStore& chunks, EmbeddingProvider& em, const IndexOptions& options) {
    VectorTable table(em.dim());
    std::vector<std::string> texts;
    for (const auto& [id, c] : chunks.all()) texts.push_back(c.text);
    const auto vectors = embed_batched(texts, em, options);
    std::size_t i = 0;
    for (const auto& [id, c] : chunks.all()) {
        table.append({id, ItemKind::Chunk, c.doc_id, c.time_label, c.text}, vectors[i++]);
    }
    return table;
}

std::string index_stem(const std::optional<TimeLabel>& t) { return t ? t->raw() : std::string("all"); }

void save_table(const VectorTable& table, const fs::path& dir, const std::string& stem) {
    fs::create_directories(dir);
    json m;
    m["schema_version"] = kIndexSchemaVersion;
    m["stem"] = stem;
    m["dim"] = table.dim();
    m["items"] = table_items_json(table);
    const auto vec_path = dir / (stem + ".vec");
    {
        std::ofstream os(vec_path, std::ios::binary | std::ios::trunc);
        if (!os) throw LoadError(LoadError::Kind::Io, "cannot write " + vec_path.string());
        write_floats(os, table.vectors());
    }
    write_file(dir / (stem + ".manifest.json"), m.dump(1) + "\n");
}

VectorTable load_table(const fs::path& dir, const std::string& stem) {
    std::ifstream vec;
    const json m = open_manifest(dir, stem, vec);
    try {
        const auto dim = m.at("dim").get<std::size_t>();
        auto items = table_items_from(m.at("items"));
        VectorTable t(dim);
        auto mat = read_floats(vec, dim, items.size(), dir / (stem + ".vec"));
        t.assign(std::move(items), std::move(mat));
        return t;
    } catch (const json::exception& e) {
        throw LoadError(LoadError::Kind::Corrupt, "corrupt manifest for " + stem + ": " + e.what());
    }
}

void save_index(const SubgraphIndex& index, const fs::path& dir) {
    fs::create_directories(dir);
    const std::string stem = index_stem(index.time_label);
    json m;
    m["schema_version"] = kIndexSchemaVersion;
    m["stem"] = stem;
    m["time_label"] = index.time_label ? json(index.time_label->raw()) : json(nullptr);
    m["dim"] = index.dim();
    m["nodes"] = table_items_json(index.nodes);
    m["knowledge"] = table_items_json(index.knowledge);
    m["warnings"] = index.warnings;
    const auto vec_path = dir / (stem + ".vec");
    {
        std::ofstream os(vec_path, std::ios::binary | std::ios::trunc);
        if (!os) throw LoadError(LoadError::Kind::Io, "cannot write " + vec_path.string());
        write_floats(os, index.nodes.vectors());
        write_floats(os, index.knowledge.vectors());
    }
    write_file(dir / (stem + ".manifest.json"), m.dump(1) + "\n");
}

SubgraphIndex load_index(const fs::path& dir, const std::string& stem) {
    std::ifstream vec;
    const json m = open_manifest(dir, stem, vec);
    try {
        SubgraphIndex idx;
        if (!m.at("time_label").is_null()) idx.time_label = TimeLabel::parse(m["time_label"].get<std::string>());
        const auto dim = m.at("dim").get<std::size_t>();
        auto nodes = table_items_from(m.at("nodes"));
        auto knowledge = table_items_from(m.at("knowledge"));
        const auto path = dir / (stem + ".vec");
        auto nm = read_floats(vec, dim, nodes.size(), path);
        auto km = read_floats(vec, dim, knowledge.size(), path);
        idx.nodes = VectorTable(dim);
        idx.knowledge = VectorTable(dim);
        idx.nodes.assign(std::move(nodes), std::move(nm));
        idx.knowledge.assign(std::move(knowledge), std::move(km));
        for (std::size_t i = 0; i < idx.knowledge.size(); ++i) idx.knowledge_by_owner[idx.knowledge.items()[i].owner].push_back(i);
        idx.warnings = m.at("warnings").get<std::vector<std::string>>();
        return idx;
    } catch (const json::exception& e) {
        throw LoadError(LoadError::Kind::Corrupt, "corrupt manifest for " + stem + ": " + e.what());
    } catch (const ConfigError& e) {
        throw LoadError(LoadError::Kind::Corrupt, "corrupt manifest for " + stem + ": " + e.what());
    }
}

const SubgraphIndex* IndexSet::find(const std::optional<TimeLabel>& t) const {
    if (!t) return &all;
    auto it = by_time.find(*t);
    return it == by_time.end() ? nullptr : &it->second;
}

IndexSet build_index_set(const TemporalGraph& graph, EmbeddingProvider& em, const IndexOptions& options) {
    IndexSet set;
    for (const auto& t : graph.time_labels()) set.by_time.emplace(t, build_index(subgraph_at(graph, t), em, options));
    set.all = build_index(full_view(graph), em, options);
    return set;
}

void save_index_set(const IndexSet& set, const fs::path& dir) {
    for (const auto& [t, idx] : set.by_time) save_index(idx, dir);
    save_index(set.all, dir);
    if (set.chunks) save_table(*set.chunks, dir, "chunks");
}

IndexSet load_index_set(const fs::path& dir) {
    if (!fs::exists(dir / "all.manifest.json")) throw StateError("no index found in " + dir.string() + "; run `tgrag index` first");
    IndexSet set;
    set.all = load_index(dir, "all");
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        constexpr std::string_view suffix = ".manifest.json";
        if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
        const std::string stem = name.substr(0, name.size() - suffix.size());
        if (stem == "all") continue;
        if (stem == "chunks") {
            set.chunks = load_table(dir, stem);
            continue;
        }
        auto idx = load_index(dir, stem);
        if (!idx.time_label) throw LoadError(LoadError::Kind::Corrupt, "index " + stem + " has no time label");
        set.by_time.emplace(*idx.time_label, std::move(idx));
    }
    return set;
}

}  // namespace tgrag
