#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tgrag/corpus.hpp"
#include "tgrag/errors.hpp"
#include "tgrag/kgraph.hpp"
#include "tgrag/providers.hpp"

namespace tgrag {

/// Cosine similarity of two dense vectors of any scalar type, evaluated in
/// double precision. Throws PreconditionError on a size mismatch or a zero vector.
template <typename DerivedA, typename DerivedB>
double cosine(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    if (a.size() != b.size() || a.size() == 0) throw PreconditionError("cosine: dimension mismatch");
    const auto ad = a.template cast<double>().eval();
    const auto bd = b.template cast<double>().eval();
    const double na = ad.norm();
    const double nb = bd.norm();
    if (na == 0.0 || nb == 0.0) throw PreconditionError("cosine: zero vector");
    return std::clamp(ad.dot(bd) / (na * nb), -1.0, 1.0);
}

enum class ItemKind { Node, Knowledge, Chunk };

std::string_view to_string(ItemKind k);
ItemKind item_kind_from_string(std::string_view s);

struct IndexedItem {
    std::string item_id;
    ItemKind kind = ItemKind::Knowledge;
    /// Owning entity for node/knowledge items, document id for chunk items.
    std::string owner;
    /// Absent for node items of the all-periods view.
    std::optional<TimeLabel> time_label;
    std::string payload_text;

    bool operator==(const IndexedItem&) const = default;
};

struct ScoredItem {
    std::size_t column = 0;
    std::string item_id;
    double score = 0.0;

    bool operator==(const ScoredItem&) const = default;
};

/// Ranking order used everywhere: score descending, then item id ascending.
inline bool ranks_before(const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
}

/// Items with their embeddings stored column-wise in a dim × n matrix.
template <typename Scalar>
class BasicVectorTable {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    BasicVectorTable() = default;
    explicit BasicVectorTable(std::size_t dim) : vectors_(static_cast<Eigen::Index>(dim), 0) {}

    std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors_.rows()); }
    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }
    const std::vector<IndexedItem>& items() const noexcept { return items_; }
    const Matrix& vectors() const noexcept { return vectors_; }

    template <typename Derived>
    void append(IndexedItem item, const Eigen::MatrixBase<Derived>& v) {
        if (v.size() != vectors_.rows()) throw PreconditionError("vector table: dimension mismatch for " + item.item_id);
        vectors_.conservativeResize(Eigen::NoChange, vectors_.cols() + 1);
        vectors_.col(vectors_.cols() - 1) = v.template cast<Scalar>();
        items_.push_back(std::move(item));
    }

    /// Replaces the whole matrix; used when loading persisted tables.
    void assign(std::vector<IndexedItem> items, Matrix vectors) {
        if (static_cast<Eigen::Index>(items.size()) != vectors.cols()) throw DataError("vector table: item/column count mismatch");
        items_ = std::move(items);
        vectors_ = std::move(vectors);
    }

    /// Exact cosine of `q` against the given columns (all columns when `subset` is null).
    std::vector<ScoredItem> score_all(const Embedding& q, const std::vector<std::size_t>* subset = nullptr) const {
        if (q.size() != vectors_.rows()) throw PreconditionError("query dimension does not match index");
        const double qn = q.norm();
        if (qn == 0.0) throw PreconditionError("query vector is zero");
        std::vector<ScoredItem> out;
        const std::size_t n = subset ? subset->size() : items_.size();
        out.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t j = subset ? (*subset)[k] : k;
            const auto col = vectors_.col(static_cast<Eigen::Index>(j)).template cast<double>();
            const double cn = col.norm();
            if (cn == 0.0) throw DataError("zero vector stored for " + items_[j].item_id);
            out.push_back({j, items_[j].item_id, std::clamp(col.dot(q) / (cn * qn), -1.0, 1.0)});
        }
        return out;
    }

    /// The min(m, candidates) best items in ranking order. m must be >= 1.
    std::vector<ScoredItem> top_m(const Embedding& q, std::size_t m, const std::vector<std::size_t>* subset = nullptr) const {
        if (m == 0) throw PreconditionError("top_m: m must be at least 1");
        auto scored = score_all(q, subset);
        const auto keep = std::min(m, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), ranks_before);
        scored.resize(keep);
        return scored;
    }

private:
    std::vector<IndexedItem> items_;
    Matrix vectors_;
};

using VectorTable = BasicVectorTable<float>;

enum class NodeEmbedding { MeanOfKnowledge, ConcatenatedText };

struct IndexOptions {
    NodeEmbedding node_embedding = NodeEmbedding::MeanOfKnowledge;
    std::size_t batch_size = 32;
    std::size_t workers = 4;
};

/// Node and knowledge embeddings for one temporal view.
struct SubgraphIndex {
    std::optional<TimeLabel> time_label;
    VectorTable nodes;
    VectorTable knowledge;
    /// Entity name → columns of `knowledge` owned by it.
    std::map<std::string, std::vector<std::size_t>, std::less<>> knowledge_by_owner;
    std::vector<std::string> warnings;

    std::size_t dim() const noexcept { return nodes.dim(); }
    bool empty() const noexcept { return nodes.empty(); }
};

/// Stable item ids.
std::string node_item_id(std::string_view entity);
std::string knowledge_item_id(std::string_view entity, std::size_t position);

/// Embeds every knowledge unit of the view once; each node vector is the
/// L2-normalized mean of its knowledge vectors (or the embedding of the
/// concatenated knowledge, when configured). A zero mean falls back to the
/// first knowledge vector and records a warning.
SubgraphIndex build_index(const TemporalSubgraph& sub, EmbeddingProvider& em, const IndexOptions& options = {});

/// Embeds chunk texts for the chunk-only comparison retriever.
VectorTable build_chunk_table(const ChunkStore& chunks, EmbeddingProvider& em, const IndexOptions& options = {});

/// `<stem>` is a time label, "all", or "chunks".
std::string index_stem(const std::optional<TimeLabel>& t);

/// `<dir>/<stem>.vec` (little-endian float32, nodes then knowledge) plus
/// `<dir>/<stem>.manifest.json`.
void save_index(const SubgraphIndex& index, const std::filesystem::path& dir);
SubgraphIndex load_index(const std::filesystem::path& dir, const std::string& stem);
void save_table(const VectorTable& table, const std::filesystem::path& dir, const std::string& stem);
VectorTable load_table(const std::filesystem::path& dir, const std::string& stem);

/// Every per-period index, the all-periods index and (optionally) the chunk table.
struct IndexSet {
    std::map<TimeLabel, SubgraphIndex> by_time;
    SubgraphIndex all;
    std::optional<VectorTable> chunks;

    /// The index for a period or the all-periods one; null when the period has no index.
    const SubgraphIndex* find(const std::optional<TimeLabel>& t) const;
};

IndexSet build_index_set(const TemporalGraph& graph, EmbeddingProvider& em, const IndexOptions& options = {});
void save_index_set(const IndexSet& set, const std::filesystem::path& dir);
/// Throws StateError when the directory holds no all-periods index.
IndexSet load_index_set(const std::filesystem::path& dir);

}  // namespace tgrag
