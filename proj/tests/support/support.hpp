#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "tgrag/benchgen.hpp"
#include "tgrag/corpus.hpp"
#include "tgrag/extract.hpp"
#include "tgrag/generate.hpp"
#include "tgrag/kgraph.hpp"
#include "tgrag/retriever.hpp"
#include "tgrag/vectorindex.hpp"

namespace tgrag::testing {

std::filesystem::path fixture_path(const std::string& name);

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

// --- random temporal graphs ------------------------------------------------

/// (owner, time, text); owner is "A->B" for relation units.
using UnitKey = std::tuple<std::string, long, std::string>;

/// Extraction outputs for a random graph with at most `max_entities` entities
/// over at most `max_years` periods. Texts repeat on purpose so merging is exercised.
std::vector<ExtractionOutput> random_extractions(std::mt19937& rng, std::size_t max_entities, std::size_t max_years);
TemporalGraph build_graph(const std::vector<ExtractionOutput>& outputs);

std::multiset<UnitKey> knowledge_multiset(const TemporalGraph& g);
std::multiset<UnitKey> knowledge_multiset(const TemporalSubgraph& s);

// --- retrieval oracles -----------------------------------------------------

/// Index with small-integer vectors so exact score ties are common.
SubgraphIndex random_index(std::mt19937& rng, std::size_t max_items, Embedding& query);

/// Plain-loop cosine over the stored float values.
double naive_cosine(const Eigen::VectorXf& a, const Embedding& b);

std::vector<ScoredEntity> oracle_candidates(const SubgraphIndex& index, const Embedding& q, std::size_t n);
std::vector<ScoredKnowledge> oracle_knowledge(const SubgraphIndex& index, const std::vector<ScoredEntity>& candidates,
                                              const Embedding& q, std::size_t k);

/// Exhaustive source-text scoring: count of one-hop scope entities whose
/// knowledge cites each chunk of the view, full sort, top t with score ≥ 1.
std::vector<std::pair<std::string, std::size_t>> oracle_source_texts(const std::set<std::string>& valid,
                                                                     const TemporalGraph& graph,
                                                                     const ChunkStore& chunks,
                                                                     const std::optional<TimeLabel>& t, std::size_t top);

// --- context ---------------------------------------------------------------

RetrievalResult random_retrieval_result(std::mt19937& rng);

/// Empty when the bundle is a maximal rank-order prefix of the unbounded
/// assembly within budget; otherwise a description of the first violation.
std::string check_budget_prefix(const RetrievalResult& r, std::size_t budget);

// --- TEK -------------------------------------------------------------------

/// Three periods of key points where some points are planted near-duplicates
/// of a point in another period.
std::map<TimeLabel, std::vector<KeyPoint>> planted_keypoints(std::mt19937& rng, std::size_t per_year, std::size_t dim);

/// All-pairs cosine linking.
std::vector<TekChain> oracle_tek(const std::map<TimeLabel, std::vector<KeyPoint>>& points, double threshold);

bool same_chains(const std::vector<TekChain>& a, const std::vector<TekChain>& b);

// --- end to end ------------------------------------------------------------

inline constexpr const char* kSingleQuery = "How many units did the Audi Group deliver in 2022?";
inline constexpr const char* kDualQuery = "How many units did the Audi Group deliver in 2022 and 2023, respectively?";
inline constexpr const char* kNonTimeQuery = "Which site runs the Aluminum Closed Loop process?";

/// A small graph where AUDI GROUP carries different delivery figures per year.
struct DeliveriesFixture {
    TemporalGraph graph;
    ChunkStore chunks;
    IndexSet indexes;
    RetrievalState state() const { return {&graph, &indexes, &chunks}; }
};
DeliveriesFixture deliveries_fixture(EmbeddingProvider& em);

}  // namespace tgrag::testing
