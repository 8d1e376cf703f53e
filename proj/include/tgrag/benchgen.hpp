#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tgrag/corpus.hpp"
#include "tgrag/errors.hpp"
#include "tgrag/providers.hpp"

namespace tgrag {

/// Unusable model output while building a dataset; keeps the raw text.
class GenerationError : public DataError {
public:
    GenerationError(const std::string& what, std::string raw_output)
        : DataError(what), raw_output_(std::move(raw_output)) {}
    const std::string& raw_output() const noexcept { return raw_output_; }

private:
    std::string raw_output_;
};

struct KeyPoint {
    std::string point_id;
    TimeLabel time_label;
    std::string text;
    std::string source_chunk;
    /// Empty until embedded.
    Embedding vector;
};

struct TekLink {
    KeyPoint point;
    double similarity = 0.0;
};

/// Anchor from the latest period plus at most one link per earlier period,
/// latest first.
struct TekChain {
    KeyPoint anchor;
    std::vector<TekLink> links;

    std::size_t time_points() const noexcept { return links.size() + 1; }
};

enum class TimeClass { Single, Dual, Multi, Non };

std::string_view to_string(TimeClass c);
/// Accepts single, dual, multi, non. Throws ConfigError otherwise.
TimeClass time_class_from_string(std::string_view s);
/// Comma-separated list; "all" selects every class.
std::set<TimeClass> parse_time_classes(std::string_view csv);

struct QAItem {
    std::string qa_id;
    std::string question;
    std::string answer;
    TimeClass time_class = TimeClass::Single;
    std::set<TimeLabel> time_labels;
    /// Source text per period.
    std::map<TimeLabel, std::string> evidence;

    /// Throws DataError when the label count does not fit the class or a label lacks evidence.
    void validate() const;

    bool operator==(const QAItem&) const = default;
};

// --- parsing helpers ---------------------------------------------------------

/// Balanced top-level `{...}` spans of `raw`, skipping braces inside JSON strings.
std::vector<std::string_view> scan_json_objects(std::string_view raw);

/// `"key": "value"` pairs of a key-point answer in answer order. Prose around
/// the outermost braces is ignored; answers without braces are read pair by
/// pair. Throws GenerationError when nothing parses and there is no `{}`.
std::vector<std::pair<std::string, std::string>> parse_keypoints(std::string_view raw);

/// Warnings for summaries that break the plain-text requirement.
std::vector<std::string> lint_summary(std::string_view summary);

// --- pipeline steps ----------------------------------------------------------

struct BenchgenOptions {
    int max_tokens = 2048;
    double temperature = 0.0;
};

struct Summary {
    std::string text;
    std::vector<std::string> lint;
};

Summary summarize_chunk(const Chunk& chunk, ChatProvider& llm, const BenchgenOptions& options = {});

/// Key points of one summary; ids are `<chunk id>:<point key>`. No vectors yet.
std::vector<KeyPoint> extract_keypoints(std::string_view summary, const TimeLabel& time_label,
                                        const std::string& source_chunk, ChatProvider& llm,
                                        const BenchgenOptions& options = {});

void embed_keypoints(std::vector<KeyPoint>& points, EmbeddingProvider& em);

/// For every point of the latest period, walks earlier periods newest first and
/// links the period's most similar point (ties: smaller point id) when its
/// cosine is ≥ threshold. Returns chains with at least one link, in anchor order.
std::vector<TekChain> link_tek(const std::map<TimeLabel, std::vector<KeyPoint>>& points_by_year, double threshold);

struct SweepRow {
    double threshold = 0.0;
    std::size_t chains = 0;
    /// Chains spanning at least three periods.
    std::size_t multi_chains = 0;
};
std::vector<SweepRow> sweep_tek(const std::map<TimeLabel, std::vector<KeyPoint>>& points_by_year,
                                const std::vector<double>& thresholds);

struct QaBatch {
    std::vector<QAItem> items;
    /// Items rejected by the time-reference lint.
    std::size_t dropped = 0;
    std::string raw_output;
};

/// Single- or no-time QA pairs from one chunk.
QaBatch generate_chunk_qa(const Chunk& chunk, TimeClass cls, ChatProvider& llm, const BenchgenOptions& options = {});

/// Dual- or multi-time QA pair from a TEK chain. Dual uses the anchor and its
/// first link; multi uses every link and needs at least three periods.
/// Original texts come from the key points' source chunks.
QAItem generate_chain_qa(const TekChain& chain, TimeClass cls, const ChunkStore& chunks, ChatProvider& llm,
                         const BenchgenOptions& options = {});

std::string make_qa_id(TimeClass cls, std::string_view question, const std::set<TimeLabel>& labels);

// --- dataset files -----------------------------------------------------------

std::string dataset_to_jsonl(const std::vector<QAItem>& items);
void save_dataset(const std::vector<QAItem>& items, const std::filesystem::path& path);
/// Throws DataError naming the line of the first bad record.
std::vector<QAItem> load_dataset(const std::filesystem::path& path);
std::string review_markdown(const std::vector<QAItem>& items);

// --- whole build -------------------------------------------------------------

struct DatasetBuildOptions {
    std::set<TimeClass> classes{TimeClass::Single, TimeClass::Dual, TimeClass::Multi, TimeClass::Non};
    double tek_threshold = 0.75;
    /// 0 means no limit.
    std::map<TimeClass, std::size_t> max_per_class;
    BenchgenOptions generation;
    std::size_t workers = 4;
};

struct DatasetBuild {
    std::vector<QAItem> items;
    std::map<TimeClass, std::size_t> counts;
    std::size_t lint_dropped = 0;
    std::size_t chains = 0;
    /// One line per failed model step; the build keeps going.
    std::vector<std::string> failures;
    std::vector<std::string> warnings;
};

/// Summaries and embedded key points of every chunk, grouped by period.
/// Failed chunks are reported through `failures` and skipped.
std::map<TimeLabel, std::vector<KeyPoint>> collect_keypoints(const ChunkStore& chunks, ChatProvider& llm, EmbeddingProvider& em,
                                                             const DatasetBuildOptions& options,
                                                             std::vector<std::string>& failures);

/// Builds QA items from dataset-profile chunks.
DatasetBuild build_dataset(const ChunkStore& chunks, ChatProvider& llm, EmbeddingProvider& em,
                           const DatasetBuildOptions& options = {});

}  // namespace tgrag
