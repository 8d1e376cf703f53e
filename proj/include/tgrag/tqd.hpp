#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tgrag/corpus.hpp"
#include "tgrag/errors.hpp"
#include "tgrag/providers.hpp"

namespace tgrag {

/// A time constraint as written by the decomposer: one year ("2019") or an
/// inclusive range ("2021-2022").
struct TimeSpec {
    std::string raw;
    long first = 0;
    long last = 0;

    /// Throws TimeResolutionError when `s` is neither a label nor a range.
    static TimeSpec parse(std::string_view s);
    static std::optional<TimeSpec> try_parse(std::string_view s);
    bool is_range() const noexcept { return first != last; }

    bool operator==(const TimeSpec&) const = default;
};

class TimeResolutionError : public DataError {
public:
    explicit TimeResolutionError(std::string time_string)
        : DataError("cannot interpret time constraint \"" + time_string + "\""), time_string_(std::move(time_string)) {}
    const std::string& time_string() const noexcept { return time_string_; }

private:
    std::string time_string_;
};

/// Unusable decomposer output for a query that does contain years.
class DecompositionError : public DataError {
public:
    DecompositionError(const std::string& what, std::string raw_output)
        : DataError(what), raw_output_(std::move(raw_output)) {}
    const std::string& raw_output() const noexcept { return raw_output_; }

private:
    std::string raw_output_;
};

enum class SubQueryOrigin { Original, Decomposed };

struct SubQuery {
    /// nullopt means no temporal constraint (all periods).
    std::optional<TimeSpec> time;
    std::string text;
    SubQueryOrigin origin = SubQueryOrigin::Original;

    bool operator==(const SubQuery&) const = default;
};

struct DecompositionResult {
    std::vector<SubQuery> subqueries;
    std::string raw_llm_output;
    std::size_t malformed_records = 0;
    /// True when the decomposer output was unusable and the original query was kept.
    bool fell_back = false;
    bool llm_called = false;
};

struct TqdRecord {
    std::string time;
    std::string question;

    bool operator==(const TqdRecord&) const = default;
};

struct TqdParse {
    std::vector<TqdRecord> records;
    std::size_t malformed = 0;
};

inline constexpr std::string_view kSep = "<SEP>";

/// Every `[<time><SEP><question>]` group in `raw`; prose between groups is
/// ignored, quotes around the question are stripped. Bracket groups without
/// the separator or with an empty side count as malformed.
TqdParse parse_tqd_output(std::string_view raw);

/// True when `q` holds a standalone 4-digit number in 1900..2099.
bool has_year_token(std::string_view q);

/// Labels of `available` covered by the spec. Empty when none match.
std::set<TimeLabel> resolve_time(const TimeSpec& spec, const std::set<TimeLabel>& available);
std::set<TimeLabel> resolve_time(std::string_view time_string, const std::set<TimeLabel>& available);

struct DecomposeOptions {
    std::size_t max_subqueries = 8;
    /// Keep the original query instead of throwing DecompositionError.
    bool fallback_to_single = false;
    /// Replaces the bundled prompt; must contain {question}.
    std::optional<std::filesystem::path> prompt_path;
    int max_tokens = 1024;
    double temperature = 0.0;
};

DecompositionResult decompose(std::string_view q, ChatProvider& llm, const DecomposeOptions& options = {});

/// The query as a single original sub-query with no time constraint.
DecompositionResult no_decomposition(std::string_view q);

}  // namespace tgrag
