#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tgrag/providers.hpp"
#include "tgrag/retriever.hpp"
#include "tgrag/tokenizer.hpp"
#include "tgrag/tqd.hpp"

namespace tgrag {

struct ContextBundle {
    std::string knowledge_section;
    std::string relations_section;
    std::string sources_section;
    /// Tokens of the knowledge and relations sections together.
    std::size_t total_graph_tokens = 0;
    std::size_t knowledge_rows = 0;
    std::size_t relation_rows = 0;
    /// Rows offered before truncation.
    std::size_t knowledge_available = 0;
    std::size_t relation_available = 0;
    std::vector<std::string> warnings;

    bool empty() const noexcept {
        return knowledge_section.empty() && relations_section.empty() && sources_section.empty();
    }
    /// Knowledge, then relations, then sources.
    std::string render() const;
    nlohmann::json to_json() const;
};

/// Concatenates the passes of a fanned-out sub-query into one result:
/// knowledge re-ranked by score, relations and texts in pass order without duplicates.
RetrievalResult merge_results(const std::vector<RetrievalResult>& passes);

/// Serializes knowledge (entity | time | description) then relations
/// (source | target | description) as Markdown tables, appending rows in rank
/// order while the two sections together stay within `budget` tokens. The
/// first row that does not fit ends the graph context. Source texts are
/// appended verbatim outside the budget.
ContextBundle assemble_context(const RetrievalResult& r, std::size_t budget,
                               const Tokenizer& tokenizer = default_tokenizer());

struct SubAnswer {
    SubQuery sub;
    std::string answer;
    bool abstained = false;
    /// sha256 of the rendered context.
    std::string context_digest;
    bool llm_called = false;
};

struct FinalAnswer {
    std::string query;
    std::string answer;
    std::vector<SubAnswer> sub_answers;
    /// False when the single-sub-query short-circuit returned the sub-answer as is.
    bool synthesized = false;
};

struct GenerationOptions {
    int max_tokens = 1024;
    double temperature = 0.2;
    /// One original sub-query skips the synthesis call.
    bool short_circuit = true;
};

/// Case-insensitive search for the abstention phrase.
bool is_abstention(std::string_view answer);

/// Answers one sub-query from its context. An empty context abstains without a model call.
SubAnswer answer_subquery(const SubQuery& sub, const ContextBundle& ctx, ChatProvider& llm,
                          const GenerationOptions& options = {});

/// `{"<sub-question>": "<answer>", ...}` in sub-query order.
std::string render_qa_dict(const std::vector<SubAnswer>& subs);

FinalAnswer finalize(std::string_view query, std::vector<SubAnswer> subs, ChatProvider& llm,
                     const GenerationOptions& options = {});

struct AnswerOptions {
    RetrievalConfig retrieval;
    DecomposeOptions decomposition;
    GenerationOptions generation;
    /// Off answers the query as one sub-query.
    bool decompose = true;
    std::size_t workers = 4;
};

struct SubQueryTrace {
    SubQuery sub;
    std::vector<RetrievalResult> passes;
    ContextBundle context;
};

struct QueryOutcome {
    FinalAnswer final;
    DecompositionResult decomposition;
    std::vector<SubQueryTrace> subs;
    std::chrono::milliseconds elapsed{0};

    std::size_t retrieval_passes() const;
    nlohmann::json trace() const;
    /// `{query, final, subs: [{time, question, answer, abstained}]}`.
    nlohmann::ordered_json answer_record() const;
};

/// decompose → retrieve per sub-query → answer per sub-query → finalize.
QueryOutcome answer(std::string_view query, const RetrievalState& state, ChatProvider& llm, EmbeddingProvider& em,
                    const AnswerOptions& options = {});

}  // namespace tgrag
