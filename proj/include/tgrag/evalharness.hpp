#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tgrag/benchgen.hpp"
#include "tgrag/generate.hpp"
#include "tgrag/providers.hpp"
#include "tgrag/retriever.hpp"

namespace tgrag {

class JudgeError : public DataError {
public:
    JudgeError(const std::string& what, std::string raw_output) : DataError(what), raw_output_(std::move(raw_output)) {}
    const std::string& raw_output() const noexcept { return raw_output_; }

private:
    std::string raw_output_;
};

/// Score after the last "Correctness:" marker, when it is 0 or 1.
std::optional<int> parse_judge_score(std::string_view raw);

struct JudgeOptions {
    std::size_t runs = 3;
    /// Live judges sample; mocks ignore it.
    double temperature = 0.7;
    int max_tokens = 64;
};

/// 0 or 1. An empty (after trim) system answer scores 0 without a model call.
/// Throws JudgeError on unparseable judge output.
int judge_once(const QAItem& qa, std::string_view sys_ans, ChatProvider& llm, const JudgeOptions& options = {});

struct EvalVerdict {
    std::string qa_id;
    TimeClass time_class = TimeClass::Single;
    /// nullopt marks a failed judge run.
    std::vector<std::optional<int>> runs;
    /// nullopt when fewer than two runs succeeded.
    std::optional<int> verdict;
    std::string system_answer;
    /// Set when answering failed (the answer is then scored as empty).
    std::string answer_error;

    bool operator==(const EvalVerdict&) const = default;
};

/// 1 when at least two runs are 1; nullopt when two or more runs failed.
std::optional<int> majority(const std::vector<std::optional<int>>& runs);

EvalVerdict judge_majority(const QAItem& qa, std::string_view sys_ans, ChatProvider& llm, const JudgeOptions& options = {});

struct ClassStats {
    std::size_t total = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
};

struct EvalReport {
    std::string mode;
    /// Classes without judged items are absent.
    std::map<TimeClass, ClassStats> per_class;
    ClassStats overall;
    /// Items whose answer or verdict failed, sorted.
    std::vector<std::string> failures;

    nlohmann::ordered_json to_json() const;
    std::string table() const;
};

/// Pure fold over verdicts. Items without a verdict are excluded from totals
/// and listed as failures, as are items whose answering failed.
EvalReport aggregate(const std::vector<EvalVerdict>& verdicts, std::string mode = "");

using Answerer = std::function<std::string(const QAItem&)>;

struct EvalOptions {
    JudgeOptions judge;
    std::size_t workers = 4;
    std::string mode = "tgrag";
};

struct EvalResult {
    std::vector<EvalVerdict> verdicts;
    EvalReport report;
};

/// Answers and judges every item; per-item errors are recorded and evaluation continues.
EvalResult evaluate(const std::vector<QAItem>& dataset, const Answerer& answerer, ChatProvider& judge,
                    const EvalOptions& options = {});

std::string verdicts_to_jsonl(const std::vector<EvalVerdict>& verdicts);
void save_eval(const EvalResult& result, const std::filesystem::path& dir);
std::vector<EvalVerdict> load_verdicts(const std::filesystem::path& path);

enum class EvalMode { TGRAG, NoRag, Vanilla };
EvalMode eval_mode_from_string(std::string_view s);
std::string_view to_string(EvalMode m);

/// Bare question to the model, no retrieval.
std::string norag_answer(std::string_view question, ChatProvider& llm, const GenerationOptions& options = {});

/// Top-t chunks by cosine to the question, answered with the sub-answer prompt.
std::string vanilla_answer(std::string_view question, const VectorTable& chunks, EmbeddingProvider& em, ChatProvider& llm,
                           std::size_t t, const GenerationOptions& options = {});

}  // namespace tgrag
