#include "tgrag/evalharness.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tgrag/json_io.hpp"
#include "tgrag/parallel.hpp"
#include "tgrag/prompts.hpp"

namespace tgrag {

namespace {

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string reference_text(const QAItem& qa) {
    std::string out;
    for (const auto& [t, text] : qa.evidence) {
        if (!out.empty()) out += "\n\n";
        if (qa.evidence.size() > 1) out += "[" + t.raw() + "] ";
        out += text;
    }
    return out;
}

}  // namespace

std::optional<int> parse_judge_score(std::string_view raw) {
    constexpr std::string_view marker = "correctness:";
    std::string lower(raw);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    const auto pos = lower.rfind(marker);
    if (pos == std::string::npos) return std::nullopt;
    std::size_t i = pos + marker.size();
    while (i < raw.size() && (std::isspace(static_cast<unsigned char>(raw[i])) || raw[i] == '*')) ++i;
    if (i >= raw.size() || (raw[i] != '0' && raw[i] != '1')) return std::nullopt;
    // "10" or "1.5" are not binary scores.
    if (i + 1 < raw.size() && (std::isdigit(static_cast<unsigned char>(raw[i + 1])) || raw[i + 1] == '.') &&
        !(raw[i + 1] == '.' && (i + 2 >= raw.size() || !std::isdigit(static_cast<unsigned char>(raw[i + 2]))))) {
        return std::nullopt;
    }
    return raw[i] - '0';
}

int judge_once(const QAItem& qa, std::string_view sys_ans, ChatProvider& llm, const JudgeOptions& options) {
    if (blank(sys_ans)) return 0;
    ChatRequest req;
    req.user_prompt = prompts::render(prompts::kJudge, {{"question", qa.question},
                                                        {"sys_ans", std::string(sys_ans)},
                                                        {"ref_ans", qa.answer},
                                                        {"ref_text", reference_text(qa)}});
    req.max_tokens = options.max_tokens;
    req.temperature = options.temperature;
    req.request_id = "judge " + qa.qa_id;
    const std::string raw = llm.chat(req);
    const auto score = parse_judge_score(raw);
    if (!score) throw JudgeError("judge output for " + qa.qa_id + " has no binary Correctness score", raw);
    return *score;
}

std::optional<int> majority(const std::vector<std::optional<int>>& runs) {
    std::size_t failed = 0;
    std::size_t ones = 0;
    for (const auto& r : runs) {
        if (!r) {
            ++failed;
        } else if (*r == 1) {
            ++ones;
        }
    }
    if (failed >= 2) return std::nullopt;
    return ones >= 2 ? 1 : 0;
}

EvalVerdict judge_majority(const QAItem& qa, std::string_view sys_ans, ChatProvider& llm, const JudgeOptions& options) {
    EvalVerdict v;
    v.qa_id = qa.qa_id;
    v.time_class = qa.time_class;
    v.system_answer = std::string(sys_ans);
    for (std::size_t i = 0; i < options.runs; ++i) {
        try {
            v.runs.emplace_back(judge_once(qa, sys_ans, llm, options));
        } catch (const JudgeError& e) {
            spdlog::warn("{}", e.what());
            v.runs.emplace_back(std::nullopt);
        } catch (const ProviderError& e) {
            spdlog::warn("judge run {} for {} failed: {}", i + 1, qa.qa_id, e.what());
            v.runs.emplace_back(std::nullopt);
        }
    }
    v.verdict = majority(v.runs);
    return v;
}

EvalReport aggregate(const std::vector<EvalVerdict>& verdicts, std::string mode) {
    EvalReport r;
    r.mode = std::move(mode);
    std::set<std::string> failures;
    for (const auto& v : verdicts) {
        if (!v.answer_error.empty()) failures.insert(v.qa_id);
        if (!v.verdict) {
            failures.insert(v.qa_id);
            continue;
        }
        auto& cs = r.per_class[v.time_class];
        ++cs.total;
        ++r.overall.total;
        if (*v.verdict == 1) {
            ++cs.correct;
            ++r.overall.correct;
        }
    }
    for (auto& [cls, cs] : r.per_class) cs.accuracy = 100.0 * static_cast<double>(cs.correct) / static_cast<double>(cs.total);
    if (r.overall.total > 0) {
        r.overall.accuracy = 100.0 * static_cast<double>(r.overall.correct) / static_cast<double>(r.overall.total);
    }
    r.failures.assign(failures.begin(), failures.end());
    return r;
}

ordered_json EvalReport::to_json() const {
    ordered_json j;
    j["mode"] = mode;
    ordered_json classes = ordered_json::object();
    for (const auto& [cls, cs] : per_class) {
        classes[std::string(to_string(cls))] = {{"total", cs.total}, {"correct", cs.correct}, {"accuracy", cs.accuracy}};
    }
    j["classes"] = std::move(classes);
    j["overall"] = {{"total", overall.total}, {"correct", overall.correct}, {"accuracy", overall.accuracy}};
    j["failures"] = failures;
    return j;
}

std::string EvalReport::table() const {
    std::string out = fmt::format("{:<8} {:>7} {:>7} {:>9}\n", "class", "correct", "total", "accuracy");
    for (const auto& [cls, cs] : per_class) {
        out += fmt::format("{:<8} {:>7} {:>7} {:>8.1f}%\n", to_string(cls), cs.correct, cs.total, cs.accuracy);
    }
    out += fmt::format("{:<8} {:>7} {:>7} {:>8.1f}%\n", "overall", overall.correct, overall.total, overall.accuracy);
    if (!failures.empty()) out += fmt::format("failures: {}\n", failures.size());
    return out;
}

EvalResult evaluate(const std::vector<QAItem>& dataset, const Answerer& answerer, ChatProvider& judge, const EvalOptions& options) {
    if (dataset.empty()) throw PreconditionError("evaluate: empty dataset");
    EvalResult res;
    res.verdicts.resize(dataset.size());
    parallel_for(dataset.size(), options.workers, [&](std::size_t i) {
        const QAItem& qa = dataset[i];
        std::string ans;
        std::string err;
        try {
            ans = answerer(qa);
        } catch (const std::exception& e) {
            err = e.what();
            spdlog::warn("answering {} failed: {}", qa.qa_id, err);
        }
        EvalVerdict v = judge_majority(qa, ans, judge, options.judge);
        v.answer_error = std::move(err);
        res.verdicts[i] = std::move(v);
    });
    res.report = aggregate(res.verdicts, options.mode);
    return res;
}

std::string verdicts_to_jsonl(const std::vector<EvalVerdict>& verdicts) {
    std::string out;
    for (const auto& v : verdicts) {
        ordered_json j;
        j["qa_id"] = v.qa_id;
        j["time_class"] = std::string(to_string(v.time_class));
        ordered_json runs = ordered_json::array();
        for (const auto& r : v.runs) runs.push_back(r ? ordered_json(*r) : ordered_json(nullptr));
        j["runs"] = std::move(runs);
        j["verdict"] = v.verdict ? ordered_json(*v.verdict) : ordered_json(nullptr);
        j["system_answer"] = v.system_answer;
        j["answer_error"] = v.answer_error;
        out += j.dump() + "\n";
    }
    return out;
}

void save_eval(const EvalResult& result, const std::filesystem::path& dir) {
    write_file(dir / "verdicts.jsonl", verdicts_to_jsonl(result.verdicts));
    write_file(dir / "report.json", result.report.to_json().dump(2) + "\n");
}

std::vector<EvalVerdict> load_verdicts(const std::filesystem::path& path) {
    std::vector<EvalVerdict> out;
    const auto rows = read_jsonl(path);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& j = rows[i];
        try {
            EvalVerdict v;
            v.qa_id = j.at("qa_id").get<std::string>();
            v.time_class = time_class_from_string(j.at("time_class").get<std::string>());
            for (const auto& r : j.at("runs")) v.runs.push_back(r.is_null() ? std::nullopt : std::optional<int>(r.get<int>()));
            if (!j.at("verdict").is_null()) v.verdict = j["verdict"].get<int>();
            v.system_answer = j.at("system_answer").get<std::string>();
            v.answer_error = j.at("answer_error").get<std::string>();
            out.push_back(std::move(v));
        } catch (const json::exception& e) {
            throw DataError(path.string() + " record " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

EvalMode eval_mode_from_string(std::string_view s) {
    if (s == "tgrag") return EvalMode::TGRAG;
    if (s == "norag") return EvalMode::NoRag;
    if (s == "vanilla") return EvalMode::Vanilla;
    throw ConfigError("unknown eval mode \"" + std::string(s) + "\" (expected tgrag, norag or vanilla)");
}

std::string_view to_string(EvalMode m) {
    switch (m) {
        case EvalMode::TGRAG: return "tgrag";
        case EvalMode::NoRag: return "norag";
        case EvalMode::Vanilla: return "vanilla";
    }
    return "?";
}

std::string norag_answer(std::string_view question, ChatProvider& llm, const GenerationOptions& options) {
    ChatRequest req;
    req.user_prompt = prompts::render(prompts::kBareQuestion, {{"question", std::string(question)}});
    req.max_tokens = options.max_tokens;
    req.temperature = options.temperature;
    req.request_id = "norag";
    return llm.chat(req);
}

std::string vanilla_answer(std::string_view question, const VectorTable& chunks, EmbeddingProvider& em, ChatProvider& llm,
                           std::size_t t, const GenerationOptions& options) {
    ContextBundle ctx;
    if (!chunks.empty()) {
        const Embedding q = em.embed_one(std::string(question));
        ctx.sources_section = "-----Sources-----\n";
        for (const auto& s : chunks.top_m(q, t)) {
            const IndexedItem& it = chunks.items()[s.column];
            ctx.sources_section += "### " + it.item_id + " (" + (it.time_label ? it.time_label->raw() : "") + ")\n" + it.payload_text;
            if (ctx.sources_section.back() != '\n') ctx.sources_section += '\n';
        }
    }
    SubQuery sub{std::nullopt, std::string(question), SubQueryOrigin::Original};
    return answer_subquery(sub, ctx, llm, options).answer;
}

}  // namespace tgrag
