#include "tgrag/tqd.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <regex>

#include <spdlog/spdlog.h>

#include "tgrag/json_io.hpp"
#include "tgrag/prompts.hpp"

namespace tgrag {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string_view strip_quotes(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
        s = trim(s.substr(1, s.size() - 2));
    }
    return s;
}

// Range separators: hyphen, en dash, em dash, "to".
const std::regex kRange(R"(^\s*(\d{1,9})\s*(?:-|\xE2\x80\x93|\xE2\x80\x94|to)\s*(\d{1,9})\s*$)");

bool looks_like_no_constraint(std::string_view raw) {
    std::string s(trim(raw));
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s.empty() || s == "none" || s == "[]" || s == "[none]" || s.find("no temporal constraint") != std::string::npos;
}

}  // namespace

std::optional<TimeSpec> TimeSpec::try_parse(std::string_view s) {
    const std::string_view t = trim(s);
    if (auto label = TimeLabel::try_parse(t)) {
        return TimeSpec{std::string(t), label->ordinal(), label->ordinal()};
    }
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(t.begin(), t.end(), m, kRange)) return std::nullopt;
    auto a = TimeLabel::try_parse(m[1].str());
    auto b = TimeLabel::try_parse(m[2].str());
    if (!a || !b || b->ordinal() < a->ordinal()) return std::nullopt;
    return TimeSpec{std::string(t), a->ordinal(), b->ordinal()};
}

TimeSpec TimeSpec::parse(std::string_view s) {
    auto spec = try_parse(s);
    if (!spec) throw TimeResolutionError(std::string(s));
    return *spec;
}

TqdParse parse_tqd_output(std::string_view raw) {
    TqdParse out;
    std::size_t pos = 0;
    while ((pos = raw.find('[', pos)) != std::string_view::npos) {
        const std::size_t close = raw.find(']', pos + 1);
        if (close == std::string_view::npos) {
            ++out.malformed;
            break;
        }
        std::size_t end = close;
        const std::size_t sep = raw.find(kSep, pos + 1);
        if (sep == std::string_view::npos || sep > close) {
            ++out.malformed;
            pos = close + 1;
            continue;
        }
        // A quoted question may itself contain ']'.
        std::string_view after = raw.substr(sep + kSep.size());
        const std::size_t lead = after.find_first_not_of(" \t");
        if (lead != std::string_view::npos && after[lead] == '"') {
            const std::size_t q_end = after.find('"', lead + 1);
            if (q_end != std::string_view::npos) {
                const std::size_t c = raw.find(']', sep + kSep.size() + q_end + 1);
                if (c != std::string_view::npos) end = c;
            }
        }
        const std::string_view time = trim(raw.substr(pos + 1, sep - pos - 1));
        const std::string_view question = strip_quotes(raw.substr(sep + kSep.size(), end - sep - kSep.size()));
        if (time.empty() || question.empty()) {
            ++out.malformed;
        } else {
            out.records.push_back({std::string(time), std::string(question)});
        }
        pos = end + 1;
    }
    return out;
}

bool has_year_token(std::string_view q) {
    static const std::regex re(R"((^|[^0-9])(19|20)[0-9]{2}($|[^0-9]))");
    return std::regex_search(q.begin(), q.end(), re);
}

std::set<TimeLabel> resolve_time(const TimeSpec& spec, const std::set<TimeLabel>& available) {
    if (available.empty()) throw PreconditionError("resolve_time: no periods available");
    std::set<TimeLabel> out;
    for (const auto& t : available) {
        if (t.ordinal() >= spec.first && t.ordinal() <= spec.last) out.insert(t);
    }
    return out;
}

std::set<TimeLabel> resolve_time(std::string_view time_string, const std::set<TimeLabel>& available) {
    return resolve_time(TimeSpec::parse(time_string), available);
}

DecompositionResult no_decomposition(std::string_view q) {
    DecompositionResult r;
    r.subqueries.push_back({std::nullopt, std::string(q), SubQueryOrigin::Original});
    return r;
}

DecompositionResult decompose(std::string_view q, ChatProvider& llm, const DecomposeOptions& options) {
    if (trim(q).empty()) throw PreconditionError("decompose: empty query");
    if (!has_year_token(q)) return no_decomposition(q);

    std::string tmpl(prompts::kDecomposition);
    if (options.prompt_path) {
        tmpl = read_file(*options.prompt_path);
        if (tmpl.find("{question}") == std::string::npos)
            throw ConfigError("decomposition prompt " + options.prompt_path->string() + " lacks {question}");
    }
    ChatRequest req;
    req.user_prompt = prompts::render(tmpl, {{"question", std::string(q)}});
    req.max_tokens = options.max_tokens;
    req.temperature = options.temperature;
    req.request_id = "tqd";

    DecompositionResult r;
    r.llm_called = true;
    r.raw_llm_output = llm.chat(req);
    const TqdParse parsed = parse_tqd_output(r.raw_llm_output);
    r.malformed_records = parsed.malformed;

    std::set<std::string> seen;
    for (const auto& rec : parsed.records) {
        auto spec = TimeSpec::try_parse(rec.time);
        if (!spec) {
            ++r.malformed_records;
            continue;
        }
        // Duplicate periods keep the first question.
        const std::string key = std::to_string(spec->first) + "-" + std::to_string(spec->last);
        if (!seen.insert(key).second) continue;
        r.subqueries.push_back({std::move(*spec), rec.question, SubQueryOrigin::Decomposed});
    }

    auto fail = [&](const std::string& why) {
        if (!options.fallback_to_single) throw DecompositionError(why, r.raw_llm_output);
        spdlog::warn("{}; answering the query undecomposed", why);
        DecompositionResult fb = no_decomposition(q);
        fb.raw_llm_output = r.raw_llm_output;
        fb.malformed_records = r.malformed_records;
        fb.fell_back = true;
        fb.llm_called = true;
        return fb;
    };

    if (r.subqueries.size() > options.max_subqueries) {
        return fail("decomposition produced " + std::to_string(r.subqueries.size()) + " sub-queries (limit " +
                    std::to_string(options.max_subqueries) + ")");
    }
    if (r.subqueries.empty()) {
        if (r.malformed_records == 0 && looks_like_no_constraint(r.raw_llm_output)) {
            DecompositionResult none = no_decomposition(q);
            none.raw_llm_output = r.raw_llm_output;
            none.llm_called = true;
            return none;
        }
        return fail("decomposition output has no usable [<time><SEP><question>] record");
    }
    return r;
}

}  // namespace tgrag
