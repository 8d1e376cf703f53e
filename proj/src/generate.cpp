#include "tgrag/generate.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "tgrag/hashing.hpp"
#include "tgrag/json_io.hpp"
#include "tgrag/parallel.hpp"
#include "tgrag/prompts.hpp"

namespace tgrag {

namespace {

constexpr std::string_view kKnowledgeHeader = "-----Knowledge-----\n| entity | time | description |\n|---|---|---|\n";
constexpr std::string_view kRelationsHeader = "-----Relationships-----\n| source | target | description |\n|---|---|---|\n";

std::string cell(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '|') {
            out += "\\|";
        } else if (c == '\n' || c == '\r' || c == '\t') {
            out += ' ';
        } else {
            out += c;
        }
    }
    return out;
}

std::string row(std::string_view a, std::string_view b, std::string_view c) {
    return "| " + cell(a) + " | " + cell(b) + " | " + cell(c) + " |\n";
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string time_string(const SubQuery& sub) { return sub.time ? sub.time->raw : std::string("NONE"); }

}  // namespace

std::string ContextBundle::render() const {
    std::string out;
    for (const std::string* s : {&knowledge_section, &relations_section, &sources_section}) {
        if (s->empty()) continue;
        if (!out.empty()) out += "\n";
        out += *s;
    }
    return out;
}

json ContextBundle::to_json() const {
    return {{"knowledge_rows", knowledge_rows},
            {"knowledge_available", knowledge_available},
            {"relation_rows", relation_rows},
            {"relation_available", relation_available},
            {"total_graph_tokens", total_graph_tokens},
            {"warnings", warnings},
            {"order", json::array({"knowledge", "relations", "sources"})},
            {"context", render()}};
}

RetrievalResult merge_results(const std::vector<RetrievalResult>& passes) {
    if (passes.size() == 1) return passes.front();
    RetrievalResult m;
    if (passes.empty()) return m;
    m.subquery = passes.front().subquery;
    m.no_evidence = std::all_of(passes.begin(), passes.end(), [](const RetrievalResult& r) { return r.no_evidence; });
    std::set<std::string> seen_nodes;
    std::set<std::tuple<std::string, std::string, std::string>> seen_rel;
    std::set<std::string> seen_chunks;
    for (const auto& p : passes) {
        m.candidates.insert(m.candidates.end(), p.candidates.begin(), p.candidates.end());
        m.knowledge_pool_size += p.knowledge_pool_size;
        m.valid_knowledge.insert(m.valid_knowledge.end(), p.valid_knowledge.begin(), p.valid_knowledge.end());
        for (const auto& v : p.valid_relations) {
            const std::string times = v.knowledge.empty() ? "" : v.knowledge.front().time_label.raw();
            if (seen_rel.emplace(v.source, v.target, times).second) m.valid_relations.push_back(v);
        }
        for (const auto& c : p.valid_texts) {
            if (seen_chunks.insert(c.chunk.chunk_id).second) m.valid_texts.push_back(c);
        }
        m.source_scope.insert(m.source_scope.end(), p.source_scope.begin(), p.source_scope.end());
    }
    std::stable_sort(m.valid_knowledge.begin(), m.valid_knowledge.end(), [](const ScoredKnowledge& a, const ScoredKnowledge& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.item_id < b.item_id;
    });
    for (const auto& u : m.valid_knowledge) {
        if (seen_nodes.insert(u.owner).second) m.valid_nodes.push_back(u.owner);
    }
    return m;
}

ContextBundle assemble_context(const RetrievalResult& r, std::size_t budget, const Tokenizer& tokenizer) {
    if (budget == 0) throw PreconditionError("assemble_context: budget must be positive");
    ContextBundle b;
    struct Row {
        bool knowledge;
        std::string text;
    };
    std::vector<Row> rows;
    for (const auto& u : r.valid_knowledge) rows.push_back({true, row(u.owner, u.time_label.raw(), u.text)});
    for (const auto& rel : r.valid_relations) {
        for (const auto& u : rel.knowledge) rows.push_back({false, row(rel.source, rel.target, u.text)});
    }
    b.knowledge_available = r.valid_knowledge.size();
    b.relation_available = rows.size() - b.knowledge_available;

    std::size_t used = 0;
    for (const auto& rw : rows) {
        std::string& section = rw.knowledge ? b.knowledge_section : b.relations_section;
        const std::string piece = section.empty() ? std::string(rw.knowledge ? kKnowledgeHeader : kRelationsHeader) + rw.text
                                                  : rw.text;
        const std::size_t cost = tokenizer.count(piece);
        if (used + cost > budget) {
            if (b.knowledge_rows + b.relation_rows == 0) {
                b.warnings.push_back("graph token budget " + std::to_string(budget) + " is too small for the first row");
                spdlog::warn("{}", b.warnings.back());
            }
            break;
        }
        section += piece;
        used += cost;
        ++(rw.knowledge ? b.knowledge_rows : b.relation_rows);
    }
    b.total_graph_tokens = tokenizer.count(b.knowledge_section) + tokenizer.count(b.relations_section);

    if (!r.valid_texts.empty()) {
        b.sources_section = "-----Sources-----\n";
        for (const auto& c : r.valid_texts) {
            b.sources_section += "### " + c.chunk.chunk_id + " (" + c.chunk.time_label.raw() + ")\n" + c.chunk.text;
            if (b.sources_section.back() != '\n') b.sources_section += '\n';
        }
    }
    return b;
}

bool is_abstention(std::string_view answer) {
    std::string a = lower(answer);
    // Curly apostrophes are common in model output.
    for (std::size_t p; (p = a.find("\xE2\x80\x99")) != std::string::npos;) a.replace(p, 3, "'");
    return a.find(lower(prompts::kAbstention)) != std::string::npos;
}

SubAnswer answer_subquery(const SubQuery& sub, const ContextBundle& ctx, ChatProvider& llm, const GenerationOptions& options) {
    SubAnswer out;
    out.sub = sub;
    const std::string context = ctx.render();
    out.context_digest = sha256_hex(context);
    if (ctx.knowledge_rows + ctx.relation_rows == 0 && ctx.sources_section.empty()) {
        out.answer = std::string(prompts::kAbstention);
        out.abstained = true;
        return out;
    }
    ChatRequest req;
    req.user_prompt = prompts::render(prompts::kSubAnswer, {{"question", sub.text}, {"context_data", context}});
    req.max_tokens = options.max_tokens;
    req.temperature = options.temperature;
    req.request_id = "sub[" + time_string(sub) + "] " + sub.text;
    try {
        out.answer = llm.chat(req);
    } catch (const ProviderError& e) {
        throw ProviderError("answering sub-query \"" + sub.text + "\": " + e.what(), e.request_id());
    }
    out.llm_called = true;
    out.abstained = is_abstention(out.answer);
    return out;
}

std::string render_qa_dict(const std::vector<SubAnswer>& subs) {
    ordered_json d = ordered_json::object();
    for (const auto& s : subs) {
        std::string key = s.sub.text;
        for (int i = 2; d.contains(key); ++i) key = s.sub.text + " (" + std::to_string(i) + ")";
        d[key] = s.answer;
    }
    return d.dump();
}

FinalAnswer finalize(std::string_view query, std::vector<SubAnswer> subs, ChatProvider& llm, const GenerationOptions& options) {
    if (subs.empty()) throw PreconditionError("finalize: no sub-answers");
    FinalAnswer f;
    f.query = std::string(query);
    if (options.short_circuit && subs.size() == 1 && subs.front().sub.origin == SubQueryOrigin::Original) {
        f.answer = subs.front().answer;
        f.sub_answers = std::move(subs);
        return f;
    }
    ChatRequest req;
    req.user_prompt = prompts::render(prompts::kFinalAnswer, {{"question", f.query}, {"qa_dict", render_qa_dict(subs)}});
    req.max_tokens = options.max_tokens;
    req.temperature = options.temperature;
    req.request_id = "final";
    f.answer = llm.chat(req);
    f.synthesized = true;
    f.sub_answers = std::move(subs);
    return f;
}

std::size_t QueryOutcome::retrieval_passes() const {
    std::size_t n = 0;
    for (const auto& s : subs) n += s.passes.size();
    return n;
}

json QueryOutcome::trace() const {
    json j;
    j["query"] = final.query;
    j["decomposition"] = {{"llm_called", decomposition.llm_called},
                          {"raw_output", decomposition.raw_llm_output},
                          {"malformed_records", decomposition.malformed_records},
                          {"fell_back", decomposition.fell_back}};
    json subs_j = json::array();
    for (std::size_t i = 0; i < subs.size(); ++i) {
        const auto& s = subs[i];
        json passes = json::array();
        for (const auto& p : s.passes) passes.push_back(p.to_json());
        json sj;
        sj["time"] = s.sub.time ? json(s.sub.time->raw) : json(nullptr);
        sj["question"] = s.sub.text;
        sj["origin"] = s.sub.origin == SubQueryOrigin::Original ? "original" : "decomposed";
        sj["passes"] = std::move(passes);
        sj["context"] = s.context.to_json();
        if (i < final.sub_answers.size()) {
            sj["answer"] = final.sub_answers[i].answer;
            sj["abstained"] = final.sub_answers[i].abstained;
            sj["context_digest"] = final.sub_answers[i].context_digest;
        }
        subs_j.push_back(std::move(sj));
    }
    j["subqueries"] = std::move(subs_j);
    j["retrieval_passes"] = retrieval_passes();
    j["synthesized"] = final.synthesized;
    j["final"] = final.answer;
    j["elapsed_ms"] = elapsed.count();
    return j;
}

ordered_json QueryOutcome::answer_record() const {
    ordered_json rec;
    rec["query"] = final.query;
    rec["final"] = final.answer;
    ordered_json subs_j = ordered_json::array();
    for (const auto& s : final.sub_answers) {
        ordered_json sj;
        sj["time"] = s.sub.time ? ordered_json(s.sub.time->raw) : ordered_json(nullptr);
        sj["question"] = s.sub.text;
        sj["answer"] = s.answer;
        sj["abstained"] = s.abstained;
        subs_j.push_back(std::move(sj));
    }
    rec["subs"] = std::move(subs_j);
    return rec;
}

QueryOutcome answer(std::string_view query, const RetrievalState& state, ChatProvider& llm, EmbeddingProvider& em,
                    const AnswerOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    QueryOutcome out;
    const std::string qtag = "query \"" + std::string(query.substr(0, 80)) + "\": ";
    try {
        out.decomposition = options.decompose ? decompose(query, llm, options.decomposition) : no_decomposition(query);
    } catch (const DecompositionError&) {
        throw;
    } catch (const ProviderError& e) {
        throw ProviderError(qtag + "decomposition: " + e.what(), e.request_id());
    }

    const auto& subs = out.decomposition.subqueries;
    out.subs.resize(subs.size());
    std::vector<SubAnswer> answers(subs.size());
    parallel_for(subs.size(), options.workers, [&](std::size_t i) {
        SubQueryTrace& tr = out.subs[i];
        tr.sub = subs[i];
        tr.passes = retrieve(subs[i], state, em, options.retrieval);
        tr.context = assemble_context(merge_results(tr.passes), options.retrieval.graph_token_budget);
        answers[i] = answer_subquery(subs[i], tr.context, llm, options.generation);
    });
    try {
        out.final = finalize(query, std::move(answers), llm, options.generation);
    } catch (const ProviderError& e) {
        throw ProviderError(qtag + "final answer: " + e.what(), e.request_id());
    }
    out.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return out;
}

}  // namespace tgrag
