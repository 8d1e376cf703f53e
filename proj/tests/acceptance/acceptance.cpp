// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <functional>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "tgrag/benchgen.hpp"
#include "tgrag/cli.hpp"
#include "tgrag/config.hpp"
#include "tgrag/evalharness.hpp"
#include "tgrag/extract.hpp"
#include "tgrag/generate.hpp"
#include "tgrag/json_io.hpp"
#include "tgrag/kgraph.hpp"
#include "tgrag/tqd.hpp"

using namespace tgrag;
using namespace tgrag::testing;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Outcome c1_extraction_golden() {
    Outcome o;
    const auto t0 = Clock::now();
    ExtractionOptions opts;
    opts.delimiters.tuple = "<tuple_delimiter>";
    opts.entity_types = {"person", "technology", "mission", "organization", "location"};
    const auto out = parse_extraction(read_file(fixture_path("extraction_example.txt")), opts);
    std::set<std::string> names;
    for (const auto& e : out.entities) names.insert(e.name);
    std::set<std::string> expected;
    for (const char* n : {"Alex", "Taylor", "Jordan", "Cruz", "The Device"}) expected.insert(normalize_entity_name(n));
    if (out.entities.size() != 5 || names != expected) o.fail("entity set differs");
    if (out.relations.size() != 5) o.fail("expected 5 relationships, got " + std::to_string(out.relations.size()));
    bool found = false;
    for (const auto& r : out.relations) {
        if (r.source_name == normalize_entity_name("Taylor") && r.target_name == normalize_entity_name("The Device")) {
            found = true;
            if (r.strength != 9.0) o.fail("Taylor -> The Device strength " + std::to_string(r.strength));
        }
    }
    if (!found) o.fail("Taylor -> The Device missing");
    if (!out.malformed_lines.empty()) o.fail("malformed lines in golden output");
    const double s = seconds_since(t0);
    if (s >= 1.0) o.fail("took " + std::to_string(s) + " s");
    if (o.pass) o.detail = "5 entities, 5 relationships, strength 9";
    return o;
}

Outcome c2_tqd_golden() {
    Outcome o;
    const auto t0 = Clock::now();
    const auto examples = json::parse(read_file(fixture_path("tqd_examples.json")));
    const std::vector<std::size_t> expected_counts{2, 2, 3, 2};
    std::ostringstream counts;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        MockChatProvider llm;
        llm.on_substring(ex["question"].get<std::string>(), ex["output"].get<std::string>());
        const auto r = decompose(ex["question"].get<std::string>(), llm);
        const auto want = ex["expected_times"].get<std::vector<std::string>>();
        counts << (i ? "/" : "") << r.subqueries.size();
        if (r.subqueries.size() != expected_counts[i] || want.size() != expected_counts[i]) {
            o.fail("example " + std::to_string(i + 1) + " gave " + std::to_string(r.subqueries.size()) + " sub-queries");
            continue;
        }
        for (std::size_t j = 0; j < want.size(); ++j) {
            if (!r.subqueries[j].time || r.subqueries[j].time->raw != want[j]) {
                o.fail("example " + std::to_string(i + 1) + " label " + want[j] + " missing");
            }
        }
        if (r.malformed_records != 0 || r.fell_back) o.fail("example " + std::to_string(i + 1) + " reported malformed output");
    }
    const auto range = TimeSpec::parse("2021-2022");
    if (range.first != 2021 || range.last != 2022) o.fail("2021-2022 did not parse as a range");
    const double s = seconds_since(t0);
    if (s >= 1.0) o.fail("took " + std::to_string(s) + " s");
    if (o.pass) o.detail = counts.str() + " sub-queries";
    return o;
}

Outcome c3_temporal_isolation() {
    Outcome o;
    std::mt19937 rng(3);
    std::size_t violations = 0;
    for (int g = 0; g < 100; ++g) {
        const TemporalGraph graph = build_graph(random_extractions(rng, 20, 4));
        const auto whole = knowledge_multiset(graph);
        std::multiset<UnitKey> union_of_views;
        for (const auto& t : graph.time_labels()) {
            const auto view = knowledge_multiset(subgraph_at(graph, t));
            for (const auto& u : view) {
                if (std::get<1>(u) != t.ordinal()) ++violations;
                union_of_views.insert(u);
            }
        }
        if (union_of_views != whole) ++violations;
    }
    if (violations) o.fail(std::to_string(violations) + " violations");
    else o.detail = "100 graphs, 0 violations";
    return o;
}

Outcome c4_retrieval_oracle() {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937 rng(4);
    std::size_t mismatches = 0;
    for (int f = 0; f < 100; ++f) {
        Embedding q;
        const SubgraphIndex idx = random_index(rng, 200, q);
        const auto cand = retrieve_candidates(q, idx, 30);
        if (cand != oracle_candidates(idx, q, 30)) ++mismatches;
        const auto sel = retrieve_knowledge(cand, idx, q, 15);
        if (sel.valid_knowledge != oracle_knowledge(idx, cand, q, 15)) ++mismatches;
    }
    const double s = seconds_since(t0);
    if (mismatches) o.fail(std::to_string(mismatches) + " mismatches");
    if (s >= 10.0) o.fail("took " + std::to_string(s) + " s");
    if (o.pass) o.detail = "100 fixtures, 0 mismatches";
    return o;
}

Outcome c5_temporal_regression() {
    Outcome o;
    HashEmbedder em(64, 0, HashEmbedder::Mode::BagOfTokens);
    const auto fx = deliveries_fixture(em);
    MockChatProvider llm;
    llm.on_substring("Break down a question", R"([2022<SEP>"How many units did the Audi Group deliver in 2022"])");
    llm.on_substring("Data tables:", "1.8 million units.");
    llm.on_substring("sub questions and corresponding answers", "1.8 million units.");
    const auto outcome = answer("How many units did the Audi Group deliver in 2022?", fx.state(), llm, em);
    const json trace = outcome.trace();
    const std::string unit22 = "1.8 million units delivered by the Audi Group in 2022.";
    const std::string unit23 = "1.9 million units delivered by the Audi Group in 2023.";
    bool saw22 = false;
    for (const auto& sub : trace["subqueries"]) {
        for (const auto& pass : sub["passes"]) {
            if (pass["view"] != "2022") o.fail("pass on view " + pass["view"].get<std::string>());
            for (const auto& k : pass["valid_knowledge"]) {
                if (k["time"] != "2022") o.fail("knowledge from " + k["time"].get<std::string>() + " retrieved");
                if (k["text"] == unit22) saw22 = true;
                if (k["text"] == unit23) o.fail("2023 unit retrieved");
            }
            for (const auto& d : pass["valid_texts"]) {
                if (d["time"] != "2022") o.fail("2023 source text retrieved");
            }
        }
        const std::string ctx = sub["context"]["context"];
        if (ctx.find(unit22) == std::string::npos) o.fail("context lacks the 2022 unit");
        if (ctx.find("1.9 million") != std::string::npos) o.fail("context contains the 2023 figure");
    }
    if (!saw22) o.fail("2022 unit not in the trace");
    if (o.pass) o.detail = "2022 unit present, no 2023 unit";
    return o;
}

Outcome c6_source_text_oracle() {
    Outcome o;
    // Six chunks: four in 2022, two in 2023.
    const std::vector<std::tuple<long, std::string, std::vector<std::string>>> layout = {
        {2022, "a", {"A", "B"}},      {2022, "b", {"B", "C", "D"}}, {2022, "c", {"E"}},
        {2022, "d", {"A", "F", "C"}}, {2023, "e", {"A", "B", "G"}}, {2023, "f", {"D", "G"}},
    };
    const std::vector<std::tuple<long, std::string, std::string>> rels = {
        {2022, "A", "B"}, {2022, "C", "D"}, {2022, "E", "F"}, {2023, "A", "G"}, {2023, "D", "G"}, {2022, "B", "C"},
    };
    TemporalGraph graph;
    ChunkStore chunks;
    for (const auto& [year, doc, ents] : layout) {
        Chunk c;
        c.doc_id = std::to_string(year) + "/" + doc;
        c.chunk_id = make_chunk_id(c.doc_id, 0);
        c.time_label = TimeLabel::from_ordinal(year);
        c.text = "text of " + doc;
        ExtractionOutput out;
        for (const auto& e : ents) out.entities.push_back({e, "organization", e + " in " + doc, c.chunk_id, c.time_label});
        for (const auto& [ry, s, t] : rels) {
            if (ry == year && std::find(ents.begin(), ents.end(), s) != ents.end() &&
                std::find(ents.begin(), ents.end(), t) != ents.end()) {
                out.relations.push_back({s, t, s + " with " + t, 5, c.chunk_id, c.time_label, false});
            }
        }
        graph.upsert(out);
        chunks.add(std::move(c));
    }
    std::size_t cases = 0, mismatches = 0;
    const std::vector<std::optional<TimeLabel>> views{TimeLabel::from_ordinal(2022), TimeLabel::from_ordinal(2023), std::nullopt};
    for (const auto& t : views) {
        const TemporalSubgraph sub = t ? subgraph_at(graph, *t) : full_view(graph);
        std::vector<std::string> names;
        for (const auto& [n, v] : sub.entities()) names.push_back(n);
        for (unsigned mask = 1; mask < (1u << names.size()); ++mask) {
            std::set<std::string> valid;
            for (std::size_t i = 0; i < names.size(); ++i) {
                if (mask & (1u << i)) valid.insert(names[i]);
            }
            const auto got = extract_source_texts(valid, sub, graph, chunks, 5);
            const auto want = oracle_source_texts(valid, graph, chunks, t, 5);
            ++cases;
            bool same = got.size() == want.size();
            for (std::size_t i = 0; same && i < got.size(); ++i) {
                same = got[i].chunk.chunk_id == want[i].first && got[i].score == want[i].second;
            }
            if (!same) ++mismatches;
        }
    }
    if (mismatches) o.fail(std::to_string(mismatches) + " of " + std::to_string(cases) + " valid-node sets mismatch");
    else o.detail = std::to_string(cases) + " valid-node sets, 0 mismatches";
    return o;
}

Outcome c7_token_budget() {
    Outcome o;
    std::mt19937 rng(7);
    const std::size_t budget = EngineConfig{}.graph_token_budget;
    std::size_t truncated = 0;
    for (int i = 0; i < 100; ++i) {
        const RetrievalResult r = random_retrieval_result(rng);
        const std::string why = check_budget_prefix(r, budget);
        if (!why.empty()) {
            o.fail("bundle " + std::to_string(i) + ": " + why);
            break;
        }
        const auto b = assemble_context(r, budget);
        if (b.knowledge_rows < b.knowledge_available || b.relation_rows < b.relation_available) ++truncated;
    }
    if (o.pass) o.detail = "100 bundles within " + std::to_string(budget) + " tokens, " + std::to_string(truncated) + " truncated";
    return o;
}

Outcome c8_majority_vote() {
    Outcome o;
    QAItem qa;
    qa.qa_id = "single-x";
    qa.question = "How many units were delivered in 2022?";
    qa.answer = "1.8 million";
    qa.time_labels = {TimeLabel::from_ordinal(2022)};
    qa.evidence[TimeLabel::from_ordinal(2022)] = "1.8 million units were delivered in 2022.";
    JudgeOptions jo;
    for (int mask = 0; mask < 8; ++mask) {
        const int ones = (mask & 1) + ((mask >> 1) & 1) + ((mask >> 2) & 1);
        std::vector<std::optional<int>> runs{mask & 1, (mask >> 1) & 1, (mask >> 2) & 1};
        if (majority(runs) != std::optional<int>(ones >= 2 ? 1 : 0)) o.fail("majority wrong for mask " + std::to_string(mask));
        // Same triple through the judge.
        std::atomic<int> next{0};
        MockChatProvider judge;
        judge.on_substring("Correctness", [&](const ChatRequest&) {
            const int i = next.fetch_add(1);
            return "Correctness: " + std::to_string((mask >> i) & 1);
        });
        jo.runs = 3;
        auto v = judge_majority(qa, "1.8 million units", judge, jo);
        if (v.verdict != std::optional<int>(ones >= 2 ? 1 : 0)) o.fail("judge verdict wrong for mask " + std::to_string(mask));
    }
    MockChatProvider silent;
    for (const char* empty : {"", "   "}) {
        const auto v = judge_majority(qa, empty, silent, jo);
        if (v.verdict != std::optional<int>(0)) o.fail("empty answer not scored 0");
    }
    if (silent.calls() != 0) o.fail("judge called for an empty answer");
    if (o.pass) o.detail = "8/8 triples, empty answer 0 with no call";
    return o;
}

Outcome c9_defaults() {
    Outcome o;
    const EngineConfig c;
    if (!(c.chunk_size_retrieval == 1000 && c.t == 5 && c.n == 30 && c.k == 15 && c.graph_token_budget == 1600)) {
        o.fail("defaults differ");
    } else {
        o.detail = "chunk 1000, t=5, n=30, k=15, budget 1600";
    }
    return o;
}

Outcome c10_end_to_end() {
    Outcome o;
    const auto t0 = Clock::now();
    TempDir dir;
    const std::vector<std::string> base{"--workdir", dir.path().string(), "--corpus", fixture_path("corpus").string(),
                                        "--mock-script", fixture_path("mock_script.json").string()};
    auto run = [&](std::vector<std::string> extra, std::string& out_text) {
        std::vector<std::string> args = base;
        args.insert(args.end(), extra.begin(), extra.end());
        std::ostringstream out, err;
        const int rc = run_cli(args, out, err);
        out_text = out.str();
        if (rc != 0) o.fail("`" + extra.front() + "` exited " + std::to_string(rc) + ": " + err.str());
        return rc;
    };
    std::string text;
    if (run({"index"}, text) != 0) return o;

    auto query = [&](const std::string& q, bool decompose, json& trace) {
        const auto trace_file = dir / "trace.json";
        std::vector<std::string> args{"query", q, "--trace-out", trace_file.string()};
        if (!decompose) args.push_back("--no-decompose");
        std::string out;
        if (run(args, out) != 0) return std::string();
        trace = json::parse(read_file(trace_file));
        return out;
    };
    json single, dual, non, dual_flat;
    const auto a1 = query(kSingleQuery, true, single);
    const auto a2 = query(kDualQuery, true, dual);
    const auto a3 = query(kNonTimeQuery, true, non);
    const auto a4 = query(kDualQuery, false, dual_flat);
    if (!o.pass) return o;
    for (const auto* a : {&a1, &a2, &a3}) {
        if (a->empty() || is_abstention(*a)) o.fail("no final answer for a query");
    }
    if (a1.find("1.8 million") == std::string::npos) o.fail("single-time answer: " + a1);
    if (a2.find("1.9 million") == std::string::npos) o.fail("dual-time answer: " + a2);
    if (dual["retrieval_passes"] != 2) o.fail("dual-time query ran " + dual["retrieval_passes"].dump() + " passes");
    std::set<std::string> views;
    for (const auto& s : dual["subqueries"]) {
        for (const auto& p : s["passes"]) views.insert(p["view"].get<std::string>());
    }
    if (views != std::set<std::string>{"2022", "2023"}) o.fail("dual-time passes are not on 2022 and 2023");
    if (dual_flat["retrieval_passes"] != 1) o.fail("--no-decompose ran " + dual_flat["retrieval_passes"].dump() + " passes");
    if (non["decomposition"]["llm_called"] != false) o.fail("non-time query called the decomposer");
    const double s = seconds_since(t0);
    if (s >= 30.0) o.fail("took " + std::to_string(s) + " s");
    if (o.pass) {
        std::ostringstream d;
        d.precision(2);
        d << "3 answers, dual 2 passes (2022, 2023), no-decompose 1 pass, " << std::fixed << s << " s";
        o.detail = d.str();
    }
    return o;
}

Outcome c11_tek_oracle() {
    Outcome o;
    std::mt19937 rng(11);
    std::size_t chains = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const auto points = planted_keypoints(rng, 12, 8);
        const auto got = link_tek(points, 0.75);
        if (!same_chains(got, oracle_tek(points, 0.75))) o.fail("mismatch at threshold 0.75, fixture " + std::to_string(rep));
        if (!link_tek(points, 1.01).empty()) o.fail("chains at threshold 1.01");
        chains += got.size();
    }
    if (chains == 0) o.fail("planted duplicates produced no chains");
    if (o.pass) o.detail = "20 fixtures, " + std::to_string(chains) + " chains, none at 1.01";
    return o;
}

Outcome c12_persistence() {
    Outcome o;
    TempDir dir;
    std::mt19937 rng_a(12), rng_b(12);
    const TemporalGraph g1 = build_graph(random_extractions(rng_a, 20, 4));
    const TemporalGraph g2 = build_graph(random_extractions(rng_b, 20, 4));
    g1.save(dir / "g1.json");
    g2.save(dir / "g2.json");
    if (read_file(dir / "g1.json") != read_file(dir / "g2.json")) o.fail("graph bytes differ across runs");
    const TemporalGraph back = TemporalGraph::load(dir / "g1.json");
    if (!(back == g1)) o.fail("loaded graph differs");
    back.save(dir / "g3.json");
    if (read_file(dir / "g3.json") != read_file(dir / "g1.json")) o.fail("graph bytes change after a load");

    std::vector<QAItem> items;
    for (int i = 0; i < 5; ++i) {
        QAItem qa;
        qa.question = "What happened to plant " + std::to_string(i) + " in 202" + std::to_string(i % 3) + " and 2023?";
        qa.answer = "answer " + std::to_string(i);
        qa.time_class = TimeClass::Dual;
        qa.time_labels = {TimeLabel::from_ordinal(2020 + i % 3), TimeLabel::from_ordinal(2023)};
        for (const auto& t : qa.time_labels) qa.evidence[t] = "evidence for " + t.raw() + " \"quoted\"\n";
        qa.qa_id = make_qa_id(qa.time_class, qa.question, qa.time_labels);
        items.push_back(qa);
    }
    save_dataset(items, dir / "d1.jsonl");
    save_dataset(items, dir / "d2.jsonl");
    if (read_file(dir / "d1.jsonl") != read_file(dir / "d2.jsonl")) o.fail("dataset bytes differ across runs");
    const auto loaded = load_dataset(dir / "d1.jsonl");
    if (loaded != items) o.fail("loaded dataset differs");
    save_dataset(loaded, dir / "d3.jsonl");
    if (read_file(dir / "d3.jsonl") != read_file(dir / "d1.jsonl")) o.fail("dataset bytes change after a load");
    if (o.pass) o.detail = "graph and dataset byte-stable";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"extraction-format golden", c1_extraction_golden},
        {"TQD golden examples", c2_tqd_golden},
        {"temporal isolation", c3_temporal_isolation},
        {"retrieval oracle equivalence", c4_retrieval_oracle},
        {"per-year conflict regression", c5_temporal_regression},
        {"source-text scoring oracle", c6_source_text_oracle},
        {"token budget", c7_token_budget},
        {"majority voting", c8_majority_vote},
        {"default parameters", c9_defaults},
        {"end-to-end mock pipeline", c10_end_to_end},
        {"TEK linking oracle", c11_tek_oracle},
        {"persistence round-trips", c12_persistence},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << o.detail << "\n";
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
