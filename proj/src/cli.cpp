#include "tgrag/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "tgrag/benchgen.hpp"
#include "tgrag/config.hpp"
#include "tgrag/corpus.hpp"
#include "tgrag/evalharness.hpp"
#include "tgrag/extract.hpp"
#include "tgrag/generate.hpp"
#include "tgrag/json_io.hpp"
#include "tgrag/kgraph.hpp"
#include "tgrag/parallel.hpp"
#include "tgrag/tqd.hpp"
#include "tgrag/vectorindex.hpp"

namespace tgrag {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const PreconditionError*>(&e)) return kExitConfig;
    if (dynamic_cast<const StateError*>(&e)) return kExitState;
    if (dynamic_cast<const DataError*>(&e)) return kExitData;
    if (dynamic_cast<const ProviderError*>(&e)) return kExitProvider;
    return kExitInternal;
}

namespace {

// Routes spdlog to the command's error stream for the duration of a run.
class ScopedLogger {
public:
    ScopedLogger(std::ostream& err, spdlog::level::level_enum level) : previous_(spdlog::default_logger()) {
        auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
        auto logger = std::make_shared<spdlog::logger>("tgrag", sink);
        logger->set_pattern("[%l] %v");
        logger->set_level(level);
        spdlog::set_default_logger(logger);
    }
    ~ScopedLogger() { spdlog::set_default_logger(previous_); }
    ScopedLogger(const ScopedLogger&) = delete;
    ScopedLogger& operator=(const ScopedLogger&) = delete;

private:
    std::shared_ptr<spdlog::logger> previous_;
};

struct WorkdirLayout {
    fs::path root;
    fs::path graph() const { return root / "graph.json"; }
    fs::path chunks() const { return root / "chunks.jsonl"; }
    fs::path index() const { return root / "index"; }
    fs::path extraction_archive() const { return root / "raw_extractions"; }
    fs::path answers() const { return root / "answers.jsonl"; }
    fs::path config_dump() const { return root / "config.ini"; }
};

struct Engine {
    TemporalGraph graph;
    ChunkStore chunks;
    IndexSet indexes;

    RetrievalState state() const { return {&graph, &indexes, &chunks}; }
};

Engine load_engine(const WorkdirLayout& w) {
    if (!fs::exists(w.graph()) || !fs::exists(w.chunks())) {
        throw StateError("workdir " + w.root.string() + " holds no built graph; run `tgrag index` first");
    }
    Engine e;
    e.graph = TemporalGraph::load(w.graph());
    e.chunks = ChunkStore::load(w.chunks());
    e.indexes = load_index_set(w.index());
    return e;
}

struct Providers {
    std::shared_ptr<InflightLimiter> limiter;
    std::shared_ptr<ChatProvider> chat;
    std::shared_ptr<EmbeddingProvider> embed;
};

Providers make_providers(const EngineConfig& cfg) {
    Providers p;
    p.limiter = std::make_shared<InflightLimiter>(static_cast<std::ptrdiff_t>(cfg.provider.inflight_limit));
    p.chat = make_chat_provider(cfg, p.limiter);
    p.embed = make_embedding_provider(cfg, p.limiter);
    return p;
}

void print_cache_stats(const EmbeddingProvider& em, std::ostream& out) {
    if (auto* cached = dynamic_cast<const CachedEmbeddingProvider*>(&em)) {
        out << "embedding cache: " << cached->hits() << " hits, " << cached->misses() << " misses\n";
    }
}

ExtractionOptions extraction_options(const EngineConfig& cfg) {
    ExtractionOptions o;
    if (!cfg.entity_types.empty()) o.entity_types = cfg.entity_types;
    o.temperature = cfg.provider.temperature;
    return o;
}

ChunkStore chunk_corpus(const EngineConfig& cfg, std::size_t size, std::ostream& err) {
    if (cfg.corpus_root.empty()) throw ConfigError("no corpus root given (use --corpus or [paths] corpus_root)");
    const IngestResult ingested = ingest(cfg.corpus_root);
    for (const auto& fe : ingested.errors) err << "warning: skipped " << fe.path << ": " << fe.message << "\n";
    ChunkStore store;
    for (const auto& doc : ingested.documents) {
        for (auto& c : chunk(doc, size, cfg.chunk_overlap)) store.add(std::move(c));
    }
    return store;
}

int cmd_index(const EngineConfig& cfg, std::ostream& out, std::ostream& err) {
    const WorkdirLayout w{cfg.workdir};
    ChunkStore store = chunk_corpus(cfg, cfg.chunk_size_retrieval, err);
    Providers p = make_providers(cfg);

    std::vector<const Chunk*> chunks;
    for (const auto& [id, c] : store.all()) chunks.push_back(&c);
    std::vector<ExtractionOutput> outputs(chunks.size());
    const ExtractionOptions xo = extraction_options(cfg);
    parallel_for(chunks.size(), cfg.workers, [&](std::size_t i) {
        outputs[i] = extract_chunk(*chunks[i], *p.chat, xo, w.extraction_archive());
    });

    TemporalGraph graph;
    std::size_t malformed = 0;
    for (const auto& o : outputs) {
        malformed += o.malformed_lines.size();
        graph.upsert(o);
    }
    graph.check_invariants();

    IndexOptions io;
    io.workers = cfg.workers;
    if (cfg.node_embedding == "concat") io.node_embedding = NodeEmbedding::ConcatenatedText;
    IndexSet set = build_index_set(graph, *p.embed, io);
    set.chunks = build_chunk_table(store, *p.embed, io);

    fs::create_directories(w.root);
    graph.save(w.graph());
    store.save(w.chunks());
    if (fs::exists(w.index())) fs::remove_all(w.index());
    save_index_set(set, w.index());
    write_file(w.config_dump(), cfg.to_ini());

    out << "indexed " << store.size() << " chunks";
    if (malformed > 0) out << " (" << malformed << " malformed extraction lines skipped)";
    out << "\n";
    for (const auto& t : graph.time_labels()) {
        const TemporalSubgraph sub = subgraph_at(graph, t);
        out << t.raw() << ": " << sub.entities().size() << " entities, " << sub.relations().size() << " relations, "
            << sub.knowledge_count() << " knowledge units\n";
    }
    out << "all: " << graph.entities().size() << " entities, " << graph.relations().size() << " relations, "
        << graph.knowledge_count() << " knowledge units\n";
    print_cache_stats(*p.embed, out);
    return kExitOk;
}

struct QueryFlags {
    std::string question;
    bool trace = false;
    std::string trace_out;
    bool no_decompose = false;
    bool record = false;
};

int cmd_query(const EngineConfig& cfg, const QueryFlags& f, std::ostream& out) {
    if (f.question.empty()) throw ConfigError("empty question");
    const WorkdirLayout w{cfg.workdir};
    const Engine e = load_engine(w);
    Providers p = make_providers(cfg);
    AnswerOptions opts = cfg.answer_options();
    opts.decompose = !f.no_decompose;
    const QueryOutcome outcome = answer(f.question, e.state(), *p.chat, *p.embed, opts);
    out << outcome.final.answer << "\n";
    if (f.trace) out << outcome.trace().dump(2) << "\n";
    if (!f.trace_out.empty()) write_file(f.trace_out, outcome.trace().dump(2) + "\n");
    if (f.record) append_line(w.answers(), outcome.answer_record().dump());
    return kExitOk;
}

struct EvalFlags {
    std::string dataset;
    std::string mode = "tgrag";
    std::string out_dir;
};

int cmd_eval(const EngineConfig& cfg, const EvalFlags& f, std::ostream& out) {
    const EvalMode mode = eval_mode_from_string(f.mode);
    if (!fs::exists(f.dataset)) throw ConfigError("dataset not found: " + f.dataset);
    const std::vector<QAItem> dataset = load_dataset(f.dataset);
    if (dataset.empty()) throw DataError("dataset " + f.dataset + " is empty");
    Providers p = make_providers(cfg);
    const WorkdirLayout w{cfg.workdir};

    std::optional<Engine> engine;
    if (mode != EvalMode::NoRag) engine = load_engine(w);
    if (mode == EvalMode::Vanilla && !engine->indexes.chunks) {
        throw StateError("index in " + w.index().string() + " has no chunk table; re-run `tgrag index`");
    }
    const AnswerOptions opts = cfg.answer_options();
    Answerer answerer = [&](const QAItem& qa) -> std::string {
        switch (mode) {
            case EvalMode::TGRAG: return answer(qa.question, engine->state(), *p.chat, *p.embed, opts).final.answer;
            case EvalMode::NoRag: return norag_answer(qa.question, *p.chat, opts.generation);
            case EvalMode::Vanilla:
                return vanilla_answer(qa.question, *engine->indexes.chunks, *p.embed, *p.chat, cfg.t, opts.generation);
        }
        return {};
    };
    EvalOptions eo;
    eo.mode = std::string(to_string(mode));
    eo.workers = cfg.workers;
    eo.judge.temperature = cfg.provider.kind == "mock" ? 0.0 : cfg.provider.judge_temperature;
    const EvalResult result = evaluate(dataset, answerer, *p.chat, eo);
    const fs::path dir = f.out_dir.empty() ? w.root / "eval" / eo.mode : fs::path(f.out_dir);
    save_eval(result, dir);
    out << result.report.table();
    out << "wrote " << (dir / "report.json").string() << " and " << (dir / "verdicts.jsonl").string() << "\n";
    return kExitOk;
}

struct DatasetFlags {
    std::string classes = "all";
    std::optional<double> tek_threshold;
    std::string out_dir;
    std::string sweep;
    std::size_t max_per_class = 0;
};

std::vector<double> parse_thresholds(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    for (std::string item; std::getline(ss, item, ',');) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("bad threshold \"" + item + "\" in --sweep");
        }
    }
    if (out.empty()) throw ConfigError("--sweep needs at least one threshold");
    return out;
}

int cmd_build_dataset(const EngineConfig& cfg, const DatasetFlags& f, std::ostream& out, std::ostream& err) {
    DatasetBuildOptions o;
    o.classes = parse_time_classes(f.classes);
    o.tek_threshold = f.tek_threshold.value_or(cfg.tek_threshold);
    o.workers = cfg.workers;
    o.generation.temperature = cfg.provider.temperature;
    if (f.max_per_class > 0) {
        for (TimeClass c : o.classes) o.max_per_class[c] = f.max_per_class;
    }
    const std::vector<double> sweep = f.sweep.empty() ? std::vector<double>{} : parse_thresholds(f.sweep);
    const ChunkStore store = chunk_corpus(cfg, cfg.chunk_size_dataset, err);
    Providers p = make_providers(cfg);

    if (!sweep.empty()) {
        std::vector<std::string> failures;
        const auto points = collect_keypoints(store, *p.chat, *p.embed, o, failures);
        for (const auto& fl : failures) err << "warning: " << fl << "\n";
        if (points.size() < 2) throw DataError("key points cover fewer than two periods; nothing to sweep");
        out << fmt::format("{:>9} {:>7} {:>12}\n", "threshold", "chains", "multi-chains");
        for (const auto& r : sweep_tek(points, sweep)) {
            out << fmt::format("{:>9.3f} {:>7} {:>12}\n", r.threshold, r.chains, r.multi_chains);
        }
        return kExitOk;
    }

    const DatasetBuild build = build_dataset(store, *p.chat, *p.embed, o);
    const fs::path dir = f.out_dir.empty() ? cfg.workdir / "dataset" : fs::path(f.out_dir);
    save_dataset(build.items, dir / "dataset.jsonl");
    write_file(dir / "review.md", review_markdown(build.items));
    for (const auto& wmsg : build.warnings) err << "warning: " << wmsg << "\n";
    if (!build.failures.empty()) err << "warning: " << build.failures.size() << " generation steps failed (first: " << build.failures.front() << ")\n";
    for (TimeClass c : o.classes) {
        const auto it = build.counts.find(c);
        out << to_string(c) << ": " << (it == build.counts.end() ? 0 : it->second) << "\n";
    }
    out << "chains: " << build.chains << ", lint-dropped: " << build.lint_dropped << "\n";
    out << "wrote " << (dir / "dataset.jsonl").string() << "\n";
    return kExitOk;
}

int cmd_inspect(const EngineConfig& cfg, const std::string& time, std::ostream& out) {
    const WorkdirLayout w{cfg.workdir};
    if (!fs::exists(w.graph())) throw StateError("workdir " + w.root.string() + " holds no built graph; run `tgrag index` first");
    const TemporalGraph graph = TemporalGraph::load(w.graph());
    if (time.empty() || time == "all") {
        out << full_view(graph).to_json().dump(2) << "\n";
    } else {
        out << subgraph_at(graph, TimeLabel::parse(time)).to_json().dump(2) << "\n";
    }
    return kExitOk;
}

// Flags that override config-file values when given.
struct Overrides {
    std::optional<std::string> workdir, corpus, provider, mock_script, embedder;
    std::optional<std::size_t> n, k, t, budget, chunk_size, dataset_chunk_size, overlap, embed_dim, inflight, workers;
    std::optional<double> tek_threshold;

    void apply(EngineConfig& c) const {
        if (workdir) c.workdir = *workdir;
        if (corpus) c.corpus_root = *corpus;
        if (provider) c.provider.kind = *provider;
        if (mock_script) c.provider.mock_script = *mock_script;
        if (embedder) c.provider.embedder = *embedder;
        if (n) c.n = *n;
        if (k) c.k = *k;
        if (t) c.t = *t;
        if (budget) c.graph_token_budget = *budget;
        if (chunk_size) c.chunk_size_retrieval = *chunk_size;
        if (dataset_chunk_size) c.chunk_size_dataset = *dataset_chunk_size;
        if (overlap) c.chunk_overlap = *overlap;
        if (embed_dim) c.provider.embed_dim = *embed_dim;
        if (inflight) c.provider.inflight_limit = *inflight;
        if (workers) c.workers = *workers;
        if (tek_threshold) c.tek_threshold = *tek_threshold;
    }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Temporal GraphRAG engine", "tgrag"};
    app.require_subcommand(0, 1);
    app.fallthrough();

    std::string config_path;
    Overrides ov;
    bool verbose = false;
    bool dump_config = false;
    app.add_option("--config", config_path, "INI configuration file");
    app.add_option("--workdir", ov.workdir, "Working directory for graph, indexes and outputs");
    app.add_option("--corpus", ov.corpus, "Corpus root (<root>/<period>/<file>)");
    app.add_option("--provider", ov.provider, "mock or openai");
    app.add_option("--mock-script", ov.mock_script, "Rules file for the scripted chat mock");
    app.add_option("--embedder", ov.embedder, "hash, hash-text or openai");
    app.add_option("--n", ov.n, "Candidate nodes");
    app.add_option("--k", ov.k, "Valid knowledge units");
    app.add_option("--t", ov.t, "Source texts");
    app.add_option("--budget", ov.budget, "Graph context token budget");
    app.add_option("--chunk-size", ov.chunk_size, "Retrieval chunk size in tokens");
    app.add_option("--dataset-chunk-size", ov.dataset_chunk_size, "Dataset chunk size in tokens");
    app.add_option("--overlap", ov.overlap, "Chunk overlap in tokens");
    app.add_option("--embed-dim", ov.embed_dim, "Embedding dimension");
    app.add_option("--inflight", ov.inflight, "Maximum concurrent provider requests");
    app.add_option("--workers", ov.workers, "Worker threads");
    app.add_flag("-v,--verbose", verbose, "Log progress to stderr");
    app.add_flag("--dump-config", dump_config, "Print the effective configuration and exit");

    auto* index = app.add_subcommand("index", "Build the temporal graph and vector indexes");
    QueryFlags qf;
    auto* query = app.add_subcommand("query", "Answer a question");
    query->add_option("question", qf.question, "Question text")->required();
    query->add_flag("--trace", qf.trace, "Print the retrieval trace as JSON");
    query->add_option("--trace-out", qf.trace_out, "Write the retrieval trace to a file");
    query->add_flag("--no-decompose", qf.no_decompose, "Answer without temporal query decomposition");
    query->add_flag("--record", qf.record, "Append the answer to <workdir>/answers.jsonl");
    EvalFlags ef;
    auto* eval = app.add_subcommand("eval", "Judge answers over a QA dataset");
    eval->add_option("dataset", ef.dataset, "Dataset JSONL")->required();
    eval->add_option("--mode", ef.mode, "tgrag, norag or vanilla");
    eval->add_option("--out", ef.out_dir, "Output directory for report.json and verdicts.jsonl");
    DatasetFlags df;
    auto* build = app.add_subcommand("build-dataset", "Generate temporal QA pairs from the corpus");
    build->add_option("--classes", df.classes, "Comma-separated classes: single,dual,multi,non or all");
    build->add_option("--tek-threshold", df.tek_threshold, "Cosine threshold for key-point linking");
    build->add_option("--out", df.out_dir, "Output directory");
    build->add_option("--sweep", df.sweep, "Comma-separated thresholds; report chain counts only");
    build->add_option("--max-per-class", df.max_per_class, "Cap per class (0: no cap)");
    std::string inspect_time = "all";
    auto* inspect = app.add_subcommand("inspect", "Dump a temporal subgraph as JSON");
    inspect->add_option("--time", inspect_time, "Period label or all");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    ScopedLogger logger(err, verbose ? spdlog::level::info : spdlog::level::warn);
    try {
        EngineConfig cfg;
        if (!config_path.empty()) cfg.apply_ini_file(config_path);
        ov.apply(cfg);
        cfg.validate();
        if (dump_config) {
            out << cfg.to_ini();
            return kExitOk;
        }
        if (index->parsed()) return cmd_index(cfg, out, err);
        if (query->parsed()) return cmd_query(cfg, qf, out);
        if (eval->parsed()) return cmd_eval(cfg, ef, out);
        if (build->parsed()) return cmd_build_dataset(cfg, df, out, err);
        if (inspect->parsed()) return cmd_inspect(cfg, inspect_time, out);
        err << "error: a subcommand is required (index, query, eval, build-dataset, inspect)\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return kExitInternal;
}

}  // namespace tgrag
