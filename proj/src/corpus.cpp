#include "tgrag/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "tgrag/errors.hpp"
#include "tgrag/json_io.hpp"

namespace tgrag {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace

// --- TimeLabel ---------------------------------------------------------------

std::string TimeLabel::normalize(std::string_view raw) {
    auto s = trim(raw);
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return {};
    }
    const auto nz = s.find_first_not_of('0');
    if (nz == std::string_view::npos) return "0";
    return std::string(s.substr(nz));
}

std::optional<TimeLabel> TimeLabel::try_parse(std::string_view raw) {
    auto norm = normalize(raw);
    if (norm.empty() || norm.size() > 9) return std::nullopt;
    TimeLabel t;
    std::from_chars(norm.data(), norm.data() + norm.size(), t.ordinal_);
    t.raw_ = std::move(norm);
    return t;
}

TimeLabel TimeLabel::parse(std::string_view raw) {
    auto t = try_parse(raw);
    if (!t) throw ConfigError("not a time label: '" + std::string(raw) + "'");
    return *t;
}

TimeLabel TimeLabel::from_ordinal(long ordinal) {
    if (ordinal < 0) throw ConfigError("negative time label ordinal");
    return parse(std::to_string(ordinal));
}

// --- ingest ------------------------------------------------------------------

IngestResult ingest(const fs::path& root, const CorpusLayout& layout) {
    if (!fs::is_directory(root)) throw ConfigError("corpus root is not a directory: " + root.string());

    IngestResult result;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (std::find(layout.extensions.begin(), layout.extensions.end(), ext) == layout.extensions.end()) {
            continue;
        }
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    for (const auto& file : files) {
        const auto rel = fs::relative(file, root);
        auto it = rel.begin();
        if (std::distance(rel.begin(), rel.end()) != 2) {
            throw ConfigError("file does not sit in a time-label directory: " + file.string());
        }
        const std::string period = it->string();
        auto label = TimeLabel::try_parse(period);
        if (!label) {
            throw ConfigError("cannot parse time label '" + period + "' for file " + file.string());
        }

        std::ifstream in(file, std::ios::binary);
        if (!in) {
            result.errors.push_back({file.string(), "unreadable file"});
            continue;
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        if (in.bad()) {
            result.errors.push_back({file.string(), "read failure"});
            continue;
        }
        std::string text = ss.str();
        if (trim(text).empty()) {
            result.errors.push_back({file.string(), "empty document"});
            continue;
        }
        Document doc;
        doc.doc_id = label->raw() + "/" + file.stem().string();
        doc.time_label = *label;
        doc.text = std::move(text);
        doc.source_path = file.string();
        result.documents.push_back(std::move(doc));
    }

    std::sort(result.documents.begin(), result.documents.end(), [](const Document& a, const Document& b) {
        if (a.time_label != b.time_label) return a.time_label < b.time_label;
        return a.doc_id < b.doc_id;
    });
    for (std::size_t i = 1; i < result.documents.size(); ++i) {
        if (result.documents[i].doc_id == result.documents[i - 1].doc_id) {
            throw ConfigError("duplicate document id " + result.documents[i].doc_id + " (" +
                              result.documents[i].source_path + ")");
        }
    }
    for (const auto& e : result.errors) spdlog::warn("ingest: {}: {}", e.path, e.message);
    return result;
}

// --- chunking ----------------------------------------------------------------

std::string make_chunk_id(std::string_view doc_id, std::size_t seq) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "#%04zu", seq);
    return std::string(doc_id) + buf;
}

std::vector<Chunk> chunk(const Document& doc, std::size_t size, std::size_t overlap, const Tokenizer& tokenizer) {
    if (size == 0 || size <= overlap) {
        throw ConfigError("chunk size must exceed overlap (size=" + std::to_string(size) +
                          ", overlap=" + std::to_string(overlap) + ")");
    }
    if (trim(doc.text).empty()) throw PreconditionError("cannot chunk empty document " + doc.doc_id);

    const auto tokens = tokenizer.tokenize(doc.text);
    std::vector<Chunk> out;
    const std::size_t n = tokens.size();
    std::size_t start = 0;
    while (true) {
        const std::size_t end = std::min(start + size, n);
        const std::size_t byte_begin = start == 0 ? 0 : tokens[start].begin;
        const std::size_t byte_end = end == n ? doc.text.size() : tokens[end].begin;

        Chunk c;
        c.seq = out.size();
        c.chunk_id = make_chunk_id(doc.doc_id, c.seq);
        c.doc_id = doc.doc_id;
        c.time_label = doc.time_label;
        c.text = doc.text.substr(byte_begin, byte_end - byte_begin);
        c.token_count = end - start;
        out.push_back(std::move(c));

        if (end == n) break;
        start = end - overlap;
    }
    return out;
}

// --- ChunkStore --------------------------------------------------------------

void ChunkStore::add(Chunk c) {
    auto id = c.chunk_id;
    chunks_.insert_or_assign(std::move(id), std::move(c));
}

const Chunk* ChunkStore::find(std::string_view chunk_id) const {
    auto it = chunks_.find(chunk_id);
    return it == chunks_.end() ? nullptr : &it->second;
}

void ChunkStore::save(const fs::path& path) const {
    std::string out;
    for (const auto& [id, c] : chunks_) {
        out += json(c).dump();
        out += '\n';
    }
    write_file(path, out);
}

ChunkStore ChunkStore::load(const fs::path& path) {
    ChunkStore store;
    for (const auto& j : read_jsonl(path)) {
        try {
            store.add(j.get<Chunk>());
        } catch (const json::exception& e) {
            throw LoadError(LoadError::Kind::Corrupt, "bad chunk record in " + path.string() + ": " + e.what());
        }
    }
    return store;
}

}  // namespace tgrag
