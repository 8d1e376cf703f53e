#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tgrag/tokenizer.hpp"

namespace tgrag {

/// A corpus period such as "2012". Labels are integers in canonical decimal
/// form, so equal raw strings and equal ordinals coincide.
class TimeLabel {
public:
    TimeLabel() = default;

    /// Throws ConfigError when `raw` is not a non-negative integer label.
    static TimeLabel parse(std::string_view raw);
    static std::optional<TimeLabel> try_parse(std::string_view raw);
    static TimeLabel from_ordinal(long ordinal);

    /// Trim and strip leading zeros. Idempotent; returns "" for non-labels.
    static std::string normalize(std::string_view raw);

    const std::string& raw() const noexcept { return raw_; }
    long ordinal() const noexcept { return ordinal_; }

    friend bool operator==(const TimeLabel& a, const TimeLabel& b) noexcept {
        return a.ordinal_ == b.ordinal_;
    }
    friend std::strong_ordering operator<=>(const TimeLabel& a, const TimeLabel& b) noexcept {
        return a.ordinal_ <=> b.ordinal_;
    }

private:
    std::string raw_;
    long ordinal_ = 0;
};

struct Document {
    std::string doc_id;
    TimeLabel time_label;
    std::string text;
    std::string source_path;

    bool operator==(const Document&) const = default;
};

struct Chunk {
    std::string chunk_id;
    std::string doc_id;
    TimeLabel time_label;
    std::size_t seq = 0;
    std::string text;
    std::size_t token_count = 0;

    bool operator==(const Chunk&) const = default;
};

struct CorpusLayout {
    std::vector<std::string> extensions{".txt", ".md"};
};

struct FileError {
    std::string path;
    std::string message;
};

struct IngestResult {
    std::vector<Document> documents;
    std::vector<FileError> errors;
};

/// Reads `<root>/<time_label>/<doc>.{txt,md}`. Documents come back sorted by
/// (time_label, doc_id). Unreadable or blank files are reported in `errors`;
/// a file outside a parseable period directory throws ConfigError naming it.
IngestResult ingest(const std::filesystem::path& root, const CorpusLayout& layout = {});

/// Deterministic id of the `seq`-th chunk of a document.
std::string make_chunk_id(std::string_view doc_id, std::size_t seq);

/// Splits a document into windows of at most `size` tokens, consecutive windows
/// sharing `overlap` tokens. Each chunk's text runs from the start of its first
/// token to the start of the token after its last one (document end for the
/// final chunk); the first chunk also keeps any leading whitespace, so with no
/// overlap the chunk texts concatenate back to the document exactly.
std::vector<Chunk> chunk(const Document& doc, std::size_t size, std::size_t overlap,
                         const Tokenizer& tokenizer = default_tokenizer());

/// Chunks keyed by id, persisted as line-delimited JSON.
class ChunkStore {
public:
    void add(Chunk c);
    const Chunk* find(std::string_view chunk_id) const;
    const std::map<std::string, Chunk, std::less<>>& all() const noexcept { return chunks_; }
    std::size_t size() const noexcept { return chunks_.size(); }
    bool empty() const noexcept { return chunks_.empty(); }

    void save(const std::filesystem::path& path) const;
    static ChunkStore load(const std::filesystem::path& path);

private:
    std::map<std::string, Chunk, std::less<>> chunks_;
};

}  // namespace tgrag
