#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tgrag/corpus.hpp"
#include "tgrag/providers.hpp"

namespace tgrag {

struct DelimiterSet {
    std::string tuple = "<|>";
    std::string record = "##";
    std::string completion = "<|COMPLETE|>";
};

/// Default entity types for report corpora; "other" absorbs anything else.
std::vector<std::string> default_entity_types();

/// Trim, upper-case ASCII, collapse internal whitespace runs to one space.
std::string normalize_entity_name(std::string_view name);

struct EntityRecord {
    std::string name;
    std::string entity_type;
    std::string description;
    std::string source_chunk;
    std::optional<TimeLabel> time_label;

    bool operator==(const EntityRecord&) const = default;
};

struct RelationRecord {
    std::string source_name;
    std::string target_name;
    std::string description;
    double strength = 0.0;
    std::string source_chunk;
    std::optional<TimeLabel> time_label;
    /// An endpoint has no entity record in the same output.
    bool dangling = false;

    bool operator==(const RelationRecord&) const = default;
};

enum class MalformedReason { NotARecord, Unterminated, UnknownTag, WrongArity, BadStrength, EmptyField, SelfLoop };

std::string_view to_string(MalformedReason r);

struct MalformedLine {
    std::string line;
    MalformedReason reason;

    bool operator==(const MalformedLine&) const = default;
};

struct ExtractionOutput {
    std::vector<EntityRecord> entities;
    std::vector<RelationRecord> relations;
    std::vector<MalformedLine> malformed_lines;
    /// Entity records whose type was outside the configured list and became "other".
    std::size_t retyped_entities = 0;

    bool operator==(const ExtractionOutput&) const = default;
};

struct ExtractionOptions {
    DelimiterSet delimiters;
    /// Empty list accepts every type verbatim.
    std::vector<std::string> entity_types = default_entity_types();
    int max_tokens = 4096;
    double temperature = 0.0;
};

/// Throws PreconditionError when `entity_types` is empty.
ChatRequest render_extraction_prompt(const Chunk& chunk, const std::vector<std::string>& entity_types,
                                     const DelimiterSet& delimiters);

/// Total parser for the tuple/record/completion grammar. Records may be split
/// by the record delimiter or by line breaks; list bullets are tolerated;
/// everything after the completion delimiter is ignored.
ExtractionOutput parse_extraction(std::string_view raw, const ExtractionOptions& options = {});

/// Emits the same grammar parse_extraction reads.
std::string serialize_extraction(const ExtractionOutput& out, const DelimiterSet& delimiters = {});

/// Prompt, chat, parse; stamps every record with the chunk's id and label.
/// Provider errors are rethrown with the chunk id in the message.
/// When `archive_dir` is set, the raw completion is written to
/// `<archive_dir>/<sanitized chunk id>.txt`.
ExtractionOutput extract_chunk(const Chunk& chunk, ChatProvider& llm, const ExtractionOptions& options = {},
                               const std::optional<std::filesystem::path>& archive_dir = std::nullopt);

/// File name used when archiving raw extraction output for a chunk.
std::string archive_file_name(std::string_view chunk_id);

}  // namespace tgrag
