#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tgrag/corpus.hpp"

namespace tgrag {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void to_json(json& j, const TimeLabel& t);
void from_json(const json& j, TimeLabel& t);
void to_json(json& j, const Chunk& c);
void from_json(const json& j, Chunk& c);

/// Whole-file read; throws LoadError(Io) when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& contents);

/// Appends one line, creating parent directories.
void append_line(const std::filesystem::path& path, const std::string& line);

/// Non-empty lines of a JSONL file, each parsed. Throws DataError naming the
/// offending line number on malformed input.
std::vector<json> read_jsonl(const std::filesystem::path& path);

}  // namespace tgrag
