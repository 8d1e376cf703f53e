#include "tgrag/json_io.hpp"

#include <fstream>
#include <sstream>

#include "tgrag/errors.hpp"

namespace tgrag {

namespace fs = std::filesystem;

void to_json(json& j, const TimeLabel& t) { j = t.raw(); }

void from_json(const json& j, TimeLabel& t) { t = TimeLabel::parse(j.get<std::string>()); }

void to_json(json& j, const Chunk& c) {
    j = json{{"chunk_id", c.chunk_id},   {"doc_id", c.doc_id}, {"time_label", c.time_label},
             {"seq", c.seq},             {"text", c.text},     {"token_count", c.token_count}};
}

void from_json(const json& j, Chunk& c) {
    j.at("chunk_id").get_to(c.chunk_id);
    j.at("doc_id").get_to(c.doc_id);
    j.at("time_label").get_to(c.time_label);
    j.at("seq").get_to(c.seq);
    j.at("text").get_to(c.text);
    j.at("token_count").get_to(c.token_count);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(LoadError::Kind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << contents;
        if (!out) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

void append_line(const fs::path& path, const std::string& line) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot append to " + path.string());
    out << line << '\n';
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(LoadError::Kind::Io, "cannot open " + path.string());
    std::vector<json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw LoadError(LoadError::Kind::Corrupt,
                            path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace tgrag
