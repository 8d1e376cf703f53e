#include "tgrag/extract.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include <spdlog/spdlog.h>

#include "tgrag/errors.hpp"
#include "tgrag/json_io.hpp"
#include "tgrag/prompts.hpp"

namespace tgrag {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string_view> split(std::string_view s, std::string_view delim) {
    std::vector<std::string_view> out;
    if (delim.empty()) {
        out.push_back(s);
        return out;
    }
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(delim, pos);
        if (next == std::string_view::npos) {
            out.push_back(s.substr(pos));
            return out;
        }
        out.push_back(s.substr(pos, next - pos));
        pos = next + delim.size();
    }
}

/// Drops "- ", "* ", "1. " style list markers.
std::string_view strip_bullet(std::string_view s) {
    s = trim(s);
    if (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '+')) return trim(s.substr(1));
    std::size_t i = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')') && i + 1 < s.size() && s[i + 1] == ' ') {
        return trim(s.substr(i + 1));
    }
    return s;
}

std::string unquote(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
        s = trim(s.substr(1, s.size() - 2));
    }
    return std::string(s);
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

/// Groups lines into candidate records: a line opening with '(' starts one,
/// following lines continue it until its closing parenthesis.
std::vector<std::string> logical_records(std::string_view piece) {
    std::vector<std::string> out;
    bool open = false;
    for (auto line : split(piece, "\n")) {
        auto s = strip_bullet(line);
        if (s.empty()) continue;
        if (s.front() == '(') {
            out.emplace_back(s);
        } else if (open && !out.empty()) {
            out.back() += "\n";
            out.back() += s;
        } else {
            out.emplace_back(s);
        }
        auto t = trim(std::string_view(out.back()));
        while (!t.empty() && (t.back() == ',' || t.back() == ';')) t = trim(t.substr(0, t.size() - 1));
        open = !t.empty() && t.front() == '(' && t.back() != ')';
    }
    return out;
}

struct ExampleRelation {
    const char* source;
    const char* target;
    const char* description;
    double strength;
};

ExtractionOutput extraction_example() {
    ExtractionOutput ex;
    const std::pair<const char*, const char*> people[] = {
        {"Alex", "Alex is a character who experiences frustration and is observant of the dynamics among other characters."},
        {"Taylor", "Taylor is portrayed with authoritarian certainty and shows a moment of reverence towards a device, indicating a change in perspective."},
        {"Jordan", "Jordan shares a commitment to discovery and has a significant interaction with Taylor regarding a device."},
        {"Cruz", "Cruz is associated with a vision of control and order, influencing the dynamics among other characters."},
    };
    for (const auto& [name, desc] : people) ex.entities.push_back({normalize_entity_name(name), "person", desc, {}, {}});
    ex.entities.push_back({"THE DEVICE", "technology",
                           "The Device is central to the story, with potential game-changing implications, and is revered by Taylor.",
                           {}, {}});
    const ExampleRelation rels[] = {
        {"Alex", "Taylor", "Alex is affected by Taylor's authoritarian certainty and observes changes in Taylor's attitude towards the device.", 7},
        {"Alex", "Jordan", "Alex and Jordan share a commitment to discovery, which contrasts with Cruz's vision.", 6},
        {"Taylor", "Jordan", "Taylor and Jordan interact directly regarding the device, leading to a moment of mutual respect and an uneasy truce.", 8},
        {"Jordan", "Cruz", "Jordan's commitment to discovery is in rebellion against Cruz's vision of control and order.", 5},
        {"Taylor", "The Device", "Taylor shows reverence towards the device, indicating its importance and potential impact.", 9},
    };
    for (const auto& r : rels) {
        ex.relations.push_back({normalize_entity_name(r.source), normalize_entity_name(r.target), r.description,
                                r.strength, {}, {}, false});
    }
    return ex;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

}  // namespace

std::vector<std::string> default_entity_types() {
    return {"organization", "person", "location", "product", "technology", "event", "metric"};
}

std::string normalize_entity_name(std::string_view name) {
    std::string out;
    bool pending_space = false;
    for (char ch : trim(name)) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::toupper(c)));
    }
    return out;
}

std::string_view to_string(MalformedReason r) {
    switch (r) {
        case MalformedReason::NotARecord: return "not_a_record";
        case MalformedReason::Unterminated: return "unterminated";
        case MalformedReason::UnknownTag: return "unknown_tag";
        case MalformedReason::WrongArity: return "wrong_arity";
        case MalformedReason::BadStrength: return "bad_strength";
        case MalformedReason::EmptyField: return "empty_field";
        case MalformedReason::SelfLoop: return "self_loop";
    }
    return "unknown";
}

ChatRequest render_extraction_prompt(const Chunk& chunk, const std::vector<std::string>& entity_types,
                                     const DelimiterSet& delimiters) {
    if (entity_types.empty()) throw PreconditionError("extraction prompt needs at least one entity type");
    ChatRequest req;
    req.user_prompt = prompts::render(prompts::kExtraction,
                                      {{"tuple_delimiter", delimiters.tuple},
                                       {"record_delimiter", delimiters.record},
                                       {"completion_delimiter", delimiters.completion},
                                       {"entity_types", join(entity_types, ", ")},
                                       {"example_types", std::string(prompts::kExtractionExampleTypes)},
                                       {"example_text", std::string(prompts::kExtractionExampleText)},
                                       {"example_output", serialize_extraction(extraction_example(), delimiters)},
                                       {"input_text", chunk.text}});
    req.request_id = chunk.chunk_id;
    return req;
}

ExtractionOutput parse_extraction(std::string_view raw, const ExtractionOptions& options) {
    const auto& d = options.delimiters;
    if (!d.completion.empty()) {
        const auto stop = raw.find(d.completion);
        if (stop != std::string_view::npos) raw = raw.substr(0, stop);
    }

    std::set<std::string, std::less<>> allowed;
    for (const auto& t : options.entity_types) allowed.insert(lower(trim(t)));

    ExtractionOutput out;
    auto malformed = [&out](std::string_view line, MalformedReason why) {
        out.malformed_lines.push_back({std::string(line), why});
    };

    for (auto piece : split(raw, d.record)) {
        for (const auto& rec : logical_records(piece)) {
            std::string_view s = trim(std::string_view(rec));
            while (!s.empty() && (s.back() == ',' || s.back() == ';')) s = trim(s.substr(0, s.size() - 1));
            if (s.empty() || s.front() != '(') {
                malformed(rec, MalformedReason::NotARecord);
                continue;
            }
            if (s.back() != ')') {
                malformed(rec, MalformedReason::Unterminated);
                continue;
            }
            const auto raw_fields = split(s.substr(1, s.size() - 2), d.tuple);
            std::vector<std::string> fields;
            fields.reserve(raw_fields.size());
            for (auto f : raw_fields) fields.push_back(unquote(f));

            const auto tag = lower(fields.front());
            if (tag == "entity") {
                if (fields.size() != 4) {
                    malformed(rec, MalformedReason::WrongArity);
                    continue;
                }
                EntityRecord e;
                e.name = normalize_entity_name(fields[1]);
                e.entity_type = lower(fields[2]);
                e.description = fields[3];
                if (e.name.empty() || e.description.empty()) {
                    malformed(rec, MalformedReason::EmptyField);
                    continue;
                }
                if (!allowed.empty() && !allowed.contains(e.entity_type)) {
                    if (e.entity_type != "other") {
                        spdlog::warn("entity {} has unlisted type '{}'; stored as 'other'", e.name, e.entity_type);
                        ++out.retyped_entities;
                    }
                    e.entity_type = "other";
                }
                out.entities.push_back(std::move(e));
            } else if (tag == "relationship") {
                if (fields.size() != 5) {
                    malformed(rec, MalformedReason::WrongArity);
                    continue;
                }
                RelationRecord r;
                r.source_name = normalize_entity_name(fields[1]);
                r.target_name = normalize_entity_name(fields[2]);
                r.description = fields[3];
                if (r.source_name.empty() || r.target_name.empty() || r.description.empty()) {
                    malformed(rec, MalformedReason::EmptyField);
                    continue;
                }
                const auto strength = parse_number(fields[4]);
                if (!strength) {
                    malformed(rec, MalformedReason::BadStrength);
                    continue;
                }
                if (r.source_name == r.target_name) {
                    malformed(rec, MalformedReason::SelfLoop);
                    continue;
                }
                r.strength = *strength;
                out.relations.push_back(std::move(r));
            } else {
                malformed(rec, MalformedReason::UnknownTag);
            }
        }
    }

    std::set<std::string, std::less<>> names;
    for (const auto& e : out.entities) names.insert(e.name);
    for (auto& r : out.relations) r.dangling = !names.contains(r.source_name) || !names.contains(r.target_name);
    return out;
}

std::string serialize_extraction(const ExtractionOutput& out, const DelimiterSet& d) {
    std::vector<std::string> records;
    records.reserve(out.entities.size() + out.relations.size());
    const auto q = [](std::string_view s) { return "\"" + std::string(s) + "\""; };
    for (const auto& e : out.entities) {
        records.push_back("(" + q("entity") + d.tuple + q(e.name) + d.tuple + q(e.entity_type) + d.tuple +
                          q(e.description) + ")");
    }
    for (const auto& r : out.relations) {
        records.push_back("(" + q("relationship") + d.tuple + q(r.source_name) + d.tuple + q(r.target_name) +
                          d.tuple + q(r.description) + d.tuple + format_number(r.strength) + ")");
    }
    std::string text = join(records, d.record + "\n");
    if (!text.empty()) text += "\n";
    return text + d.completion;
}

std::string archive_file_name(std::string_view chunk_id) {
    std::string out(chunk_id);
    for (auto& c : out) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    }
    return out + ".txt";
}

ExtractionOutput extract_chunk(const Chunk& chunk, ChatProvider& llm, const ExtractionOptions& options,
                               const std::optional<std::filesystem::path>& archive_dir) {
    auto req = render_extraction_prompt(chunk, options.entity_types, options.delimiters);
    req.max_tokens = options.max_tokens;
    req.temperature = options.temperature;

    std::string raw;
    try {
        raw = llm.chat(req);
    } catch (const EmptyResponseError& e) {
        throw EmptyResponseError("extraction of chunk " + chunk.chunk_id + ": " + e.what(), chunk.chunk_id);
    } catch (const ProviderError& e) {
        throw ProviderError("extraction of chunk " + chunk.chunk_id + ": " + e.what(), chunk.chunk_id);
    }
    if (archive_dir) write_file(*archive_dir / archive_file_name(chunk.chunk_id), raw);

    auto out = parse_extraction(raw, options);
    for (auto& e : out.entities) {
        e.source_chunk = chunk.chunk_id;
        e.time_label = chunk.time_label;
    }
    for (auto& r : out.relations) {
        r.source_chunk = chunk.chunk_id;
        r.time_label = chunk.time_label;
    }
    for (const auto& m : out.malformed_lines) {
        spdlog::debug("chunk {}: malformed extraction record ({}): {}", chunk.chunk_id, to_string(m.reason), m.line);
    }
    return out;
}

}  // namespace tgrag
