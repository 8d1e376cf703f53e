#include "tgrag/benchgen.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <regex>

#include <spdlog/spdlog.h>

#include "tgrag/hashing.hpp"
#include "tgrag/json_io.hpp"
#include "tgrag/parallel.hpp"
#include "tgrag/prompts.hpp"
#include "tgrag/tqd.hpp"
#include "tgrag/vectorindex.hpp"

namespace tgrag {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string chat(ChatProvider& llm, std::string prompt, const BenchgenOptions& o, std::string id) {
    ChatRequest req;
    req.user_prompt = std::move(prompt);
    req.max_tokens = o.max_tokens;
    req.temperature = o.temperature;
    req.request_id = std::move(id);
    return llm.chat(req);
}

// Value of the first key whose lower-cased form is one of `names`.
std::optional<std::string> field(const ordered_json& obj, std::initializer_list<std::string_view> names) {
    for (const auto& [k, v] : obj.items()) {
        const std::string lk = lower(k);
        for (auto n : names) {
            if (lk == n && v.is_string()) return v.get<std::string>();
        }
    }
    return std::nullopt;
}

std::vector<ordered_json> parse_objects(std::string_view raw) {
    std::vector<ordered_json> out;
    const auto lb = raw.find('[');
    const auto rb = raw.rfind(']');
    if (lb != std::string_view::npos && rb != std::string_view::npos && lb < rb) {
        auto arr = ordered_json::parse(raw.substr(lb, rb - lb + 1), nullptr, false);
        if (!arr.is_discarded() && arr.is_array()) {
            for (auto& o : arr) {
                if (o.is_object()) out.push_back(std::move(o));
            }
            if (!out.empty()) return out;
        }
    }
    for (auto span : scan_json_objects(raw)) {
        auto o = ordered_json::parse(span, nullptr, false);
        if (!o.is_discarded() && o.is_object()) out.push_back(std::move(o));
    }
    return out;
}

std::string year_list(const std::vector<TimeLabel>& years) {
    std::string s;
    for (std::size_t i = 0; i < years.size(); ++i) {
        if (i > 0) s += (i + 1 == years.size()) ? " and " : ", ";
        s += years[i].raw();
    }
    return s;
}

}  // namespace

std::string_view to_string(TimeClass c) {
    switch (c) {
        case TimeClass::Single: return "single";
        case TimeClass::Dual: return "dual";
        case TimeClass::Multi: return "multi";
        case TimeClass::Non: return "non";
    }
    return "?";
}

TimeClass time_class_from_string(std::string_view s) {
    const std::string l = lower(trim(s));
    if (l == "single") return TimeClass::Single;
    if (l == "dual") return TimeClass::Dual;
    if (l == "multi") return TimeClass::Multi;
    if (l == "non") return TimeClass::Non;
    throw ConfigError("unknown time class \"" + std::string(s) + "\" (expected single, dual, multi or non)");
}

std::set<TimeClass> parse_time_classes(std::string_view csv) {
    std::set<TimeClass> out;
    if (lower(trim(csv)) == "all") return {TimeClass::Single, TimeClass::Dual, TimeClass::Multi, TimeClass::Non};
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        const auto comma = csv.find(',', pos);
        const auto part = csv.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        out.insert(time_class_from_string(part));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

void QAItem::validate() const {
    const std::size_t n = time_labels.size();
    const bool ok = (time_class == TimeClass::Single && n == 1) || (time_class == TimeClass::Dual && n == 2) ||
                    (time_class == TimeClass::Multi && n >= 3) || (time_class == TimeClass::Non && n == 0);
    if (!ok) {
        throw DataError("QA item " + qa_id + ": class " + std::string(to_string(time_class)) + " with " + std::to_string(n) +
                        " time labels");
    }
    if (question.empty()) throw DataError("QA item " + qa_id + " has an empty question");
    for (const auto& t : time_labels) {
        if (!evidence.count(t)) throw DataError("QA item " + qa_id + " lacks evidence for " + t.raw());
    }
}

std::vector<std::string_view> scan_json_objects(std::string_view raw) {
    std::vector<std::string_view> out;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const char c = raw[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"' && depth > 0) {
            in_string = true;
        } else if (c == '{') {
            if (depth++ == 0) start = i;
        } else if (c == '}' && depth > 0) {
            if (--depth == 0) out.push_back(raw.substr(start, i - start + 1));
        }
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> parse_keypoints(std::string_view raw) {
    std::vector<std::pair<std::string, std::string>> out;
    const auto lb = raw.find('{');
    const auto rb = raw.rfind('}');
    if (lb != std::string_view::npos && rb != std::string_view::npos && lb < rb) {
        auto obj = ordered_json::parse(raw.substr(lb, rb - lb + 1), nullptr, false);
        if (!obj.is_discarded() && obj.is_object()) {
            for (const auto& [k, v] : obj.items()) {
                if (v.is_string() && !trim(v.get<std::string>()).empty()) out.emplace_back(k, v.get<std::string>());
            }
            return out;
        }
    }
    // Pairs without the enclosing object, as some models answer.
    static const std::regex pair_re(R"re("((?:[^"\\]|\\.)*)"\s*:\s*"((?:[^"\\]|\\.)*)")re");
    const std::string text(raw);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), pair_re); it != std::sregex_iterator(); ++it) {
        const auto k = json::parse("\"" + (*it)[1].str() + "\"", nullptr, false);
        const auto v = json::parse("\"" + (*it)[2].str() + "\"", nullptr, false);
        if (k.is_discarded() || v.is_discarded()) continue;
        if (!trim(v.get<std::string>()).empty()) out.emplace_back(k.get<std::string>(), v.get<std::string>());
    }
    if (out.empty() && raw.find('{') == std::string_view::npos) {
        throw GenerationError("key-point answer holds no JSON object", std::string(raw));
    }
    return out;
}

std::vector<std::string> lint_summary(std::string_view summary) {
    std::vector<std::string> w;
    if (summary.find('{') != std::string_view::npos || summary.find('}') != std::string_view::npos) {
        w.push_back("summary contains JSON-like braces");
    }
    static const std::regex list_re(R"((^|\n)\s*([-*•]|\d+[.)])\s)");
    const std::string s(summary);
    if (std::regex_search(s, list_re)) w.push_back("summary contains list formatting");
    if (s.find('#') != std::string::npos || s.find("**") != std::string::npos) w.push_back("summary contains Markdown markup");
    return w;
}

Summary summarize_chunk(const Chunk& chunk, ChatProvider& llm, const BenchgenOptions& options) {
    if (trim(chunk.text).empty()) throw PreconditionError("summarize_chunk: chunk " + chunk.chunk_id + " is empty");
    Summary s;
    s.text = std::string(trim(chat(llm, prompts::render(prompts::kSummary, {{"text", chunk.text}}), options,
                                   "summary " + chunk.chunk_id)));
    s.lint = lint_summary(s.text);
    for (const auto& w : s.lint) spdlog::warn("{}: {}", chunk.chunk_id, w);
    return s;
}

std::vector<KeyPoint> extract_keypoints(std::string_view summary, const TimeLabel& time_label, const std::string& source_chunk,
                                        ChatProvider& llm, const BenchgenOptions& options) {
    if (trim(summary).empty()) throw PreconditionError("extract_keypoints: empty summary");
    const std::string raw = chat(llm, prompts::render(prompts::kKeyPoints, {{"summary", std::string(summary)}}), options,
                                 "keypoints " + source_chunk);
    std::vector<KeyPoint> out;
    for (auto& [key, text] : parse_keypoints(raw)) {
        KeyPoint kp;
        kp.point_id = source_chunk + ":" + key;
        kp.time_label = time_label;
        kp.text = std::string(trim(text));
        kp.source_chunk = source_chunk;
        out.push_back(std::move(kp));
    }
    return out;
}

void embed_keypoints(std::vector<KeyPoint>& points, EmbeddingProvider& em) {
    if (points.empty()) return;
    std::vector<std::string> texts;
    for (const auto& p : points) texts.push_back(p.text);
    auto vecs = em.embed(texts);
    for (std::size_t i = 0; i < points.size(); ++i) points[i].vector = std::move(vecs[i]);
}

std::vector<TekChain> link_tek(const std::map<TimeLabel, std::vector<KeyPoint>>& points_by_year, double threshold) {
    if (points_by_year.size() < 2) throw PreconditionError("link_tek needs key points from at least two periods");
    Eigen::Index dim = -1;
    for (const auto& [t, pts] : points_by_year) {
        for (const auto& p : pts) {
            if (p.vector.size() == 0) throw PreconditionError("key point " + p.point_id + " is not embedded");
            if (dim < 0) dim = p.vector.size();
            if (p.vector.size() != dim) throw PreconditionError("key point " + p.point_id + " has a different dimension");
        }
    }
    std::vector<TekChain> out;
    const auto latest = std::prev(points_by_year.end());
    for (const auto& anchor : latest->second) {
        TekChain chain{anchor, {}};
        for (auto it = std::make_reverse_iterator(latest); it != points_by_year.rend(); ++it) {
            const KeyPoint* best = nullptr;
            double best_sim = 0.0;
            for (const auto& p : it->second) {
                const double sim = cosine(anchor.vector, p.vector);
                if (!best || sim > best_sim || (sim == best_sim && p.point_id < best->point_id)) {
                    best = &p;
                    best_sim = sim;
                }
            }
            if (best && best_sim >= threshold) chain.links.push_back({*best, best_sim});
        }
        if (!chain.links.empty()) out.push_back(std::move(chain));
    }
    return out;
}

std::vector<SweepRow> sweep_tek(const std::map<TimeLabel, std::vector<KeyPoint>>& points_by_year,
                                const std::vector<double>& thresholds) {
    std::vector<SweepRow> rows;
    for (double th : thresholds) {
        const auto chains = link_tek(points_by_year, th);
        SweepRow r{th, chains.size(), 0};
        for (const auto& c : chains) r.multi_chains += c.time_points() >= 3 ? 1 : 0;
        rows.push_back(r);
    }
    return rows;
}

std::string make_qa_id(TimeClass cls, std::string_view question, const std::set<TimeLabel>& labels) {
    std::string key(question);
    for (const auto& t : labels) key += "|" + t.raw();
    return std::string(to_string(cls)) + "-" + sha256_hex(key).substr(0, 12);
}

QaBatch generate_chunk_qa(const Chunk& chunk, TimeClass cls, ChatProvider& llm, const BenchgenOptions& options) {
    if (cls != TimeClass::Single && cls != TimeClass::Non) throw PreconditionError("chunk QA covers the single and non classes");
    if (trim(chunk.text).empty()) throw PreconditionError("generate_chunk_qa: chunk " + chunk.chunk_id + " is empty");
    const auto tmpl = cls == TimeClass::Single ? prompts::kSingleTimeQa : prompts::kNonTimeQa;
    QaBatch batch;
    batch.raw_output = chat(llm, prompts::render(tmpl, {{"text", chunk.text}}), options,
                            std::string(to_string(cls)) + "-qa " + chunk.chunk_id);
    const auto objects = parse_objects(batch.raw_output);
    if (objects.empty()) throw GenerationError("QA answer for " + chunk.chunk_id + " holds no JSON object", batch.raw_output);
    for (const auto& o : objects) {
        auto q = field(o, {"question"});
        auto a = field(o, {"answer"});
        if (!q || !a || trim(*q).empty() || trim(*a).empty()) {
            ++batch.dropped;
            continue;
        }
        const bool has_year = has_year_token(*q);
        if ((cls == TimeClass::Single) != has_year) {
            ++batch.dropped;
            continue;
        }
        QAItem item;
        item.question = std::string(trim(*q));
        item.answer = std::string(trim(*a));
        item.time_class = cls;
        if (cls == TimeClass::Single) item.time_labels = {chunk.time_label};
        auto original = field(o, {"originaltext", "original text"});
        item.evidence[chunk.time_label] = original && !trim(*original).empty() ? *original : chunk.text;
        item.qa_id = make_qa_id(cls, item.question, item.time_labels);
        batch.items.push_back(std::move(item));
    }
    return batch;
}

QAItem generate_chain_qa(const TekChain& chain, TimeClass cls, const ChunkStore& chunks, ChatProvider& llm,
                         const BenchgenOptions& options) {
    std::vector<const KeyPoint*> pts{&chain.anchor};
    if (cls == TimeClass::Dual) {
        if (chain.links.empty()) throw PreconditionError("dual-time QA needs a chain with one link");
        pts.push_back(&chain.links.front().point);
    } else if (cls == TimeClass::Multi) {
        if (chain.time_points() < 3) throw PreconditionError("multi-time QA needs at least three time points");
        for (const auto& l : chain.links) pts.push_back(&l.point);
    } else {
        throw PreconditionError("chain QA covers the dual and multi classes");
    }
    std::sort(pts.begin(), pts.end(), [](const KeyPoint* a, const KeyPoint* b) { return a->time_label < b->time_label; });
    std::vector<std::string> texts;
    std::vector<TimeLabel> years;
    for (const KeyPoint* p : pts) {
        const Chunk* c = chunks.find(p->source_chunk);
        if (!c) throw DataError("key point " + p->point_id + " refers to unknown chunk " + p->source_chunk);
        texts.push_back(c->text);
        years.push_back(p->time_label);
    }

    std::string prompt;
    if (cls == TimeClass::Dual) {
        prompt = prompts::render(prompts::kDualTimeQa, {{"year1", years[0].raw()},
                                                        {"keypoint1", pts[0]->text},
                                                        {"text1", texts[0]},
                                                        {"year2", years[1].raw()},
                                                        {"keypoint2", pts[1]->text},
                                                        {"text2", texts[1]}});
    } else {
        std::string fields;
        std::string inputs;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const std::string& y = years[i].raw();
            if (i > 0) fields += ", ";
            fields += "\"Original text from " + y + " report\": \"<original text from " + y + " report>\"";
            inputs += "keypoint in " + y + " Annual Report:" + pts[i]->text + ", Corresponding original text: " + texts[i] +
                      (i + 1 < pts.size() ? ";\n" : "");
        }
        prompt = prompts::render(prompts::kMultiTimeQa, {{"count", std::to_string(pts.size())},
                                                         {"years", year_list(years)},
                                                         {"output_fields", fields},
                                                         {"inputs", inputs}});
    }
    const std::string raw = chat(llm, prompt, options, std::string(to_string(cls)) + "-qa " + chain.anchor.point_id);
    for (const auto& o : parse_objects(raw)) {
        auto q = field(o, {"question"});
        auto a = field(o, {"answer"});
        if (!q || !a || trim(*q).empty() || trim(*a).empty()) continue;
        QAItem item;
        item.question = std::string(trim(*q));
        item.answer = std::string(trim(*a));
        item.time_class = cls;
        for (std::size_t i = 0; i < years.size(); ++i) {
            item.time_labels.insert(years[i]);
            std::string ev = texts[i];
            for (const auto& [k, v] : o.items()) {
                const std::string lk = lower(k);
                if (v.is_string() && lk.find("original") != std::string::npos && lk.find(years[i].raw()) != std::string::npos &&
                    !trim(v.get<std::string>()).empty()) {
                    ev = v.get<std::string>();
                    break;
                }
            }
            item.evidence[years[i]] = std::move(ev);
        }
        item.qa_id = make_qa_id(cls, item.question, item.time_labels);
        return item;
    }
    throw GenerationError(std::string(to_string(cls)) + "-time QA answer holds no question/answer object", raw);
}

std::string dataset_to_jsonl(const std::vector<QAItem>& items) {
    std::string out;
    for (const auto& it : items) {
        ordered_json j;
        j["qa_id"] = it.qa_id;
        j["question"] = it.question;
        j["answer"] = it.answer;
        j["time_class"] = std::string(to_string(it.time_class));
        ordered_json labels = ordered_json::array();
        for (const auto& t : it.time_labels) labels.push_back(t.raw());
        j["time_labels"] = std::move(labels);
        ordered_json ev = ordered_json::object();
        for (const auto& [t, text] : it.evidence) ev[t.raw()] = text;
        j["evidence"] = std::move(ev);
        out += j.dump() + "\n";
    }
    return out;
}

void save_dataset(const std::vector<QAItem>& items, const std::filesystem::path& path) {
    for (const auto& it : items) it.validate();
    write_file(path, dataset_to_jsonl(items));
}

std::vector<QAItem> load_dataset(const std::filesystem::path& path) {
    const auto rows = read_jsonl(path);
    std::vector<QAItem> items;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& j = rows[i];
        const std::string where = path.string() + " record " + std::to_string(i + 1);
        try {
            QAItem it;
            it.qa_id = j.at("qa_id").get<std::string>();
            it.question = j.at("question").get<std::string>();
            it.answer = j.at("answer").get<std::string>();
            it.time_class = time_class_from_string(j.at("time_class").get<std::string>());
            for (const auto& t : j.at("time_labels")) it.time_labels.insert(TimeLabel::parse(t.get<std::string>()));
            for (const auto& [k, v] : j.at("evidence").items()) it.evidence[TimeLabel::parse(k)] = v.get<std::string>();
            it.validate();
            if (!ids.insert(it.qa_id).second) throw DataError("duplicate qa_id " + it.qa_id);
            items.push_back(std::move(it));
        } catch (const json::exception& e) {
            throw DataError(where + ": " + e.what());
        } catch (const Error& e) {
            throw DataError(where + ": " + e.what());
        }
    }
    return items;
}

std::string review_markdown(const std::vector<QAItem>& items) {
    std::string md = "# Dataset review\n\n";
    for (const auto& it : items) {
        md += "## " + it.qa_id + " (" + std::string(to_string(it.time_class)) + ")\n\n";
        md += "**Question:** " + it.question + "\n\n**Answer:** " + it.answer + "\n\n";
        for (const auto& [t, text] : it.evidence) {
            md += "### Evidence " + t.raw() + "\n\n";
            std::string quoted = "> ";
            for (char c : text) {
                quoted += c;
                if (c == '\n') quoted += "> ";
            }
            md += quoted + "\n\n";
        }
        md += "- [ ] checked\n\n";
    }
    return md;
}

std::map<TimeLabel, std::vector<KeyPoint>> collect_keypoints(const ChunkStore& chunks, ChatProvider& llm, EmbeddingProvider& em,
                                                             const DatasetBuildOptions& options,
                                                             std::vector<std::string>& failures) {
    std::vector<const Chunk*> all;
    for (const auto& [id, c] : chunks.all()) all.push_back(&c);
    std::vector<std::vector<KeyPoint>> kps(all.size());
    std::vector<std::string> errors(all.size());
    parallel_for(all.size(), options.workers, [&](std::size_t i) {
        try {
            const Summary s = summarize_chunk(*all[i], llm, options.generation);
            kps[i] = extract_keypoints(s.text, all[i]->time_label, all[i]->chunk_id, llm, options.generation);
        } catch (const ProviderError& e) {
            errors[i] = "key points for " + all[i]->chunk_id + ": " + e.what();
        } catch (const DataError& e) {
            errors[i] = "key points for " + all[i]->chunk_id + ": " + e.what();
        }
    });
    for (const auto& e : errors) {
        if (e.empty()) continue;
        spdlog::warn("{}", e);
        failures.push_back(e);
    }
    std::vector<KeyPoint> flat;
    for (auto& v : kps) flat.insert(flat.end(), v.begin(), v.end());
    embed_keypoints(flat, em);
    std::map<TimeLabel, std::vector<KeyPoint>> by_year;
    for (auto& p : flat) by_year[p.time_label].push_back(std::move(p));
    return by_year;
}

DatasetBuild build_dataset(const ChunkStore& chunks, ChatProvider& llm, EmbeddingProvider& em, const DatasetBuildOptions& options) {
    DatasetBuild build;
    std::mutex mu;
    std::vector<const Chunk*> all;
    for (const auto& [id, c] : chunks.all()) all.push_back(&c);
    auto fail = [&](const std::string& what) {
        std::lock_guard lock(mu);
        build.failures.push_back(what);
        spdlog::warn("{}", what);
    };
    std::vector<std::vector<QAItem>> per_chunk(all.size());

    for (TimeClass cls : {TimeClass::Single, TimeClass::Non}) {
        if (!options.classes.count(cls)) continue;
        parallel_for(all.size(), options.workers, [&](std::size_t i) {
            try {
                auto batch = generate_chunk_qa(*all[i], cls, llm, options.generation);
                std::lock_guard lock(mu);
                build.lint_dropped += batch.dropped;
                per_chunk[i].insert(per_chunk[i].end(), batch.items.begin(), batch.items.end());
            } catch (const ProviderError& e) {
                fail(std::string(to_string(cls)) + " QA for " + all[i]->chunk_id + ": " + e.what());
            } catch (const DataError& e) {
                fail(std::string(to_string(cls)) + " QA for " + all[i]->chunk_id + ": " + e.what());
            }
        });
    }
    std::vector<QAItem> candidates;
    for (auto& v : per_chunk) candidates.insert(candidates.end(), v.begin(), v.end());

    if (options.classes.count(TimeClass::Dual) || options.classes.count(TimeClass::Multi)) {
        auto by_year = collect_keypoints(chunks, llm, em, options, build.failures);
        if (by_year.size() < 2) {
            build.warnings.push_back("key points cover fewer than two periods; no dual- or multi-time items");
        } else {
            const auto chains = link_tek(by_year, options.tek_threshold);
            build.chains = chains.size();
            if (chains.empty()) build.warnings.push_back("no TEK chains at threshold " + std::to_string(options.tek_threshold));
            for (TimeClass cls : {TimeClass::Dual, TimeClass::Multi}) {
                if (!options.classes.count(cls)) continue;
                std::vector<const TekChain*> usable;
                for (const auto& c : chains) {
                    if (cls == TimeClass::Dual || c.time_points() >= 3) usable.push_back(&c);
                }
                std::vector<std::optional<QAItem>> got(usable.size());
                parallel_for(usable.size(), options.workers, [&](std::size_t i) {
                    try {
                        got[i] = generate_chain_qa(*usable[i], cls, chunks, llm, options.generation);
                    } catch (const ProviderError& e) {
                        fail(std::string(to_string(cls)) + " QA for " + usable[i]->anchor.point_id + ": " + e.what());
                    } catch (const DataError& e) {
                        fail(std::string(to_string(cls)) + " QA for " + usable[i]->anchor.point_id + ": " + e.what());
                    }
                });
                for (auto& g : got) {
                    if (g) candidates.push_back(std::move(*g));
                }
            }
        }
    }

    std::set<std::string> ids;
    for (auto& item : candidates) {
        const auto limit_it = options.max_per_class.find(item.time_class);
        const std::size_t limit = limit_it == options.max_per_class.end() ? 0 : limit_it->second;
        if (limit > 0 && build.counts[item.time_class] >= limit) continue;
        if (!ids.insert(item.qa_id).second) continue;
        ++build.counts[item.time_class];
        build.items.push_back(std::move(item));
    }
    return build;
}

}  // namespace tgrag
