#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tgrag/tokenizer.hpp"

namespace tgrag::testing {

namespace fs = std::filesystem;

fs::path fixture_path(const std::string& name) { return fs::path(TGRAG_FIXTURE_DIR) / name; }

TempDir::TempDir() {
    std::random_device rd;
    for (;;) {
        path_ = fs::temp_directory_path() / ("tgrag-test-" + std::to_string(rd()));
        if (fs::create_directory(path_)) break;
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

namespace {

std::size_t pick(std::mt19937& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::string entity_name(std::size_t i) { return "E" + std::to_string(i); }

}  // namespace

std::vector<ExtractionOutput> random_extractions(std::mt19937& rng, std::size_t max_entities, std::size_t max_years) {
    const std::size_t n_entities = pick(rng, 1, max_entities);
    const std::size_t n_years = pick(rng, 1, max_years);
    std::vector<ExtractionOutput> outs;
    for (std::size_t y = 0; y < n_years; ++y) {
        const TimeLabel t = TimeLabel::from_ordinal(2019 + static_cast<long>(y));
        const std::size_t n_chunks = pick(rng, 1, 3);
        for (std::size_t c = 0; c < n_chunks; ++c) {
            ExtractionOutput out;
            const std::string chunk_id = make_chunk_id(t.raw() + "/doc", c);
            std::vector<std::string> present;
            for (std::size_t e = 0; e < n_entities; ++e) {
                if (pick(rng, 0, 2) == 0) continue;
                const std::string name = entity_name(e);
                present.push_back(name);
                // Small text pool: the same fact recurs across chunks and years.
                out.entities.push_back({name, e % 2 ? "organization" : "product",
                                        name + " fact " + std::to_string(pick(rng, 0, 3)), chunk_id, t});
            }
            if (present.size() >= 2) {
                const std::size_t n_rel = pick(rng, 0, present.size());
                for (std::size_t r = 0; r < n_rel; ++r) {
                    const std::size_t a = pick(rng, 0, present.size() - 1);
                    std::size_t b = pick(rng, 0, present.size() - 1);
                    if (a == b) b = (b + 1) % present.size();
                    RelationRecord rec;
                    rec.source_name = present[a];
                    rec.target_name = present[b];
                    rec.description = present[a] + " links " + present[b] + " " + std::to_string(pick(rng, 0, 2));
                    rec.strength = static_cast<double>(pick(rng, 1, 10));
                    rec.source_chunk = chunk_id;
                    rec.time_label = t;
                    out.relations.push_back(rec);
                }
            }
            outs.push_back(std::move(out));
        }
    }
    return outs;
}

TemporalGraph build_graph(const std::vector<ExtractionOutput>& outputs) {
    TemporalGraph g;
    for (const auto& o : outputs) g.upsert(o);
    return g;
}

std::multiset<UnitKey> knowledge_multiset(const TemporalGraph& g) {
    std::multiset<UnitKey> out;
    for (const auto& [name, e] : g.entities()) {
        for (const auto& u : e.knowledge) out.insert({name, u.time_label.ordinal(), u.text});
    }
    for (const auto& [key, r] : g.relations()) {
        for (const auto& u : r.knowledge) out.insert({key.source + "->" + key.target, u.time_label.ordinal(), u.text});
    }
    return out;
}

std::multiset<UnitKey> knowledge_multiset(const TemporalSubgraph& s) {
    std::multiset<UnitKey> out;
    for (const auto& [name, v] : s.entities()) {
        for (const auto* u : v.knowledge) out.insert({name, u->time_label.ordinal(), u->text});
    }
    for (const auto& v : s.relations()) {
        for (const auto* u : v.knowledge) {
            out.insert({v.relation->source + "->" + v.relation->target, u->time_label.ordinal(), u->text});
        }
    }
    return out;
}

namespace {

Eigen::VectorXd small_int_vector(std::mt19937& rng, std::size_t dim, int range) {
    std::uniform_int_distribution<int> d(-range, range);
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    do {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = d(rng);
    } while (v.squaredNorm() == 0.0);
    return v;
}

}  // namespace

SubgraphIndex random_index(std::mt19937& rng, std::size_t max_items, Embedding& query) {
    const std::size_t dim = pick(rng, 2, 5);
    const TimeLabel t = TimeLabel::from_ordinal(2020);
    SubgraphIndex idx;
    idx.time_label = t;
    idx.nodes = VectorTable(dim);
    idx.knowledge = VectorTable(dim);
    const std::size_t budget = pick(rng, 2, max_items);
    std::size_t used = 0;
    for (std::size_t e = 0; used + 2 <= budget; ++e) {
        const std::string name = "ENT" + std::to_string(1000 + pick(rng, 0, 8999)) + "_" + std::to_string(e);
        idx.nodes.append({node_item_id(name), ItemKind::Node, name, t, name}, small_int_vector(rng, dim, 2));
        ++used;
        const std::size_t n_k = std::min(pick(rng, 1, 6), budget - used);
        for (std::size_t p = 0; p < n_k; ++p) {
            idx.knowledge_by_owner[name].push_back(idx.knowledge.size());
            idx.knowledge.append({knowledge_item_id(name, p), ItemKind::Knowledge, name, t, name + " unit " + std::to_string(p)},
                                 small_int_vector(rng, dim, 2));
            ++used;
        }
    }
    query = small_int_vector(rng, dim, 2);
    return idx;
}

double naive_cosine(const Eigen::VectorXf& a, const Embedding& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double x = static_cast<double>(a[i]);
        dot += x * b[i];
        na += x * x;
        nb += b[i] * b[i];
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

namespace {

struct Scored {
    std::size_t column;
    std::string id;
    double score;
};

void full_sort(std::vector<Scored>& v) {
    std::sort(v.begin(), v.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
}

}  // namespace

std::vector<ScoredEntity> oracle_candidates(const SubgraphIndex& index, const Embedding& q, std::size_t n) {
    std::vector<Scored> all;
    for (std::size_t j = 0; j < index.nodes.size(); ++j) {
        all.push_back({j, index.nodes.items()[j].item_id, naive_cosine(index.nodes.vectors().col(j), q)});
    }
    full_sort(all);
    std::vector<ScoredEntity> out;
    for (std::size_t i = 0; i < all.size() && i < n; ++i) out.push_back({index.nodes.items()[all[i].column].owner, all[i].score});
    return out;
}

std::vector<ScoredKnowledge> oracle_knowledge(const SubgraphIndex& index, const std::vector<ScoredEntity>& candidates,
                                              const Embedding& q, std::size_t k) {
    std::set<std::string> owners;
    for (const auto& c : candidates) owners.insert(c.name);
    std::vector<Scored> pool;
    for (std::size_t j = 0; j < index.knowledge.size(); ++j) {
        const auto& item = index.knowledge.items()[j];
        if (owners.count(item.owner)) pool.push_back({j, item.item_id, naive_cosine(index.knowledge.vectors().col(j), q)});
    }
    full_sort(pool);
    std::vector<ScoredKnowledge> out;
    for (std::size_t i = 0; i < pool.size() && i < k; ++i) {
        const auto& item = index.knowledge.items()[pool[i].column];
        out.push_back({item.item_id, item.owner, *item.time_label, item.payload_text, pool[i].score});
    }
    return out;
}

std::vector<std::pair<std::string, std::size_t>> oracle_source_texts(const std::set<std::string>& valid,
                                                                     const TemporalGraph& graph,
                                                                     const ChunkStore& chunks,
                                                                     const std::optional<TimeLabel>& t, std::size_t top) {
    auto visible = [&](const std::vector<KnowledgeUnit>& units) {
        return std::any_of(units.begin(), units.end(), [&](const KnowledgeUnit& u) { return !t || u.time_label == *t; });
    };
    std::set<std::string> scope = valid;
    for (const auto& [key, rel] : graph.relations()) {
        if (!visible(rel.knowledge)) continue;
        if (valid.count(key.source)) scope.insert(key.target);
        if (valid.count(key.target)) scope.insert(key.source);
    }
    std::vector<std::pair<std::string, std::size_t>> scored;
    for (const auto& [id, c] : chunks.all()) {
        if (t && c.time_label != *t) continue;
        std::size_t score = 0;
        for (const auto& name : scope) {
            const TemporalEntity* e = graph.find_entity(name);
            if (!e) continue;
            const bool cites = std::any_of(e->knowledge.begin(), e->knowledge.end(),
                                           [&](const KnowledgeUnit& u) { return u.source_chunks.count(id) > 0; });
            score += cites ? 1 : 0;
        }
        if (score >= 1) scored.emplace_back(id, score);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (scored.size() > top) scored.resize(top);
    return scored;
}

namespace {

const std::vector<std::string> kWords = {"revenue", "deliveries", "Ingolstadt", "plant", "2021", "3.4%", "electric",
                                         "a|b", "CO2", "employees", "line\nbreak", "Q3", "e-tron", "—", "net", "cash"};

std::string random_text(std::mt19937& rng, std::size_t max_words) {
    std::string s;
    const std::size_t n = pick(rng, 1, max_words);
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += kWords[pick(rng, 0, kWords.size() - 1)];
    }
    return s;
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string l; std::getline(ss, l);) out.push_back(l);
    return out;
}

}  // namespace

RetrievalResult random_retrieval_result(std::mt19937& rng) {
    RetrievalResult r;
    r.subquery = "random";
    const std::size_t nk = pick(rng, 0, 60);
    double score = 1.0;
    for (std::size_t i = 0; i < nk; ++i) {
        score -= std::uniform_real_distribution<double>(0.0, 0.01)(rng);
        const std::string owner = "ENTITY " + std::to_string(pick(rng, 0, 9));
        r.valid_knowledge.push_back({knowledge_item_id(owner, i), owner, TimeLabel::from_ordinal(2020 + static_cast<long>(pick(rng, 0, 2))),
                                     random_text(rng, 80), score});
    }
    const std::size_t nr = pick(rng, 0, 30);
    for (std::size_t i = 0; i < nr; ++i) {
        ValidRelation v{"SRC " + std::to_string(i), "DST " + std::to_string(i), static_cast<double>(pick(rng, 1, 10)),
                        static_cast<int>(pick(rng, 1, 2)), {}};
        const std::size_t units = pick(rng, 1, 3);
        for (std::size_t u = 0; u < units; ++u) v.knowledge.push_back({random_text(rng, 40), TimeLabel::from_ordinal(2021), {}});
        r.valid_relations.push_back(std::move(v));
    }
    const std::size_t nt = pick(rng, 0, 5);
    for (std::size_t i = 0; i < nt; ++i) {
        Chunk c;
        c.chunk_id = make_chunk_id("doc" + std::to_string(i), 0);
        c.time_label = TimeLabel::from_ordinal(2021);
        c.text = random_text(rng, 200);
        r.valid_texts.push_back({c, 1, {}});
    }
    return r;
}

std::string check_budget_prefix(const RetrievalResult& r, std::size_t budget) {
    const ContextBundle full = assemble_context(r, std::numeric_limits<std::size_t>::max() / 2);
    const ContextBundle b = assemble_context(r, budget);
    std::ostringstream why;
    if (b.total_graph_tokens > budget) {
        why << "total_graph_tokens " << b.total_graph_tokens << " > " << budget;
        return why.str();
    }
    if (b.total_graph_tokens != count_tokens(b.knowledge_section) + count_tokens(b.relations_section)) {
        return "total_graph_tokens disagrees with the rendered sections";
    }
    std::size_t relation_units = 0;
    for (const auto& v : r.valid_relations) relation_units += v.knowledge.size();
    if (full.knowledge_rows != r.valid_knowledge.size() || full.relation_rows != relation_units) {
        return "unbounded assembly dropped rows";
    }
    if (b.sources_section != full.sources_section) return "sources changed under the budget";

    const auto fk = lines_of(full.knowledge_section), bk = lines_of(b.knowledge_section);
    const auto fr = lines_of(full.relations_section), br = lines_of(b.relations_section);
    if (!std::equal(bk.begin(), bk.end(), fk.begin(), fk.begin() + static_cast<std::ptrdiff_t>(std::min(bk.size(), fk.size()))) ||
        bk.size() > fk.size()) {
        return "knowledge rows are not a rank-order prefix";
    }
    if (!std::equal(br.begin(), br.end(), fr.begin(), fr.begin() + static_cast<std::ptrdiff_t>(std::min(br.size(), fr.size()))) ||
        br.size() > fr.size()) {
        return "relation rows are not a rank-order prefix";
    }
    if (b.knowledge_rows < full.knowledge_rows && b.relation_rows > 0) return "relations kept after a knowledge row was cut";

    // Maximality: the first dropped row must not have fit.
    const std::size_t header_lines = 3;
    std::string next;
    if (b.knowledge_rows < full.knowledge_rows) {
        next = fk[header_lines + b.knowledge_rows] + "\n";
        if (b.knowledge_rows == 0) next = fk[0] + "\n" + fk[1] + "\n" + fk[2] + "\n" + next;
    } else if (b.relation_rows < full.relation_rows) {
        next = fr[header_lines + b.relation_rows] + "\n";
        if (b.relation_rows == 0) next = fr[0] + "\n" + fr[1] + "\n" + fr[2] + "\n" + next;
    } else {
        return {};
    }
    if (b.total_graph_tokens + count_tokens(next) <= budget) {
        why << "row dropped although it fits (" << b.total_graph_tokens << " + " << count_tokens(next) << " <= " << budget << ")";
        return why.str();
    }
    return {};
}

std::map<TimeLabel, std::vector<KeyPoint>> planted_keypoints(std::mt19937& rng, std::size_t per_year, std::size_t dim) {
    std::map<TimeLabel, std::vector<KeyPoint>> out;
    const std::vector<long> years{2021, 2022, 2023};
    for (long y : years) {
        auto& pts = out[TimeLabel::from_ordinal(y)];
        for (std::size_t i = 0; i < per_year; ++i) {
            KeyPoint p;
            p.time_label = TimeLabel::from_ordinal(y);
            p.point_id = std::to_string(y) + "/doc#0000:point-" + std::to_string(i);
            p.text = "point " + std::to_string(i) + " of " + std::to_string(y);
            p.source_chunk = make_chunk_id(std::to_string(y) + "/doc", 0);
            p.vector = small_int_vector(rng, dim, 3);
            pts.push_back(std::move(p));
        }
    }
    // Plant near-duplicates of some latest-year points in earlier years,
    // including exact copies that tie.
    auto& latest = out[TimeLabel::from_ordinal(2023)];
    for (std::size_t i = 0; i < latest.size(); i += 2) {
        for (long y : {2022L, 2021L}) {
            auto& pts = out[TimeLabel::from_ordinal(y)];
            KeyPoint& target = pts[pick(rng, 0, pts.size() - 1)];
            target.vector = latest[i].vector;
            const auto mode = pick(rng, 0, 2);
            if (mode == 1) {
                const auto c = static_cast<Eigen::Index>(pick(rng, 0, dim - 1));
                target.vector[c] += pick(rng, 0, 1) ? 1.0 : -1.0;
                if (target.vector.squaredNorm() == 0.0) target.vector[c] = 1.0;
            } else if (mode == 2) {
                KeyPoint& twin = pts[pick(rng, 0, pts.size() - 1)];
                twin.vector = latest[i].vector;
            }
        }
    }
    return out;
}

std::vector<TekChain> oracle_tek(const std::map<TimeLabel, std::vector<KeyPoint>>& points, double threshold) {
    // All-pairs similarity table first, then the per-period argmax.
    std::vector<const KeyPoint*> flat;
    for (const auto& [t, pts] : points) {
        for (const auto& p : pts) flat.push_back(&p);
    }
    std::vector<std::vector<double>> sim(flat.size(), std::vector<double>(flat.size()));
    for (std::size_t i = 0; i < flat.size(); ++i) {
        for (std::size_t j = 0; j < flat.size(); ++j) {
            const auto& a = flat[i]->vector;
            const auto& b = flat[j]->vector;
            double dot = 0, na = 0, nb = 0;
            for (Eigen::Index d = 0; d < a.size(); ++d) {
                dot += a[d] * b[d];
                na += a[d] * a[d];
                nb += b[d] * b[d];
            }
            sim[i][j] = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
        }
    }
    const TimeLabel latest = points.rbegin()->first;
    std::vector<TekChain> out;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        if (flat[i]->time_label != latest) continue;
        TekChain chain{*flat[i], {}};
        for (auto it = std::next(points.rbegin()); it != points.rend(); ++it) {
            std::vector<std::pair<double, std::size_t>> cands;
            for (std::size_t j = 0; j < flat.size(); ++j) {
                if (flat[j]->time_label == it->first) cands.emplace_back(sim[i][j], j);
            }
            std::sort(cands.begin(), cands.end(), [&](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return flat[a.second]->point_id < flat[b.second]->point_id;
            });
            if (!cands.empty() && cands.front().first >= threshold) {
                chain.links.push_back({*flat[cands.front().second], cands.front().first});
            }
        }
        if (!chain.links.empty()) out.push_back(std::move(chain));
    }
    return out;
}

bool same_chains(const std::vector<TekChain>& a, const std::vector<TekChain>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].anchor.point_id != b[i].anchor.point_id || a[i].links.size() != b[i].links.size()) return false;
        for (std::size_t j = 0; j < a[i].links.size(); ++j) {
            if (a[i].links[j].point.point_id != b[i].links[j].point.point_id) return false;
            if (a[i].links[j].similarity != b[i].links[j].similarity) return false;
        }
    }
    return true;
}

DeliveriesFixture deliveries_fixture(EmbeddingProvider& em) {
    DeliveriesFixture f;
    struct Doc {
        long year;
        std::string doc;
        std::string text;
        std::vector<EntityRecord> entities;
        std::vector<RelationRecord> relations;
    };
    const std::vector<Doc> docs = {
        {2022, "deliveries", "In 2022 the Audi Group delivered 1.8 million units worldwide.",
         {{"AUDI GROUP", "organization", "1.8 million units delivered by the Audi Group in 2022.", "", {}},
          {"AUDI BRAND", "organization", "The Audi brand delivered most of the group's cars.", "", {}}},
         {{"AUDI BRAND", "AUDI GROUP", "The Audi brand belongs to the Audi Group.", 8, "", {}, false}}},
        {2022, "finance", "The Audi Group reported revenue of 61.8 billion euros in 2022.",
         {{"AUDI GROUP", "organization", "The Audi Group reported revenue of 61.8 billion euros in 2022.", "", {}}},
         {}},
        {2023, "deliveries", "In 2023 the Audi Group delivered 1.9 million units worldwide.",
         {{"AUDI GROUP", "organization", "1.9 million units delivered by the Audi Group in 2023.", "", {}},
          {"AUDI BRAND", "organization", "The Audi brand again delivered most of the group's cars.", "", {}}},
         {{"AUDI BRAND", "AUDI GROUP", "The Audi brand belongs to the Audi Group.", 8, "", {}, false}}},
        {2023, "finance", "The Audi Group reported revenue of 69.9 billion euros in 2023.",
         {{"AUDI GROUP", "organization", "The Audi Group reported revenue of 69.9 billion euros in 2023.", "", {}}},
         {}},
    };
    for (const auto& d : docs) {
        Chunk c;
        c.doc_id = std::to_string(d.year) + "/" + d.doc;
        c.chunk_id = make_chunk_id(c.doc_id, 0);
        c.time_label = TimeLabel::from_ordinal(d.year);
        c.text = d.text;
        c.token_count = count_tokens(c.text);
        ExtractionOutput out;
        out.entities = d.entities;
        out.relations = d.relations;
        for (auto& e : out.entities) {
            e.source_chunk = c.chunk_id;
            e.time_label = c.time_label;
        }
        for (auto& r : out.relations) {
            r.source_chunk = c.chunk_id;
            r.time_label = c.time_label;
        }
        f.graph.upsert(out);
        f.chunks.add(std::move(c));
    }
    f.indexes = build_index_set(f.graph, em);
    return f;
}

}  // namespace tgrag::testing
