#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <thread>

#include <spdlog/spdlog.h>

#include "tgrag/errors.hpp"
#include "tgrag/hashing.hpp"
#include "tgrag/providers.hpp"

namespace tgrag {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "cache and index files assume a little-endian host");

CachedEmbeddingProvider::CachedEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner, fs::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir) / sha256_hex(inner_->model_name()).substr(0, 16)) {}

fs::path CachedEmbeddingProvider::entry_path(const std::string& text) const {
    return dir_ / (sha256_hex(text) + ".f64");
}

std::vector<Embedding> CachedEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    check_embed_inputs(texts);
    const auto dim = static_cast<Eigen::Index>(inner_->dim());
    std::vector<Embedding> out(texts.size());
    // Distinct uncached texts, each with every position it fills.
    std::map<std::string_view, std::vector<std::size_t>> missing;

    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (auto it = missing.find(texts[i]); it != missing.end()) {
            it->second.push_back(i);
            continue;
        }
        std::ifstream in(entry_path(texts[i]), std::ios::binary);
        if (in) {
            Embedding v(dim);
            in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(dim * sizeof(double)));
            if (in.gcount() == static_cast<std::streamsize>(dim * sizeof(double)) && in.peek() == EOF) {
                out[i] = std::move(v);
                hits_.fetch_add(1);
                continue;
            }
            spdlog::warn("embedding cache entry for text #{} is corrupt; recomputing", i);
        }
        missing[texts[i]].push_back(i);
    }
    if (missing.empty()) return out;

    std::vector<std::string> batch;
    batch.reserve(missing.size());
    for (const auto& [text, idx] : missing) batch.emplace_back(text);
    auto fresh = inner_->embed(batch);
    if (fresh.size() != batch.size()) throw ProviderError("embedding provider returned wrong batch size");

    fs::create_directories(dir_);
    std::size_t j = 0;
    for (const auto& [text, idx] : missing) {
        auto& v = fresh[j++];
        if (v.size() != dim) throw ProviderError("embedding provider returned wrong dimension");
        const auto path = entry_path(std::string(text));
        auto tmp = path;
        tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
        {
            std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
            o.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(dim * sizeof(double)));
        }
        fs::rename(tmp, path);
        for (auto i : idx) out[i] = v;
        misses_.fetch_add(1);
    }
    return out;
}

}  // namespace tgrag
