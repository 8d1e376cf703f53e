#include <atomic>
#include <thread>

// Eigen-bearing headers first; httplib pulls in <resolv.h>.
#include "support.hpp"
#include "tgrag/json_io.hpp"
#include "tgrag/parallel.hpp"
#include "tgrag/providers.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

using namespace tgrag;
using tgrag::testing::TempDir;

namespace {

// Local OpenAI-compatible server; handlers are installed per test.
class FakeServer {
public:
    FakeServer() {
        port_ = svr_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { svr_.listen_after_bind(); });
        svr_.wait_until_ready();
    }
    ~FakeServer() {
        svr_.stop();
        thread_.join();
    }
    httplib::Server& server() { return svr_; }
    ProviderConfig config() const {
        ProviderConfig c;
        c.endpoint = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
        c.model_name = "test-model";
        c.timeout = std::chrono::milliseconds(5000);
        c.retry_backoff = std::chrono::milliseconds(1);
        return c;
    }

private:
    httplib::Server svr_;
    int port_ = 0;
    std::thread thread_;
};

std::string chat_body(const std::string& content) {
    return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

ChatRequest simple_request() {
    ChatRequest r;
    r.user_prompt = "hello";
    r.request_id = "t1";
    return r;
}

}  // namespace

TEST(MockChat, RulesMatchInOrder) {
    MockChatProvider m;
    m.on_regex("year (\\d{4})", "regex hit").on_substring("year", "substring hit");
    ChatRequest r;
    r.user_prompt = "the year 2022";
    EXPECT_EQ(m.chat(r), "regex hit");
    r.user_prompt = "the year x";
    EXPECT_EQ(m.chat(r), "substring hit");
    r.user_prompt = "nothing";
    EXPECT_THROW(m.chat(r), ProviderError);
    EXPECT_EQ(m.calls(), 3u);
    MockChatProvider lenient(MockChatProvider::Mode::Lenient);
    EXPECT_EQ(lenient.chat(r), MockChatProvider::kSentinel);
}

TEST(MockChat, EmptyResponseIsAnError) {
    MockChatProvider m;
    m.on_substring("x", "");
    ChatRequest r;
    r.user_prompt = "x";
    EXPECT_THROW(m.chat(r), EmptyResponseError);
}

TEST(MockChat, ScriptFile) {
    TempDir dir;
    write_file(dir / "s.json", R"({"mode": "strict", "rules": [
        {"match": "regex", "pattern": "Q: .*2022", "response": "twenty-two"},
        {"match": "substring", "pattern": "Q:", "response": "other"}]})");
    auto m = MockChatProvider::from_script_file(dir / "s.json");
    ChatRequest r;
    r.user_prompt = "Q: in 2022";
    EXPECT_EQ(m->chat(r), "twenty-two");
    r.user_prompt = "Q: 2021";
    EXPECT_EQ(m->chat(r), "other");
    write_file(dir / "bad.json", R"({"rules": {"x": 1}})");
    EXPECT_THROW(MockChatProvider::from_script_file(dir / "bad.json"), ConfigError);
}

TEST(ChatRequest, Validate) {
    ChatRequest r;
    r.max_tokens = 0;
    EXPECT_THROW(r.validate(), PreconditionError);
    r.max_tokens = 10;
    r.temperature = -1;
    EXPECT_THROW(r.validate(), PreconditionError);
}

TEST(HashEmbedder, DeterministicAndNormalized) {
    HashEmbedder a(32, 7), b(32, 7), c(32, 8);
    const auto va = a.embed_one("Audi");
    EXPECT_TRUE(va.isApprox(b.embed_one("Audi")));
    EXPECT_FALSE(va.isApprox(c.embed_one("Audi")));
    EXPECT_NEAR(va.norm(), 1.0, 1e-12);
    EXPECT_THROW(a.embed({"ok", ""}), PreconditionError);
    EXPECT_NE(a.model_name(), c.model_name());
}

TEST(HashEmbedder, BagOfTokensRewardsOverlap) {
    HashEmbedder em(256, 0, HashEmbedder::Mode::BagOfTokens);
    const auto q = em.embed_one("Audi deliveries in 2022");
    const auto near = em.embed_one("The Audi Group deliveries in 2022 reached 1.8 million");
    const auto far = em.embed_one("Lamborghini super sports cars");
    EXPECT_GT(q.dot(near), q.dot(far));
    EXPECT_TRUE(em.embed_one("AUDI Deliveries").isApprox(em.embed_one("audi deliveries")));
}

TEST(TableEmbedder, UsesTableThenFallback) {
    TableEmbedder t(3);
    t.set("a", Eigen::Vector3d(1, 0, 0));
    EXPECT_TRUE(t.embed_one("a").isApprox(Eigen::Vector3d(1, 0, 0)));
    EXPECT_EQ(t.embed_one("unlisted").size(), 3);
}

TEST(EmbeddingCache, HitsAfterFirstCallAndAcrossInstances) {
    TempDir dir;
    auto inner = std::make_shared<HashEmbedder>(16);
    CachedEmbeddingProvider cache(inner, dir / "cache");
    const auto first = cache.embed({"a", "b", "a"});
    EXPECT_EQ(cache.misses(), 2u);
    const auto again = cache.embed({"b"});
    EXPECT_EQ(cache.hits(), 1u);
    EXPECT_TRUE(again[0].isApprox(first[1]));
    CachedEmbeddingProvider reopened(inner, dir / "cache");
    const auto calls_before = inner->calls();
    const auto v = reopened.embed({"a"});
    EXPECT_EQ(inner->calls(), calls_before);
    EXPECT_EQ(reopened.hits(), 1u);
    EXPECT_EQ(v[0], first[0]);
}

TEST(EmbeddingCache, ModelsDoNotShareEntries) {
    TempDir dir;
    CachedEmbeddingProvider a(std::make_shared<HashEmbedder>(16, 1), dir / "cache");
    CachedEmbeddingProvider b(std::make_shared<HashEmbedder>(16, 2), dir / "cache");
    const auto va = a.embed_one("x");
    const auto vb = b.embed_one("x");
    EXPECT_EQ(b.hits(), 0u);
    EXPECT_FALSE(va.isApprox(vb));
}

TEST(OpenAIChat, SendsRequestAndParsesReply) {
    FakeServer fake;
    json seen;
    fake.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        res.set_content(chat_body("pong"), "application/json");
    });
    auto cfg = fake.config();
    cfg.api_key = "secret";
    OpenAIChatProvider p(cfg, std::make_shared<InflightLimiter>(2));
    EXPECT_EQ(p.chat(simple_request()), "pong");
    EXPECT_EQ(seen["model"], "test-model");
    EXPECT_EQ(seen["messages"][0]["content"], "hello");
    EXPECT_EQ(p.attempts(), 1u);
}

TEST(OpenAIChat, RetriesServerErrorsThenSucceeds) {
    FakeServer fake;
    std::atomic<int> hits{0};
    fake.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        if (hits.fetch_add(1) < 2) {
            res.status = hits == 1 ? 500 : 429;
            return;
        }
        res.set_content(chat_body("third time"), "application/json");
    });
    OpenAIChatProvider p(fake.config(), nullptr);
    EXPECT_EQ(p.chat(simple_request()), "third time");
    EXPECT_EQ(p.attempts(), 3u);
}

TEST(OpenAIChat, GivesUpAfterRetriesAndDoesNotRetryClientErrors) {
    FakeServer fake;
    fake.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    fake.server().Post("/bad/chat/completions", [&](const httplib::Request&, httplib::Response& res) { res.status = 401; });
    auto cfg = fake.config();
    cfg.max_retries = 2;
    OpenAIChatProvider p(cfg, nullptr);
    try {
        p.chat(simple_request());
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_EQ(e.request_id(), "t1");
    }
    EXPECT_EQ(p.attempts(), 3u);
    cfg.endpoint = cfg.endpoint.substr(0, cfg.endpoint.size() - 3) + "/bad";
    OpenAIChatProvider q(cfg, nullptr);
    EXPECT_THROW(q.chat(simple_request()), ProviderError);
    EXPECT_EQ(q.attempts(), 1u);
}

TEST(OpenAIChat, EmptyAndMalformedReplies) {
    FakeServer fake;
    fake.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        const std::string prompt = body["messages"][0]["content"];
        if (prompt == "empty") res.set_content(chat_body("  \n"), "application/json");
        else if (prompt == "garbage") res.set_content("not json", "application/json");
        else res.set_content(R"({"choices": []})", "application/json");
    });
    OpenAIChatProvider p(fake.config(), nullptr);
    ChatRequest r = simple_request();
    r.user_prompt = "empty";
    EXPECT_THROW(p.chat(r), EmptyResponseError);
    r.user_prompt = "garbage";
    EXPECT_THROW(p.chat(r), ProviderError);
    r.user_prompt = "shape";
    EXPECT_THROW(p.chat(r), ProviderError);
}

TEST(OpenAIChat, TransportFailureIsProviderError) {
    ProviderConfig cfg;
    cfg.endpoint = "http://127.0.0.1:1";
    cfg.max_retries = 1;
    cfg.retry_backoff = std::chrono::milliseconds(1);
    cfg.timeout = std::chrono::milliseconds(500);
    OpenAIChatProvider p(cfg, nullptr);
    EXPECT_THROW(p.chat(simple_request()), ProviderError);
    EXPECT_EQ(p.attempts(), 2u);
    cfg.endpoint = "localhost:8000";
    EXPECT_THROW(OpenAIChatProvider(cfg, nullptr), ConfigError);
}

TEST(OpenAIChat, InflightLimitCapsConcurrency) {
    FakeServer fake;
    std::atomic<int> active{0}, peak{0};
    fake.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        const int now = active.fetch_add(1) + 1;
        int p = peak.load();
        while (now > p && !peak.compare_exchange_weak(p, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        active.fetch_sub(1);
        res.set_content(chat_body("ok"), "application/json");
    });
    OpenAIChatProvider p(fake.config(), std::make_shared<InflightLimiter>(2));
    parallel_for(12, 8, [&](std::size_t) { EXPECT_EQ(p.chat(simple_request()), "ok"); });
    EXPECT_LE(peak.load(), 2);
    EXPECT_GE(peak.load(), 1);
}

TEST(OpenAIEmbedding, ParsesByIndexAndChecksDimension) {
    FakeServer fake;
    fake.server().Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        json data = json::array();
        const auto n = body["input"].size();
        for (std::size_t i = n; i-- > 0;) {
            const std::string text = body["input"][i];
            const std::size_t width = text == "wide" ? 4 : 3;
            data.push_back({{"index", i}, {"embedding", std::vector<double>(width, static_cast<double>(i + 1))}});
        }
        res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    OpenAIEmbeddingProvider p(fake.config(), 3, nullptr);
    const auto v = p.embed({"a", "b"});
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v[0][0], 1.0);
    EXPECT_EQ(v[1][0], 2.0);
    EXPECT_THROW(p.embed({"wide"}), ProviderError);
    EXPECT_THROW(p.embed({""}), PreconditionError);
}
