#include "qabench/providers.hpp"

#include "qabench/pipeline.hpp"
#include "qabench/prompt.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using namespace qabench;
using nlohmann::json;

namespace {

std::string prompt_for(const GenerationConfig& cfg, std::uint64_t seed)
{
    Rng rng(seed);
    const Document doc{"d1",
                       "Remdesivir shortened recovery in hospitalized patients. The spike glycoprotein binds the "
                       "ACE2 receptor. Fever and dry cough were the most common symptoms in elderly adults.",
                       {},
                       false};
    return render_prompt(draw_categories(cfg, rng), doc, 3).text;
}

class ScriptedTransport : public HttpTransport {
public:
    struct Step {
        int status = 200;
        std::string body;
        bool transport_failure = false;
    };

    explicit ScriptedTransport(std::vector<Step> steps) : steps_(std::move(steps)) {}

    HttpResponse post_json(const std::string& path, const std::string& body, std::chrono::milliseconds) override
    {
        std::lock_guard lock(mutex_);
        paths.push_back(path);
        bodies.push_back(body);
        const auto& s = steps_.at(std::min(calls++, steps_.size() - 1));
        if (s.transport_failure)
            throw TransportError("connection refused");
        return {s.status, s.body};
    }

    std::vector<std::string> paths, bodies;
    std::size_t calls = 0;

private:
    std::vector<Step> steps_;
    std::mutex mutex_;
};

HttpProviderOptions fast_options(std::vector<std::chrono::milliseconds>* sleeps = nullptr)
{
    HttpProviderOptions o;
    o.model = "test-model";
    o.retries = 3;
    o.backoff_initial = std::chrono::milliseconds(100);
    o.sleep = [sleeps](std::chrono::milliseconds d) {
        if (sleeps)
            sleeps->push_back(d);
    };
    return o;
}

std::string chat_body(const std::string& text)
{
    return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
                {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 7}}}}
        .dump();
}

} // namespace

TEST(MockChat, DeterministicInPromptAndSeeds)
{
    const auto prompt = prompt_for(default_general_purpose_config(), 1);
    MockChatProvider a, b, other_seed(MockPersona::category_conditioned, 99);
    ChatRequest req{prompt};
    req.seed = 5;
    EXPECT_EQ(a.complete(req).text, b.complete(req).text);
    EXPECT_NE(a.complete(req).text, other_seed.complete(req).text);
    auto req2 = req;
    req2.seed = 6;
    EXPECT_NE(a.complete(req).text, a.complete(req2).text);
}

TEST(MockChat, ConditionedEmitsKParsableLines)
{
    MockChatProvider p;
    const auto cfg = default_general_purpose_config();
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto res = p.complete(ChatRequest{prompt_for(cfg, s)});
        const auto pairs = parse_candidates(res.text, 3);
        EXPECT_EQ(pairs.size(), 3u);
        EXPECT_GT(res.prompt_tokens, 0);
    }
}

TEST(MockChat, TemplatedAlwaysWhatAreTheMain)
{
    MockChatProvider p(MockPersona::templated);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto res = p.complete(ChatRequest{prompt_for(default_general_purpose_config(), s)});
        const auto pairs = parse_candidates(res.text, 10);
        ASSERT_EQ(pairs.size(), 3u);
        for (const auto& c : pairs)
            EXPECT_EQ(c.question.rfind("What are the main ", 0), 0u) << c.question;
    }
}

TEST(MockChat, ChattyStillParsesAndRefusingDoesNot)
{
    const auto prompt = prompt_for(default_general_purpose_config(), 3);
    MockChatProvider chatty(MockPersona::chatty), refusing(MockPersona::refusing);
    const auto text = chatty.complete(ChatRequest{prompt}).text;
    EXPECT_NE(text.find("```"), std::string::npos);
    EXPECT_EQ(parse_candidates(text, 3).size(), 3u);
    EXPECT_EQ(refusing.complete(ChatRequest{prompt}).text, "I cannot help with that.");
}

TEST(MockChat, PersonaNamesRoundTrip)
{
    for (auto p : {MockPersona::category_conditioned, MockPersona::templated, MockPersona::chatty,
                   MockPersona::refusing})
        EXPECT_EQ(parse_mock_persona(to_string(p)), p);
    EXPECT_THROW(parse_mock_persona("poet"), Error);
    for (auto p : {MockJudgePolicy::all_yes, MockJudgePolicy::all_no, MockJudgePolicy::faithfulness_aware,
                   MockJudgePolicy::garbled})
        EXPECT_EQ(parse_mock_judge_policy(to_string(p)), p);
}

TEST(MockJudge, AnswersOnlyRequestedFields)
{
    MockJudgeProvider judge;
    const Document doc{"d", "Fever is common.", {}, false};
    const CandidatePair pair{"Is fever common?", "Fever is common.", ""};
    const auto empty = json::parse(judge.complete(ChatRequest{render_judge_prompt(pair, {}, doc)}).text);
    EXPECT_FALSE(empty.contains("category_adherent"));
    EXPECT_TRUE(empty.at("context_free").get<bool>());

    Rng rng(1);
    const auto draw = draw_categories(default_general_purpose_config(), rng);
    const auto full = json::parse(judge.complete(ChatRequest{render_judge_prompt(pair, draw, doc)}).text);
    EXPECT_TRUE(full.at("category_adherent").get<bool>());
}

TEST(HashEmbedder, DeterministicUnitVectors)
{
    HashEmbedder e;
    const std::vector<std::string> texts = {"What is MERS?", "What is MERS?", "how long does fever last", "?", "x"};
    const auto v = e.embed_batch(texts);
    ASSERT_EQ(v.size(), texts.size());
    EXPECT_EQ(v[0].values, v[1].values);
    EXPECT_NE(v[0].values, v[2].values);
    for (const auto& vec : v) {
        ASSERT_EQ(vec.dimension(), HashEmbedder::kDimension);
        double norm = 0;
        for (double x : vec.values)
            norm += x * x;
        EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-9);
    }
    EXPECT_THROW(e.embed_batch(std::vector<std::string>{""}), ProviderError);
}

TEST(PrecomputedEmbedder, ReturnsStoredVectorsInQueryOrder)
{
    const auto e = PrecomputedEmbedder::parse(
        "{\"text\": \"a\", \"vector\": [1, 0, 0]}\n{\"text\": \"b\", \"vector\": [0, 1, 0]}\n"
        "{\"text\": \"c\", \"vector\": [0, 0.5, 0.5]}\n");
    auto copy = e;
    const std::vector<std::string> q = {"c", "a", "b"};
    const auto v = copy.embed_batch(q);
    EXPECT_EQ(v[0].values, (std::vector<double>{0, 0.5, 0.5}));
    EXPECT_EQ(v[1].values, (std::vector<double>{1, 0, 0}));
    EXPECT_EQ(v[2].values, (std::vector<double>{0, 1, 0}));
}

TEST(PrecomputedEmbedder, MissingTextNamed)
{
    auto e = PrecomputedEmbedder::parse("{\"text\": \"a\", \"vector\": [1, 0]}\n");
    try {
        e.embed_batch(std::vector<std::string>{"a", "zebra question", "other"});
        FAIL();
    }
    catch (const ProviderError& ex) {
        EXPECT_NE(std::string(ex.what()).find("zebra question"), std::string::npos);
    }
}

TEST(PrecomputedEmbedder, DimensionMismatchRejected)
{
    auto e = PrecomputedEmbedder::parse("{\"text\": \"a\", \"vector\": [1, 0]}\n{\"text\": \"b\", \"vector\": [1]}\n");
    EXPECT_THROW(e.embed_batch(std::vector<std::string>{"a", "b"}), ProviderError);
    EXPECT_THROW(PrecomputedEmbedder::parse("{\"text\": \"a\"}\n"), ParseError);
}

TEST(CheckEmbeddings, Postconditions)
{
    const std::vector<std::string> t = {"a", "b"};
    EXPECT_NO_THROW(check_embeddings(t, std::vector<EmbeddingVector>{{{1.0}}, {{2.0}}}));
    EXPECT_THROW(check_embeddings(t, std::vector<EmbeddingVector>{{{1.0}}}), ProviderError);
    EXPECT_THROW(check_embeddings(t, std::vector<EmbeddingVector>{{{}}, {{}}}), ProviderError);
    EXPECT_THROW(check_embeddings(t, std::vector<EmbeddingVector>{{{1.0}}, {{NAN}}}), ProviderError);
}

TEST(PostWithRetry, RetriesRateLimitThenSucceeds)
{
    ScriptedTransport t({{429, "slow down"}, {503, "busy"}, {200, "ok"}});
    std::vector<std::chrono::milliseconds> sleeps;
    auto o = fast_options(&sleeps);
    std::counting_semaphore<> permits(2);
    int attempts = 0;
    const auto res = post_with_retry(t, "/x", "{}", o, permits, attempts);
    EXPECT_EQ(res.body, "ok");
    EXPECT_EQ(attempts, 3);
    ASSERT_EQ(sleeps.size(), 2u);
    EXPECT_EQ(sleeps[0].count(), 100);
    EXPECT_EQ(sleeps[1].count(), 200);
}

TEST(PostWithRetry, NonRetryableStatusFailsAtOnce)
{
    ScriptedTransport t({{400, "bad request body"}});
    auto o = fast_options();
    std::counting_semaphore<> permits(1);
    int attempts = 0;
    try {
        post_with_retry(t, "/x", "{}", o, permits, attempts);
        FAIL();
    }
    catch (const ProviderError& e) {
        EXPECT_EQ(e.status(), 400);
        EXPECT_EQ(e.body_excerpt(), "bad request body");
        EXPECT_FALSE(e.is_auth_failure());
    }
    EXPECT_EQ(t.calls, 1u);
}

TEST(PostWithRetry, AuthFailureFlagged)
{
    ScriptedTransport t({{401, "no key"}});
    auto o = fast_options();
    std::counting_semaphore<> permits(1);
    int attempts = 0;
    try {
        post_with_retry(t, "/x", "{}", o, permits, attempts);
        FAIL();
    }
    catch (const ProviderError& e) {
        EXPECT_TRUE(e.is_auth_failure());
    }
}

TEST(PostWithRetry, TransportFailuresBecomeTimeout)
{
    ScriptedTransport t({{0, "", true}});
    auto o = fast_options();
    o.retries = 2;
    std::counting_semaphore<> permits(1);
    int attempts = 0;
    EXPECT_THROW(post_with_retry(t, "/x", "{}", o, permits, attempts), TimeoutError);
    EXPECT_EQ(t.calls, 3u);
}

TEST(PostWithRetry, UnreachableEndpointTimesOut)
{
    auto transport = make_http_transport("http://127.0.0.1:9", "");
    auto o = fast_options();
    o.retries = 1;
    o.timeout = std::chrono::milliseconds(300);
    OpenAiChatProvider p(transport, o);
    EXPECT_THROW(p.complete(ChatRequest{"hi"}), TimeoutError);
}

TEST(PostWithRetry, ConcurrencyNeverExceedsPermits)
{
    class Counting : public HttpTransport {
    public:
        HttpResponse post_json(const std::string&, const std::string&, std::chrono::milliseconds) override
        {
            const int now = ++in_flight;
            int seen = peak.load();
            while (now > seen && !peak.compare_exchange_weak(seen, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
            --in_flight;
            return {200, chat_body("ok")};
        }
        std::atomic<int> in_flight{0}, peak{0};
    };
    auto transport = std::make_shared<Counting>();
    auto o = fast_options();
    o.max_concurrency = 3;
    OpenAiChatProvider p(transport, o);
    std::vector<std::thread> threads;
    for (int i = 0; i < 12; ++i)
        threads.emplace_back([&] {
            for (int j = 0; j < 5; ++j)
                p.complete(ChatRequest{"q"});
        });
    for (auto& t : threads)
        t.join();
    EXPECT_LE(transport->peak.load(), 3);
    EXPECT_GE(transport->peak.load(), 1);
}

TEST(OpenAiChat, RequestAndResponseShape)
{
    auto t = std::make_shared<ScriptedTransport>(std::vector<ScriptedTransport::Step>{{200, chat_body("hello")}});
    OpenAiChatProvider p(t, fast_options());
    ChatRequest req{"prompt text"};
    req.seed = 42;
    req.max_tokens = 99;
    const auto res = p.complete(req);
    EXPECT_EQ(res.text, "hello");
    EXPECT_EQ(res.prompt_tokens, 12);
    EXPECT_EQ(res.completion_tokens, 7);
    EXPECT_EQ(res.attempts, 1);
    EXPECT_EQ(t->paths[0], "/chat/completions");
    const auto body = json::parse(t->bodies[0]);
    EXPECT_EQ(body["model"], "test-model");
    EXPECT_EQ(body["messages"][0]["content"], "prompt text");
    EXPECT_EQ(body["max_tokens"], 99);
    EXPECT_EQ(body["seed"], 42);
    EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 1.0);
    EXPECT_EQ(p.identifier(), "openai:test-model");
}

TEST(OpenAiChat, MalformedResponseAndBadRequest)
{
    auto t = std::make_shared<ScriptedTransport>(std::vector<ScriptedTransport::Step>{{200, "{\"nope\": 1}"}});
    OpenAiChatProvider p(t, fast_options());
    EXPECT_THROW(p.complete(ChatRequest{"x"}), ProviderError);
    ChatRequest bad{"x"};
    bad.max_tokens = 0;
    EXPECT_THROW(p.complete(bad), ProviderError);
}

TEST(OpenAiEmbedder, BatchesAndReordersByIndex)
{
    class Echo : public HttpTransport {
    public:
        HttpResponse post_json(const std::string&, const std::string& body, std::chrono::milliseconds) override
        {
            ++calls;
            const auto in = json::parse(body)["input"];
            json data = json::array();
            // Reverse order on the wire; "index" restores it.
            for (std::size_t i = in.size(); i-- > 0;)
                data.push_back({{"index", i}, {"embedding", {static_cast<double>(in[i].get<std::string>().size()), 1.0}}});
            return {200, json{{"data", data}}.dump()};
        }
        int calls = 0;
    };
    auto t = std::make_shared<Echo>();
    auto o = fast_options();
    o.embed_batch_size = 64;
    OpenAiEmbedder e(t, o);
    std::vector<std::string> texts;
    for (int i = 0; i < 150; ++i)
        texts.push_back(std::string(static_cast<std::size_t>(i % 7 + 1), 'a'));
    const auto v = e.embed_batch(texts);
    EXPECT_EQ(t->calls, 3);
    ASSERT_EQ(v.size(), 150u);
    for (std::size_t i = 0; i < v.size(); ++i)
        EXPECT_DOUBLE_EQ(v[i].values[0], static_cast<double>(texts[i].size()));
}
