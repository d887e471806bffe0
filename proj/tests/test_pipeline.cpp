#include "qabench/pipeline.hpp"

#include "support.hpp"

#include <atomic>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using namespace qabench;
using nlohmann::json;

namespace {

class FnProvider : public ChatProvider {
public:
    explicit FnProvider(std::function<std::string(const ChatRequest&)> fn) : fn_(std::move(fn)) {}
    ChatResponse complete(const ChatRequest& r) override
    {
        ++calls;
        {
            std::lock_guard lock(m_);
            seeds.push_back(r.seed);
        }
        return {fn_(r)};
    }
    std::string identifier() const override { return "fn"; }

    std::atomic<int> calls{0};
    std::vector<std::optional<std::uint64_t>> seeds;

private:
    std::function<std::string(const ChatRequest&)> fn_;
    std::mutex m_;
};

std::string line(const std::string& q, const std::string& a)
{
    return json{{"question", q}, {"answer", a}}.dump();
}

std::string three_lines()
{
    return line("Q-alpha?", "A1") + "\n" + line("Q-beta?", "A2") + "\n" + line("Q-gamma?", "A3") + "\n";
}

std::string verdict(bool ok, bool with_category = true)
{
    json j{{"context_free", ok}, {"faithful", ok}};
    if (with_category)
        j["category_adherent"] = ok;
    return j.dump();
}

// Judge that rejects questions containing `reject`.
std::function<std::string(const ChatRequest&)> judge_rejecting(std::string reject)
{
    return [reject](const ChatRequest& r) {
        const bool cat = r.prompt.find("category_adherent") != std::string::npos;
        return verdict(r.prompt.find(reject) == std::string::npos, cat);
    };
}

const Document kDoc{"doc-1", "Fever is the most common symptom. Cough follows.", {}, false};

CategoryDraw some_draw()
{
    Rng rng(3);
    return draw_categories(default_general_purpose_config(), rng);
}

} // namespace

TEST(ParseCandidates, LineByLineWithNoise)
{
    const auto raw = "Sure! Here you go:\n```json\n" + three_lines() + "not json\n{\"question\": \"\", \"answer\": \"x\"}\n```";
    const auto c = parse_candidates(raw, 5);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[0].question, "Q-alpha?");
    EXPECT_EQ(c[2].answer, "A3");
    EXPECT_EQ(parse_candidates(raw, 2).size(), 2u);
    EXPECT_THROW(parse_candidates("I cannot help with that.", 3), CandidateParseError);
    EXPECT_THROW(parse_candidates("{\"question\": 3, \"answer\": \"x\"}", 3), CandidateParseError);
}

TEST(ParseVerdict, StrictBooleansAndVacuousCategory)
{
    const auto v = parse_verdict(verdict(true, false), false);
    EXPECT_TRUE(v.category_adherent);
    EXPECT_TRUE(v.passed());
    EXPECT_THROW(parse_verdict(verdict(true, false), true), JudgeError);
    EXPECT_THROW(parse_verdict("{\"context_free\": \"yes\", \"faithful\": true}", false), JudgeError);
    EXPECT_THROW(parse_verdict("Looks good to me.", false), JudgeError);
    EXPECT_FALSE(parse_verdict(R"({"context_free": true, "faithful": false, "category_adherent": true})", true).passed());
}

TEST(JudgePrompt, MentionsCategoryOnlyWhenDrawn)
{
    const CandidatePair p{"Q?", "A", ""};
    EXPECT_EQ(render_judge_prompt(p, {}, kDoc).find("category_adherent"), std::string::npos);
    EXPECT_NE(render_judge_prompt(p, some_draw(), kDoc).find("category_adherent"), std::string::npos);
}

TEST(GenerateRecord, PicksAmongPassingCandidates)
{
    FnProvider gen([](const ChatRequest&) { return three_lines(); });
    FnProvider judge(judge_rejecting("Q-beta?"));
    const auto cfg = default_general_purpose_config();
    std::set<std::string> seen;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto r = generate_record(some_draw(), kDoc, cfg, {gen, judge}, seed);
        ASSERT_EQ(r.candidates.size(), 3u);
        EXPECT_TRUE(r.candidates[0].verdict.passed());
        EXPECT_FALSE(r.candidates[1].verdict.passed());
        EXPECT_TRUE(r.candidates[2].verdict.passed());
        // uniform among the two passing ones, using the attempt-0 sub-seed
        const std::vector<std::string> passing = {"Q-alpha?", "Q-gamma?"};
        EXPECT_EQ(r.question, passing[Rng(mix_seed(seed, std::uint64_t{0})).below(2)]);
        EXPECT_EQ(r.provenance.attempt, 0);
        seen.insert(r.question);
    }
    EXPECT_EQ(seen.size(), 2u);
}

TEST(GenerateRecord, RequestSeedIsAttemptSubSeed)
{
    int n = 0;
    FnProvider gen([&](const ChatRequest&) { return n++ == 0 ? std::string("nothing useful") : three_lines(); });
    FnProvider judge(judge_rejecting("<no-such-text>"));
    const auto r = generate_record(some_draw(), kDoc, default_general_purpose_config(), {gen, judge}, 77);
    EXPECT_EQ(r.provenance.attempt, 1);
    ASSERT_EQ(gen.seeds.size(), 2u);
    EXPECT_EQ(gen.seeds[0], mix_seed(77, std::uint64_t{0}));
    EXPECT_EQ(gen.seeds[1], mix_seed(77, std::uint64_t{1}));
}

TEST(GenerateRecord, NoRetriesMeansOneAttempt)
{
    FnProvider gen([](const ChatRequest&) { return three_lines(); });
    FnProvider judge([](const ChatRequest&) { return verdict(false); });
    PipelineOptions o;
    o.retries = 0;
    try {
        generate_record(some_draw(), kDoc, default_general_purpose_config(), {gen, judge}, 1, o);
        FAIL();
    }
    catch (const RecordFailedError& e) {
        EXPECT_EQ(e.attempts(), 1);
    }
    EXPECT_EQ(gen.calls.load(), 1);
    EXPECT_EQ(judge.calls.load(), 3);
}

TEST(GenerateRecord, RetriesExhaust)
{
    FnProvider gen([](const ChatRequest&) { return std::string("I cannot help with that."); });
    FnProvider judge([](const ChatRequest&) { return verdict(true); });
    PipelineOptions o;
    o.retries = 2;
    EXPECT_THROW(generate_record(some_draw(), kDoc, default_general_purpose_config(), {gen, judge}, 1, o),
                 RecordFailedError);
    EXPECT_EQ(gen.calls.load(), 3);
    EXPECT_EQ(judge.calls.load(), 0);
}

TEST(GenerateRecord, AsksForKCandidates)
{
    FnProvider gen([](const ChatRequest& r) {
        EXPECT_NE(r.prompt.find("generate 3 "), std::string::npos);
        return three_lines();
    });
    FnProvider judge(judge_rejecting("<no-such-text>"));
    const auto r = generate_record(some_draw(), kDoc, default_general_purpose_config(), {gen, judge}, 5);
    EXPECT_EQ(r.candidates.size(), 3u);
}

TEST(GenerateRecord, VanillaJudgeNotAskedAboutCategories)
{
    FnProvider gen([](const ChatRequest&) { return three_lines(); });
    FnProvider judge([](const ChatRequest& r) {
        EXPECT_EQ(r.prompt.find("category_adherent"), std::string::npos);
        return verdict(true, false);
    });
    GenerationConfig vanilla;
    const auto r = generate_record({}, kDoc, vanilla, {gen, judge}, 5);
    for (const auto& c : r.candidates)
        EXPECT_TRUE(c.verdict.category_adherent);
    EXPECT_TRUE(r.user_categories.empty());
    EXPECT_TRUE(r.question_categories.empty());
}

TEST(MockJudgeFaithfulness, DocumentReferenceFailsContextFree)
{
    MockJudgeProvider judge(MockJudgePolicy::faithfulness_aware);
    const Document doc{"d", "The incubation period of the virus averaged five days among hospitalized adults.", {}, false};
    const CandidatePair bad{"As the document states, how long is the incubation period?",
                            "The incubation period averaged five days.", ""};
    const CandidatePair good{"How long is the incubation period?", "The incubation period averaged five days.", ""};
    const CandidatePair unfaithful{"How long is the incubation period?",
                                   "Researchers measured fourteen weeks using satellites.", ""};
    const auto v1 = judge_candidate(bad, {}, doc, judge);
    EXPECT_FALSE(v1.context_free);
    EXPECT_FALSE(v1.passed());
    EXPECT_TRUE(judge_candidate(good, {}, doc, judge).passed());
    EXPECT_FALSE(judge_candidate(unfaithful, {}, doc, judge).faithful);
}

TEST(RunGeneration, PlanOrderAndIds)
{
    const auto corpus = test::small_corpus(10);
    std::vector<std::string> plan;
    for (int i = 0; i < 60; ++i)
        plan.push_back("d" + std::to_string(i % 10 + 1));
    MockChatProvider gen;
    MockJudgeProvider judge;
    PipelineOptions o;
    o.workers = 4;
    Rng rng(9);
    const auto b = run_generation(default_general_purpose_config(), corpus, plan, {gen, judge}, rng, o);
    ASSERT_EQ(b.records.size(), plan.size());
    for (std::size_t i = 0; i < plan.size(); ++i) {
        EXPECT_EQ(b.records[i].document_id, plan[i]);
        EXPECT_EQ(b.records[i].record_id, record_id_for(i));
    }
    EXPECT_EQ(record_id_for(0), "q000001");
    EXPECT_EQ(record_id_for(2018), "q002019");
}

TEST(RunGeneration, RngConsumedInPlanOrderIndependentOfWorkers)
{
    const auto corpus = test::small_corpus(4);
    const std::vector<std::string> plan = {"d1", "d2", "d3", "d4", "d1", "d2", "d3", "d4"};
    const auto cfg = default_general_purpose_config();
    MockChatProvider gen;
    MockJudgeProvider judge;

    std::string out[2];
    for (int w : {1, 4}) {
        PipelineOptions o;
        o.workers = w;
        Rng rng(123);
        std::ostringstream ss;
        write_benchmark_jsonl(run_generation(cfg, corpus, plan, {gen, judge}, rng, o), ss);
        out[w == 1 ? 0 : 1] = ss.str();
    }
    EXPECT_EQ(out[0], out[1]);

    // Independent replay of the stream: draw, then one record seed, per entry.
    Rng replay(123);
    PipelineOptions o;
    Rng rng(123);
    const auto b = run_generation(cfg, corpus, plan, {gen, judge}, rng, o);
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto draw = draw_categories(cfg, replay);
        const auto seed = replay.next_u64();
        EXPECT_EQ(b.records[i].provenance.record_seed, seed);
        ASSERT_EQ(b.records[i].question_categories.size(), draw.question_picks.size());
        for (std::size_t j = 0; j < draw.question_picks.size(); ++j)
            EXPECT_EQ(b.records[i].question_categories[j].second, draw.question_picks[j].category.name);
    }
}

TEST(RunGeneration, FullCovidShapedPlan)
{
    const auto corpus = load_corpus(test::data_path("cord_fixture.jsonl"), CorpusFormat::jsonl);
    const auto counts = json::parse(test::slurp(test::data_path("covidqa_counts.json")));
    PerDocumentSampling s;
    for (auto& [k, v] : counts.items())
        s.counts[k] = v.get<std::size_t>();
    const auto plan = make_sampling_plan(corpus, s, 11);
    ASSERT_EQ(plan.size(), 2019u);
    MockChatProvider gen;
    MockJudgeProvider judge;
    Rng rng(11);
    const auto b = run_generation(default_general_purpose_config(), corpus, plan, {gen, judge}, rng);
    EXPECT_EQ(b.records.size(), 2019u);
    std::map<std::string, std::size_t> per_doc;
    for (const auto& r : b.records)
        ++per_doc[r.document_id];
    for (auto& [k, v] : counts.items())
        EXPECT_EQ(per_doc[k], v.get<std::size_t>()) << k;
}

TEST(RunGeneration, AbortsPastFailureRatio)
{
    const auto corpus = test::small_corpus(5);
    const std::vector<std::string> plan(20, "d1");
    MockChatProvider gen(MockPersona::refusing);
    MockJudgeProvider judge;
    PipelineOptions o;
    o.retries = 0;
    Rng rng(1);
    try {
        run_generation(default_general_purpose_config(), corpus, plan, {gen, judge}, rng, o);
        FAIL();
    }
    catch (const RunAbortedError& e) {
        EXPECT_FALSE(e.failures().empty());
    }
}

TEST(RunGeneration, ToleratesFailuresUnderRatio)
{
    const auto corpus = test::small_corpus(2);
    std::vector<std::string> plan(10, "d1");
    int n = 0;
    std::mutex m;
    // Every fifth generation call refuses; with retries=0 that is 2 of 10.
    FnProvider gen([&](const ChatRequest&) {
        std::lock_guard lock(m);
        return (n++ % 5 == 4) ? std::string("no") : three_lines();
    });
    FnProvider judge(judge_rejecting("<no-such-text>"));
    PipelineOptions o;
    o.retries = 0;
    o.workers = 1;
    o.max_failure_ratio = 0.2;
    Rng rng(1);
    const auto b = run_generation(default_general_purpose_config(), corpus, plan, {gen, judge}, rng, o);
    EXPECT_EQ(b.failures.size(), 2u);
    EXPECT_EQ(b.records.size(), 8u);
}

TEST(RunGeneration, AuthFailureIsFatal)
{
    const auto corpus = test::small_corpus(2);
    std::vector<std::string> plan(4, "d1");
    FnProvider gen([](const ChatRequest&) -> std::string { throw ProviderError("denied", 401); });
    FnProvider judge(judge_rejecting("<no-such-text>"));
    Rng rng(1);
    try {
        run_generation(default_general_purpose_config(), corpus, plan, {gen, judge}, rng);
        FAIL();
    }
    catch (const ProviderError& e) {
        EXPECT_TRUE(e.is_auth_failure());
    }
}

TEST(RecordJson, KeyOrderAndContent)
{
    FnProvider gen([](const ChatRequest&) { return three_lines(); });
    FnProvider judge(judge_rejecting("<no-such-text>"));
    auto r = generate_record(some_draw(), kDoc, default_general_purpose_config(), {gen, judge}, 5);
    r.record_id = record_id_for(0);
    const auto text = record_to_json(r);
    EXPECT_EQ(text.find('\n'), std::string::npos);
    const auto j = json::parse(text);
    // parsed json sorts keys, so order is checked on the raw text
    std::size_t last = 0;
    for (const char* k : {"\"record_id\"", "\"question\"", "\"answer\"", "\"document_id\"", "\"user_categories\"",
                          "\"question_categories\"", "\"candidates\"", "\"provenance\""}) {
        const auto pos = text.find(k);
        ASSERT_NE(pos, std::string::npos) << k;
        EXPECT_GE(pos, last) << k;
        last = pos;
    }
    EXPECT_EQ(j["document_id"], "doc-1");
    EXPECT_EQ(j["candidates"].size(), 3u);
    EXPECT_EQ(j["provenance"]["record_seed"], 5u);
}
