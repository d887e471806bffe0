#include "qabench/pipeline.hpp"

#include "qabench/digest.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace qabench {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view trim(std::string_view s)
{
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string_view::npos)
        return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Whole text as a JSON object, or failing that the span from the first '{'
// to the last '}'.
std::optional<json> object_in(std::string_view text)
{
    text = trim(text);
    if (text.empty())
        return std::nullopt;
    auto attempt = [](std::string_view s) -> std::optional<json> {
        auto j = json::parse(s, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            return std::nullopt;
        return j;
    };
    if (auto j = attempt(text))
        return j;
    const auto open = text.find('{');
    const auto close = text.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close <= open)
        return std::nullopt;
    return attempt(text.substr(open, close - open + 1));
}

std::string reply_format(bool with_category)
{
    return with_category ? R"({"context_free": true|false, "category_adherent": true|false, "faithful": true|false})"
                         : R"({"context_free": true|false, "faithful": true|false})";
}

std::string excerpt(std::string_view s, std::size_t max = 200)
{
    return s.size() <= max ? std::string(s) : std::string(s.substr(0, max)) + "...";
}

} // namespace

std::vector<CandidatePair> parse_candidates(std::string_view raw, int k)
{
    std::vector<CandidatePair> out;
    std::size_t pos = 0;
    while (pos <= raw.size() && static_cast<int>(out.size()) < k) {
        auto nl = raw.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = raw.size();
        const auto line = raw.substr(pos, nl - pos);
        pos = nl + 1;
        if (auto j = object_in(line)) {
            const auto q = j->find("question");
            const auto a = j->find("answer");
            if (q != j->end() && a != j->end() && q->is_string() && a->is_string()) {
                auto question = std::string(trim(q->get<std::string>()));
                auto answer = std::string(trim(a->get<std::string>()));
                if (!question.empty() && !answer.empty())
                    out.push_back({std::move(question), std::move(answer), std::string(trim(line))});
            }
        }
        if (nl == raw.size())
            break;
    }
    if (out.empty())
        throw CandidateParseError(fmt::format("no question/answer pair in generator output: \"{}\"", excerpt(raw)),
                                  std::string(raw));
    return out;
}

FilterVerdict parse_verdict(std::string_view raw, bool category_requested)
{
    const auto j = object_in(raw);
    if (!j)
        throw JudgeError(fmt::format("judge reply is not a JSON object: \"{}\"", excerpt(raw)));
    auto field = [&](const char* name, bool required) -> std::optional<bool> {
        const auto it = j->find(name);
        if (it == j->end()) {
            if (required)
                throw JudgeError(fmt::format("judge reply lacks \"{}\": \"{}\"", name, excerpt(raw)));
            return std::nullopt;
        }
        if (!it->is_boolean())
            throw JudgeError(fmt::format("judge field \"{}\" is not a boolean: \"{}\"", name, excerpt(raw)));
        return it->get<bool>();
    };
    FilterVerdict v;
    v.context_free = *field("context_free", true);
    v.category_adherent = field("category_adherent", category_requested).value_or(true);
    v.faithful = *field("faithful", true);
    v.judge_raw = std::string(raw);
    return v;
}

std::string render_judge_prompt(const CandidatePair& pair, const CategoryDraw& draw, const Document& doc,
                                const TextTemplate& tmpl)
{
    auto ctx = draw_context(draw);
    ctx.values["document"] = doc.text;
    ctx.values["question"] = pair.question;
    ctx.values["answer"] = pair.answer;
    ctx.values["reply_format"] = reply_format(!draw.empty());
    return tmpl.render(ctx);
}

FilterVerdict judge_candidate(const CandidatePair& pair, const CategoryDraw& draw, const Document& doc,
                              ChatProvider& judge, const PipelineOptions& options)
{
    ChatRequest req;
    req.prompt = render_judge_prompt(pair, draw, doc,
                                     options.judge_template ? *options.judge_template : default_judge_template());
    req.temperature = options.judge_temperature;
    req.max_tokens = 256;
    req.model = options.judge_model;
    const auto res = judge.complete(req);
    return parse_verdict(res.text, !draw.empty());
}

BenchmarkRecord generate_record(const CategoryDraw& draw, const Document& doc, const GenerationConfig& cfg,
                                const Providers& providers, std::uint64_t record_seed, const PipelineOptions& options)
{
    const auto prompt = render_prompt(draw, doc, cfg.num_candidates,
                                      options.generation_template ? *options.generation_template
                                                                  : default_generation_template());
    const auto prompt_digest = sha256_hex(prompt.text);

    std::string last_reason;
    const int attempts = std::max(0, options.retries) + 1;
    for (int a = 0; a < attempts; ++a) {
        const auto sub = mix_seed(record_seed, static_cast<std::uint64_t>(a));
        ChatRequest req;
        req.prompt = prompt.text;
        req.temperature = options.temperature;
        req.max_tokens = options.max_tokens;
        req.model = options.generator_model;
        req.seed = sub;
        const auto res = providers.generator.complete(req);

        std::vector<JudgedCandidate> judged;
        try {
            for (auto& pair : parse_candidates(res.text, cfg.num_candidates)) {
                auto verdict = judge_candidate(pair, draw, doc, providers.judge, options);
                judged.push_back({std::move(pair), std::move(verdict)});
            }
        }
        catch (const CandidateParseError& e) {
            last_reason = e.what();
            continue;
        }
        catch (const JudgeError& e) {
            last_reason = e.what();
            continue;
        }

        std::vector<std::size_t> passing;
        for (std::size_t i = 0; i < judged.size(); ++i)
            if (judged[i].verdict.passed())
                passing.push_back(i);
        if (passing.empty()) {
            last_reason = fmt::format("none of {} candidates passed the filter", judged.size());
            continue;
        }

        Rng pick(sub);
        const auto& chosen = judged[passing[pick.below(passing.size())]];

        BenchmarkRecord r;
        r.question = chosen.pair.question;
        r.answer = chosen.pair.answer;
        r.document_id = doc.id;
        for (const auto& p : draw.user_picks)
            r.user_categories.emplace_back(p.categorization, p.category.name);
        for (const auto& p : draw.question_picks)
            r.question_categories.emplace_back(p.categorization, p.category.name);
        r.candidates = std::move(judged);
        r.provenance.generator = providers.generator.identifier();
        r.provenance.judge = providers.judge.identifier();
        r.provenance.prompt_sha256 = prompt_digest;
        r.provenance.record_seed = record_seed;
        r.provenance.attempt = a;
        r.provenance.temperature = options.temperature;
        r.provenance.max_tokens = options.max_tokens;
        r.provenance.prompt_tokens = res.prompt_tokens;
        r.provenance.completion_tokens = res.completion_tokens;
        return r;
    }
    throw RecordFailedError(fmt::format("document {}: {} attempt(s) failed; last: {}", doc.id, attempts, last_reason),
                            attempts);
}

Benchmark run_generation(const GenerationConfig& cfg, const Corpus& corpus, std::span<const std::string> plan,
                         const Providers& providers, Rng& rng, const PipelineOptions& options)
{
    std::unordered_map<std::string_view, const Document*> by_id;
    for (const auto& d : corpus.documents)
        by_id.emplace(d.id, &d);

    struct Job {
        const Document* doc;
        CategoryDraw draw;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    jobs.reserve(plan.size());
    for (const auto& id : plan) {
        const auto it = by_id.find(id);
        if (it == by_id.end())
            throw Error(fmt::format("plan refers to unknown document \"{}\"", id));
        auto draw = draw_categories(cfg, rng);
        const auto seed = rng.next_u64();
        jobs.push_back({it->second, std::move(draw), seed});
    }

    const std::size_t total = jobs.size();
    const double allowed = options.max_failure_ratio * static_cast<double>(total);
    std::vector<std::optional<BenchmarkRecord>> records(total);
    std::vector<std::optional<RecordFailure>> failures(total);
    std::atomic<std::size_t> next{0}, done{0}, failed{0};
    std::atomic<bool> stop{false};
    std::exception_ptr fatal;
    std::mutex fatal_mutex;

    auto worker = [&] {
        while (!stop.load()) {
            const auto i = next.fetch_add(1);
            if (i >= total)
                return;
            const auto& job = jobs[i];
            try {
                auto rec = generate_record(job.draw, *job.doc, cfg, providers, job.seed, options);
                rec.record_id = record_id_for(i);
                records[i] = std::move(rec);
            }
            catch (const RecordFailedError& e) {
                failures[i] = RecordFailure{i, job.doc->id, e.attempts(), e.what()};
            }
            catch (const ProviderError& e) {
                if (e.is_auth_failure()) {
                    std::lock_guard lock(fatal_mutex);
                    if (!fatal)
                        fatal = std::current_exception();
                    stop = true;
                    return;
                }
                failures[i] = RecordFailure{i, job.doc->id, 1, e.what()};
            }
            catch (...) {
                std::lock_guard lock(fatal_mutex);
                if (!fatal)
                    fatal = std::current_exception();
                stop = true;
                return;
            }
            if (failures[i] && static_cast<double>(failed.fetch_add(1) + 1) > allowed)
                stop = true;
            const auto d = done.fetch_add(1) + 1;
            if (options.progress)
                options.progress(d, total);
        }
    };

    {
        const auto width = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, options.workers)), 1,
                                                   std::max<std::size_t>(1, total));
        std::vector<std::jthread> pool;
        pool.reserve(width);
        for (std::size_t t = 0; t < width; ++t)
            pool.emplace_back(worker);
    }
    if (fatal)
        std::rethrow_exception(fatal);

    Benchmark b;
    b.config_digest = config_digest(cfg);
    b.corpus_digest = corpus_digest(corpus);
    for (auto& f : failures)
        if (f)
            b.failures.push_back(std::move(*f));
    if (static_cast<double>(b.failures.size()) > allowed) {
        // message first: the vector is moved into the exception below
        auto what = fmt::format("{} of {} records failed (limit {:.0f}%); first failure: {}", b.failures.size(),
                                total, 100.0 * options.max_failure_ratio, b.failures.front().reason);
        throw RunAbortedError(what, std::move(b.failures));
    }
    for (auto& r : records)
        if (r)
            b.records.push_back(std::move(*r));
    return b;
}

std::string record_id_for(std::size_t plan_index)
{
    return fmt::format("q{:06d}", plan_index + 1);
}

std::string config_digest(const GenerationConfig& cfg)
{
    return sha256_hex(serialize_config(cfg));
}

std::string record_to_json(const BenchmarkRecord& r)
{
    ordered_json j;
    j["record_id"] = r.record_id;
    j["question"] = r.question;
    j["answer"] = r.answer;
    j["document_id"] = r.document_id;
    auto& users = j["user_categories"] = ordered_json::object();
    for (const auto& [k, v] : r.user_categories)
        users[k] = v;
    auto& questions = j["question_categories"] = ordered_json::object();
    for (const auto& [k, v] : r.question_categories)
        questions[k] = v;
    auto& cands = j["candidates"] = ordered_json::array();
    for (const auto& c : r.candidates) {
        cands.push_back({
            {"question", c.pair.question},
            {"answer", c.pair.answer},
            {"verdict",
             {{"context_free", c.verdict.context_free},
              {"category_adherent", c.verdict.category_adherent},
              {"faithful", c.verdict.faithful}}},
            {"judge_raw", c.verdict.judge_raw},
        });
    }
    const auto& p = r.provenance;
    j["provenance"] = {
        {"generator", p.generator},
        {"judge", p.judge},
        {"prompt_sha256", p.prompt_sha256},
        {"record_seed", p.record_seed},
        {"attempt", p.attempt},
        {"temperature", p.temperature},
        {"max_tokens", p.max_tokens},
        {"prompt_tokens", p.prompt_tokens},
        {"completion_tokens", p.completion_tokens},
    };
    return j.dump();
}

void write_benchmark_jsonl(const Benchmark& benchmark, std::ostream& out)
{
    for (const auto& r : benchmark.records)
        out << record_to_json(r) << '\n';
}

} // namespace qabench
