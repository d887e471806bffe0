// Acceptance runner: one PASS/FAIL/SKIP line per criterion, exit 1 on any FAIL.

#include "oracles.hpp"
#include "qabench/cli.hpp"
#include "qabench/diversity.hpp"
#include "qabench/prompt.hpp"
#include "qabench/sampler.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

using namespace qabench;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

enum class Outcome { pass, fail, skip };

struct Verdict {
    Outcome outcome;
    std::string detail;
};

Verdict pass(std::string d) { return {Outcome::pass, std::move(d)}; }
Verdict fail(std::string d) { return {Outcome::fail, std::move(d)}; }

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int cli(std::vector<std::string> args, std::string* err_text = nullptr)
{
    args.insert(args.begin(), "qabench");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (err_text)
        *err_text = err.str();
    return code;
}

const PerceptronTagger& tagger()
{
    static const PerceptronTagger t = PerceptronTagger::builtin();
    return t;
}

std::vector<std::string> questions_of(const fs::path& jsonl)
{
    return read_question_source(jsonl);
}

// ---------------------------------------------------------------- 1

Verdict metric_oracles()
{
    const auto t0 = Clock::now();
    Rng rng(1001);
    HashEmbedder embedder;
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = 1 + rng.below(50);
        const auto vocab = 2 + rng.below(30);
        std::vector<oracle::Words> words(n);
        std::vector<std::string> qs;
        for (auto& w : words) {
            const auto len = 1 + rng.below(12);
            for (std::uint64_t i = 0; i < len; ++i)
                w.push_back("w" + std::to_string(rng.below(vocab)));
            qs.push_back(oracle::spaced(w));
        }
        worst = std::max(worst, std::abs(ngd(qs) - oracle::ngd(words)));
        worst = std::max(worst, std::abs(srs(qs) - oracle::srs(words)));
        if (qs.size() >= 2) {
            const auto vecs = embedder.embed_batch(qs);
            std::vector<std::vector<double>> raw;
            for (const auto& v : vecs)
                raw.push_back(v.values);
            worst = std::max(worst, std::abs(homogenization(qs, embedder) - oracle::mean_pairwise_cosine(raw)));
        }
    }
    const double secs = seconds_since(t0);
    const auto d = fmt::format("max |impl - oracle| = {:.2e} over 1000 corpora, {:.1f}s", worst, secs);
    return worst <= 1e-9 && secs < 30 ? pass(d) : fail(d);
}

// ---------------------------------------------------------------- 2

Verdict fixed_points()
{
    using Qs = std::vector<std::string>;
    const double a = ngd(Qs{"a b c d e"});
    const double b = ngd(Qs{"a b c", "a b c"});
    const double c = srs(Qs{"one two three four", "one two three four"});
    const double h = homogenization_of(std::vector<EmbeddingVector>{{{1, 0}}, {{0, 1}}, {{1, 0}}});
    const auto d = fmt::format("ngd={} ngd={} srs={} hs={:.15f}", a, b, c, h);
    return a == 4.0 && b == 1.5 && c == 1.0 && std::abs(h - 1.0 / 3.0) <= 1e-12 ? pass(d) : fail(d);
}

// ---------------------------------------------------------------- 3

Verdict human_reference()
{
    fs::path path;
    if (const char* env = std::getenv("QABENCH_COVIDQA_QUESTIONS"))
        path = env;
    else
        path = test::data_path("covidqa_questions.txt");
    if (!fs::exists(path))
        return {Outcome::skip, "no COVID-QA question export (set QABENCH_COVIDQA_QUESTIONS)"};

    const auto t0 = Clock::now();
    const auto qs = read_question_source(path);
    AnalysisOptions o;
    o.tagger = &tagger();
    const auto r = analyze(qs, o);
    const double secs = seconds_since(t0);
    const bool ok = std::abs(r.ngd - 2.484) <= 0.15 && std::abs(r.srs - 0.365) <= 0.05 &&
                    std::abs(r.word_cr - 3.380) <= 0.2 && std::abs(r.pos_cr - 6.212) <= 0.5 &&
                    std::abs(100 * r.top1_frequency - 9.9) <= 1.5 && secs < 60;
    return {ok ? Outcome::pass : Outcome::fail,
            fmt::format("n={} ngd={:.3f} srs={:.3f} word-cr={:.3f} pos-cr={:.3f} top1={:.1f}% ({:.1f}s)",
                        r.n_questions, r.ngd, r.srs, r.word_cr, r.pos_cr, 100 * r.top1_frequency, secs)};
}

// ---------------------------------------------------------------- 4

Verdict sampling_fidelity()
{
    const auto fact = load_config(test::shipped_path("configs/question_factuality.json"));
    Rng rng(4);
    int factoid = 0;
    for (int i = 0; i < 10000; ++i)
        factoid += draw_categories(fact, rng).question_picks.at(0).category.name == "factoid";
    const double freq = factoid / 10000.0;

    // Joint cells of the four default question categorizations against the
    // product of the configured marginals.
    const auto cfg = default_general_purpose_config();
    const int N = 100000;
    std::map<std::string, int> joint;
    Rng rng2(44);
    for (int i = 0; i < N; ++i) {
        std::string key;
        for (const auto& p : draw_categories(cfg, rng2).question_picks)
            key += p.category.name + "|";
        ++joint[key];
    }
    double worst_z = 0;
    std::size_t cells = 0;
    std::function<void(std::size_t, std::string, double)> walk = [&](std::size_t k, std::string key, double p) {
        if (k == cfg.question_categorizations.size()) {
            const double expected = N * p;
            const double sigma = std::sqrt(N * p * (1 - p));
            worst_z = std::max(worst_z, std::abs(joint[key] - expected) / sigma);
            ++cells;
            return;
        }
        for (const auto& c : cfg.question_categorizations[k].categories)
            walk(k + 1, key + c.name + "|", p * c.probability);
    };
    walk(0, "", 1.0);
    const auto d = fmt::format("factoid freq {:.4f}; {} joint cells, max |z| = {:.2f}", freq, cells, worst_z);
    return std::abs(freq - 0.25) <= 0.02 && worst_z <= 3.0 && joint.size() == cells ? pass(d) : fail(d);
}

// ---------------------------------------------------------------- 5

Verdict end_to_end_determinism()
{
    const auto dir = test::scratch_dir("acc-determinism");
    const auto corpus = test::data_path("cord_fixture.jsonl").string();
    const auto counts = test::data_path("covidqa_counts.json").string();
    const auto t0 = Clock::now();
    for (const char* o : {"run1", "run2"}) {
        std::string err;
        const int code = cli({"generate", "--config", "default", "--corpus", corpus, "--counts", counts, "--out",
                              (dir / o).string(), "--seed", "2019", "--quiet"},
                             &err);
        if (code != 0)
            return fail(fmt::format("generate exited {}: {}", code, err));
    }
    const double secs = seconds_since(t0);
    const auto a = test::slurp(dir / "run1" / "benchmark.jsonl");
    const auto b = test::slurp(dir / "run2" / "benchmark.jsonl");
    const auto n = questions_of(dir / "run1" / "benchmark.jsonl").size();
    const auto d = fmt::format("{} records, identical={}, {:.1f}s for both runs", n, a == b, secs);
    return a == b && n == 2019 && secs < 120 ? pass(d) : fail(d);
}

// ---------------------------------------------------------------- 6

Verdict persona_ordering()
{
    const auto dir = test::scratch_dir("acc-personas");
    const auto corpus = test::data_path("cord_fixture.jsonl").string();
    AnalysisOptions o;
    o.tagger = &tagger();
    std::map<std::string, DiversityReport> r;
    for (const char* persona : {"templated", "category_conditioned"}) {
        std::string err;
        const int code = cli({"generate", "--config", "default", "--corpus", corpus, "--total", "500", "--out",
                              (dir / persona).string(), "--seed", "6", "--mock-persona", persona, "--quiet"},
                             &err);
        if (code != 0)
            return fail(fmt::format("generate ({}) exited {}: {}", persona, code, err));
        r[persona] = analyze(questions_of(dir / persona / "benchmark.jsonl"), o);
    }
    const auto& t = r["templated"];
    const auto& c = r["category_conditioned"];
    const bool ok = t.n_questions == 500 && c.n_questions == 500 && t.ngd < c.ngd && t.srs > c.srs &&
                    t.distinct_templates < c.distinct_templates;
    return {ok ? Outcome::pass : Outcome::fail,
            fmt::format("templated ngd={:.3f} srs={:.3f} templates={} | conditioned ngd={:.3f} srs={:.3f} "
                        "templates={}",
                        t.ngd, t.srs, t.distinct_templates, c.ngd, c.srs, c.distinct_templates)};
}

// ---------------------------------------------------------------- 7

Verdict redundancy_monotonicity()
{
    static const std::vector<std::string> pool = {
        "what", "is", "the", "virus", "how", "long", "does", "fever", "last", "in", "children", "which", "drug",
        "helps", "patients", "recover", "why", "are", "older", "adults", "at", "risk", "of", "severe", "disease",
        "can", "masks", "reduce", "spread", "vaccine", "safe", "for", "pregnant", "women", "?"};
    Rng rng(7);
    int bad = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> b;
        const auto n = 1 + rng.below(60);
        for (std::uint64_t i = 0; i < n; ++i) {
            std::string q;
            const auto len = 1 + rng.below(14);
            for (std::uint64_t k = 0; k < len; ++k)
                q += (k ? " " : "") + pool[rng.below(pool.size())];
            b.push_back(q);
        }
        auto bb = b;
        bb.insert(bb.end(), b.begin(), b.end());
        if (!(word_cr(bb) > word_cr(b) && ngd(bb) <= ngd(b) && srs(bb) >= srs(b)))
            ++bad;
    }
    const auto d = fmt::format("{} of 100 random benchmarks violate a property", bad);
    return bad == 0 ? pass(d) : fail(d);
}

// ---------------------------------------------------------------- 8

Verdict prompt_fidelity()
{
    const auto cfg = default_general_purpose_config();
    auto pick = [&](const Categorization& c, const std::string& name) {
        for (const auto& cat : c.categories)
            if (cat.name == name)
                return CategoryPick{c.name, cat};
        throw Error("no category " + name);
    };
    CategoryDraw draw;
    draw.user_picks.push_back(pick(cfg.user_categorizations.at(0), "novice"));
    draw.question_picks.push_back(pick(cfg.question_categorizations.at(0), "factoid"));
    draw.question_picks.push_back(pick(cfg.question_categorizations.at(1), "with-premise"));
    draw.question_picks.push_back(pick(cfg.question_categorizations.at(2), "long-search-query"));
    draw.question_picks.push_back(pick(cfg.question_categorizations.at(3), "distant-from-document"));
    const Document doc{"d1", "The Amazon River has an average discharge of about 215,000 m3/s.", {}, false};
    const auto text = render_prompt(draw, doc, 3).text;

    // Literal template sentences and the description text of each drawn
    // category up to its parenthesised example.
    const std::vector<std::string> needles = {
        "You are a user simulator that should generate 3 candidate questions for starting a conversation.",
        "Return only the questions without any preamble.",
        "They must be a regular user with no understanding of specialized terms.",
        "It must be question seeking a specific, concise piece of information or a short fact about a particular "
        "subject, such as a name, date, or number",
        "It must be question starting with a very short premise, where the user reveals their needs or some "
        "information about himself",
        "It must be phrased as a typed web query for search engines (only keywords, without punctuation and "
        "without a natural-sounding structure). It consists of more than 6 words",
        "It must be phrased using terms completely different from the ones appearing in the document",
    };
    std::vector<std::string> missing;
    for (const auto& n : needles)
        if (text.find(n) == std::string::npos)
            missing.push_back(n.substr(0, 40));
    const bool golden = text == test::slurp(test::data_path("golden_prompt.txt"));
    if (!missing.empty())
        return fail(fmt::format("{} literal(s) missing, first: \"{}...\"", missing.size(), missing[0]));
    return golden ? pass(fmt::format("{} literals present, golden snapshot matches", needles.size()))
                  : fail("golden snapshot differs");
}

// ---------------------------------------------------------------- 9

Verdict analysis_throughput()
{
    const auto dir = test::scratch_dir("acc-throughput");
    const auto corpus = test::data_path("cord_fixture.jsonl").string();
    if (cli({"generate", "--config", "default", "--corpus", corpus, "--total", "2000", "--out", (dir / "g").string(),
             "--seed", "9", "--quiet"}) != 0)
        return fail("could not generate the 2000-question input");
    const auto t0 = Clock::now();
    std::string err;
    const int code = cli({"analyze", (dir / "g" / "benchmark.jsonl").string(), "--out", (dir / "a").string()}, &err);
    const double secs = seconds_since(t0);
    if (code != 0)
        return fail(fmt::format("analyze exited {}: {}", code, err));
    const auto n = json::parse(test::slurp(dir / "a" / "report.json"))["n_questions"].get<std::size_t>();
    const auto d = fmt::format("{} questions analyzed in {:.2f}s", n, secs);
    return n == 2000 && secs < 10 ? pass(d) : fail(d);
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, Verdict (*)()>> criteria = {
        {"metric oracle equivalence", metric_oracles},
        {"formula fixed points", fixed_points},
        {"human reference values", human_reference},
        {"sampling fidelity", sampling_fidelity},
        {"end-to-end determinism", end_to_end_determinism},
        {"persona diversity ordering", persona_ordering},
        {"redundancy monotonicity", redundancy_monotonicity},
        {"prompt fidelity", prompt_fidelity},
        {"analysis throughput", analysis_throughput},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        }
        catch (const std::exception& e) {
            v = fail(std::string("exception: ") + e.what());
        }
        const char* tag = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::fail ? "FAIL" : "SKIP";
        failures += v.outcome == Outcome::fail;
        std::cout << fmt::format("[{}] {}. {}: {}", tag, i + 1, criteria[i].first, v.detail) << std::endl;
    }
    return failures ? 1 : 0;
}
