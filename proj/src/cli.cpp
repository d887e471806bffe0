#include "qabench/cli.hpp"

#include "qabench/config.hpp"
#include "qabench/corpus.hpp"
#include "qabench/digest.hpp"
#include "qabench/diversity.hpp"
#include "qabench/pipeline.hpp"
#include "qabench/providers.hpp"
#include "qabench/report.hpp"
#include "qabench/tagger.hpp"

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#ifndef QABENCH_VERSION
#define QABENCH_VERSION "0.0.0"
#endif

namespace qabench {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr const char* kDefaultEndpoint = "https://api.openai.com/v1";
constexpr const char* kApiKeyVariable = "QABENCH_API_KEY";

class UsageError : public Error {
public:
    using Error::Error;
};

std::string utc_now(const char* format = "{:%Y-%m-%dT%H:%M:%SZ}")
{
    const std::time_t t = std::time(nullptr);
    return fmt::format(fmt::runtime(format), fmt::gmtime(t));
}

void write_file_atomic(const fs::path& path, std::string_view contents)
{
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f)
            throw IoError(fmt::format("cannot write {}", tmp.string()));
        f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        f.flush();
        if (!f)
            throw IoError(fmt::format("write to {} failed", tmp.string()));
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec)
        throw IoError(fmt::format("cannot move {} into place: {}", path.string(), ec.message()));
}

void ensure_directory(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw IoError(fmt::format("cannot create output directory {}", dir.string()));
}

fs::path make_run_directory(const fs::path& out, std::optional<std::uint64_t> seed)
{
    ensure_directory(out);
    std::string base = "run-" + utc_now("{:%Y%m%dT%H%M%SZ}");
    if (seed)
        base += fmt::format("-seed{}", *seed);
    fs::path dir = out / base;
    for (int n = 2; fs::exists(dir); ++n)
        dir = out / fmt::format("{}-{}", base, n);
    ensure_directory(dir);
    return dir;
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(fmt::format("cannot read {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const std::optional<std::uint64_t>& from_config,
                           std::ostream& err)
{
    if (flag)
        return *flag;
    if (from_config)
        return *from_config;
    std::random_device rd;
    const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    err << fmt::format("no --seed given; using seed {}\n", seed);
    return seed;
}

std::string command_line(int argc, const char* const* argv)
{
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i)
            s += ' ';
        s += argv[i];
    }
    return s;
}

// ------------------------------------------------------------ providers

struct ProviderFlags {
    std::string provider = "mock";
    std::string persona = "category_conditioned";
    std::string judge_policy = "all_yes";
    std::string model = "gpt-4o-mini";
    std::string judge_model;
    std::string endpoint = kDefaultEndpoint;
    int concurrency = 4;
    int http_retries = 3;
    int timeout_ms = 60000;
};

void add_provider_flags(CLI::App& cmd, ProviderFlags& f)
{
    cmd.add_option("--provider", f.provider, "Chat backend")->check(CLI::IsMember({"mock", "http"}));
    cmd.add_option("--mock-persona", f.persona, "Mock generator behaviour")
        ->check(CLI::IsMember({"category_conditioned", "templated", "chatty", "refusing"}));
    cmd.add_option("--mock-judge", f.judge_policy, "Mock judge behaviour")
        ->check(CLI::IsMember({"all_yes", "all_no", "faithfulness_aware", "garbled"}));
    cmd.add_option("--model", f.model, "Generator model id (http provider)");
    cmd.add_option("--judge-model", f.judge_model, "Judge model id (defaults to --model)");
    cmd.add_option("--endpoint", f.endpoint, "OpenAI-compatible base URL");
    cmd.add_option("--concurrency", f.concurrency, "Parallel records and HTTP requests")->check(CLI::PositiveNumber);
    cmd.add_option("--http-retries", f.http_retries, "Retries for transient HTTP failures")
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--timeout-ms", f.timeout_ms, "Per-request timeout")->check(CLI::PositiveNumber);
}

HttpProviderOptions http_options(const ProviderFlags& f, const std::string& model)
{
    HttpProviderOptions o;
    o.model = model;
    o.timeout = std::chrono::milliseconds(f.timeout_ms);
    o.retries = f.http_retries;
    o.max_concurrency = f.concurrency;
    return o;
}

std::string api_key()
{
    const char* key = std::getenv(kApiKeyVariable);
    return key ? key : "";
}

std::unique_ptr<ChatProvider> make_generator(const ProviderFlags& f, const std::string& persona)
{
    if (f.provider == "mock")
        return std::make_unique<MockChatProvider>(parse_mock_persona(persona));
    return std::make_unique<OpenAiChatProvider>(make_http_transport(f.endpoint, api_key()), http_options(f, f.model));
}

std::unique_ptr<ChatProvider> make_judge(const ProviderFlags& f)
{
    if (f.provider == "mock")
        return std::make_unique<MockJudgeProvider>(parse_mock_judge_policy(f.judge_policy));
    const auto model = f.judge_model.empty() ? f.model : f.judge_model;
    return std::make_unique<OpenAiChatProvider>(make_http_transport(f.endpoint, api_key()), http_options(f, model));
}

// ------------------------------------------------------------- pipeline

struct PipelineFlags {
    int retries = 2;
    double max_failure_ratio = 0.2;
    double temperature = kDefaultTemperature;
    int max_tokens = kDefaultMaxTokens;
    std::string template_path;
    std::string judge_template_path;
    std::size_t char_budget = CorpusOptions{}.char_budget;
    std::string corpus_format = "auto";
    bool quiet = false;
};

void add_pipeline_flags(CLI::App& cmd, PipelineFlags& f)
{
    cmd.add_option("--retries", f.retries, "Extra generation attempts when no candidate passes")
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--max-failure-ratio", f.max_failure_ratio, "Abort when more records than this share fail")
        ->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--temperature", f.temperature, "Generator sampling temperature");
    cmd.add_option("--max-tokens", f.max_tokens, "Generator completion limit")->check(CLI::PositiveNumber);
    cmd.add_option("--template", f.template_path, "Generation prompt template file");
    cmd.add_option("--judge-template", f.judge_template_path, "Judge prompt template file");
    cmd.add_option("--char-budget", f.char_budget, "Document truncation budget in characters")
        ->check(CLI::PositiveNumber);
    cmd.add_option("--corpus-format", f.corpus_format, "Corpus layout")
        ->check(CLI::IsMember({"auto", "jsonl", "dir"}));
    cmd.add_flag("--quiet", f.quiet, "No progress output");
}

struct LoadedTemplates {
    std::optional<TextTemplate> generation;
    std::optional<TextTemplate> judge;
};

PipelineOptions pipeline_options(const PipelineFlags& f, const ProviderFlags& p, const LoadedTemplates& t)
{
    PipelineOptions o;
    o.retries = f.retries;
    o.workers = p.concurrency;
    o.max_failure_ratio = f.max_failure_ratio;
    o.temperature = f.temperature;
    o.max_tokens = f.max_tokens;
    o.generator_model = p.model;
    o.judge_model = p.judge_model.empty() ? p.model : p.judge_model;
    o.generation_template = t.generation ? &*t.generation : nullptr;
    o.judge_template = t.judge ? &*t.judge : nullptr;
    return o;
}

LoadedTemplates load_templates(const PipelineFlags& f)
{
    LoadedTemplates t;
    if (!f.template_path.empty())
        t.generation = TextTemplate::load(f.template_path);
    if (!f.judge_template_path.empty())
        t.judge = TextTemplate::load(f.judge_template_path);
    return t;
}

Corpus load_corpus_flag(const std::string& path, const PipelineFlags& f)
{
    CorpusFormat format = CorpusFormat::jsonl;
    if (f.corpus_format == "dir" || (f.corpus_format == "auto" && fs::is_directory(path)))
        format = CorpusFormat::plain_dir;
    CorpusOptions options;
    options.char_budget = f.char_budget;
    return load_corpus(path, format, options);
}

GenerationConfig load_config_flag(const std::string& path)
{
    if (path.empty() || path == "vanilla")
        return GenerationConfig{};
    if (path == "default")
        return default_general_purpose_config();
    return load_config(path);
}

PerDocumentSampling load_counts(const fs::path& path)
{
    const auto text = read_text(path);
    PerDocumentSampling s;
    try {
        const auto j = nlohmann::json::parse(text);
        if (!j.is_object())
            throw UsageError(fmt::format("{}: expected a JSON object of document id to count", path.string()));
        for (const auto& [id, n] : j.items()) {
            if (!n.is_number_unsigned())
                throw UsageError(fmt::format("{}: count for \"{}\" is not a non-negative integer", path.string(), id));
            s.counts[id] = n.get<std::size_t>();
        }
    }
    catch (const nlohmann::json::parse_error& e) {
        throw ParseError(fmt::format("{}: {}", path.string(), e.what()), e.byte);
    }
    return s;
}

// -------------------------------------------------------------- analysis

struct AnalysisFlags {
    std::string embedder = "none";
    std::string embeddings_file;
    std::string embed_model = "text-embedding-3-small";
    std::string embed_endpoint = kDefaultEndpoint;
    std::string tagger = "builtin";
    std::string tagger_cmd;
    std::size_t top = 10;
    bool serial = false;
};

void add_analysis_flags(CLI::App& cmd, AnalysisFlags& f)
{
    cmd.add_option("--embedder", f.embedder, "Embedding backend for the homogenization score")
        ->check(CLI::IsMember({"none", "mock", "http", "file"}));
    cmd.add_option("--embeddings-file", f.embeddings_file, "JSONL of {\"text\", \"vector\"} for --embedder file");
    cmd.add_option("--embed-model", f.embed_model, "Embedding model id for --embedder http");
    cmd.add_option("--embed-endpoint", f.embed_endpoint, "Base URL for --embedder http");
    cmd.add_option("--tagger", f.tagger, "Part-of-speech tagger")->check(CLI::IsMember({"builtin", "external"}));
    cmd.add_option("--tagger-cmd", f.tagger_cmd, "Command for --tagger external (tab-separated tokens in, tab-separated tags out, one sentence per line)");
    cmd.add_option("--top", f.top, "Templates listed in the report");
    cmd.add_flag("--serial", f.serial, "Use the single-threaded metric kernels");
}

struct AnalysisTools {
    std::unique_ptr<Tagger> tagger;
    std::unique_ptr<Embedder> embedder;

    AnalysisOptions options(const AnalysisFlags& f) const
    {
        AnalysisOptions o;
        o.tagger = tagger.get();
        o.embedder = embedder.get();
        o.keep_top = f.top;
        o.execution = f.serial ? kernels::Execution::serial : kernels::Execution::parallel;
        return o;
    }
};

AnalysisTools make_analysis_tools(const AnalysisFlags& f)
{
    AnalysisTools t;
    if (f.tagger == "external") {
        if (f.tagger_cmd.empty())
            throw UsageError("--tagger external needs --tagger-cmd");
        t.tagger = std::make_unique<ExternalTagger>(f.tagger_cmd);
    }
    else {
        t.tagger = std::make_unique<PerceptronTagger>(PerceptronTagger::builtin());
    }
    if (f.embedder == "mock") {
        t.embedder = std::make_unique<HashEmbedder>();
    }
    else if (f.embedder == "file") {
        if (f.embeddings_file.empty())
            throw UsageError("--embedder file needs --embeddings-file");
        t.embedder = std::make_unique<PrecomputedEmbedder>(PrecomputedEmbedder::load(f.embeddings_file));
    }
    else if (f.embedder == "http") {
        HttpProviderOptions o;
        o.model = f.embed_model;
        t.embedder = std::make_unique<OpenAiEmbedder>(make_http_transport(f.embed_endpoint, api_key()), o);
    }
    return t;
}

// -------------------------------------------------------------- commands

int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err)
{
    const auto raw = read_text(path);
    try {
        const auto cfg = parse_config(raw);
        out << fmt::format("{}: ok ({} user and {} question categorizations, {} question combinations)\n", path,
                           cfg.user_categorizations.size(), cfg.question_categorizations.size(),
                           joint_question_space(cfg));
        return kExitOk;
    }
    catch (const ConfigError& e) {
        for (const auto& d : e.diagnostics())
            err << path << ": " << format_diagnostic(d) << '\n';
        return kExitValidation;
    }
}

struct GenerateArgs {
    std::string config;
    std::string corpus;
    std::string counts;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> per_doc;
    std::optional<std::size_t> total;
    ProviderFlags provider;
    PipelineFlags pipeline;
};

int cmd_generate(const GenerateArgs& a, const std::string& cmdline, std::ostream& out, std::ostream& err)
{
    const int modes = (a.per_doc ? 1 : 0) + (a.total ? 1 : 0) + (a.counts.empty() ? 0 : 1);
    if (modes != 1)
        throw UsageError("give exactly one of --per-doc, --total or --counts");

    const auto started = utc_now();
    const auto cfg = load_config_flag(a.config);
    const auto corpus = load_corpus_flag(a.corpus, a.pipeline);
    const auto templates = load_templates(a.pipeline);
    const auto seed = resolve_seed(a.seed, cfg.seed, err);

    SamplingMode mode;
    if (a.per_doc) {
        PerDocumentSampling s;
        for (const auto& d : corpus.documents)
            s.counts[d.id] = *a.per_doc;
        mode = std::move(s);
    }
    else if (a.total) {
        mode = UniformSampling{*a.total};
    }
    else {
        mode = load_counts(a.counts);
    }

    const fs::path dir = a.out;
    ensure_directory(dir);

    auto generator = make_generator(a.provider, a.provider.persona);
    auto judge = make_judge(a.provider);
    Providers providers{*generator, *judge};
    auto options = pipeline_options(a.pipeline, a.provider, templates);

    std::mutex progress_mutex;
    if (!a.pipeline.quiet) {
        options.progress = [&](std::size_t done, std::size_t total) {
            const std::size_t step = std::max<std::size_t>(1, total / 10);
            if (done % step == 0 || done == total) {
                std::lock_guard lock(progress_mutex);
                err << fmt::format("generated {}/{}\n", done, total);
            }
        };
    }

    Rng rng(seed);
    const auto plan = make_sampling_plan(corpus, mode, rng);

    ordered_json manifest;
    manifest["tool"] = "qabench";
    manifest["tool_version"] = QABENCH_VERSION;
    manifest["command_line"] = cmdline;
    manifest["seed"] = seed;
    manifest["digest_algorithm"] = kDigestAlgorithm;
    manifest["config_digest"] = config_digest(cfg);
    manifest["corpus_digest"] = corpus_digest(corpus);
    manifest["providers"] = {{"generator", generator->identifier()}, {"judge", judge->identifier()}};
    manifest["plan_length"] = plan.size();
    manifest["started_at"] = started;

    auto failure_json = [](const std::vector<RecordFailure>& failures) {
        auto arr = ordered_json::array();
        for (const auto& f : failures)
            arr.push_back({{"record_id", record_id_for(f.plan_index)},
                           {"document_id", f.document_id},
                           {"attempts", f.attempts},
                           {"reason", f.reason}});
        return arr;
    };

    Benchmark bench;
    try {
        bench = run_generation(cfg, corpus, plan, providers, rng, options);
    }
    catch (const RunAbortedError& e) {
        manifest["finished_at"] = utc_now();
        manifest["status"] = "aborted";
        manifest["records"] = 0;
        manifest["failure_count"] = e.failures().size();
        manifest["failures"] = failure_json(e.failures());
        write_file_atomic(dir / "run_manifest.json", manifest.dump(2) + "\n");
        throw;
    }

    std::ostringstream jsonl;
    write_benchmark_jsonl(bench, jsonl);
    const auto body = jsonl.str();
    write_file_atomic(dir / "benchmark.jsonl", body);

    manifest["finished_at"] = utc_now();
    manifest["status"] = "complete";
    manifest["records"] = bench.records.size();
    manifest["failure_count"] = bench.failures.size();
    manifest["failures"] = failure_json(bench.failures);
    manifest["benchmark_sha256"] = sha256_hex(body);
    write_file_atomic(dir / "run_manifest.json", manifest.dump(2) + "\n");

    out << fmt::format("wrote {} records ({} failed) to {}\n", bench.records.size(), bench.failures.size(),
                       (dir / "benchmark.jsonl").string());
    return kExitOk;
}

struct AnalyzeArgs {
    std::string input;
    std::string out;
    std::string label;
    AnalysisFlags analysis;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out)
{
    const auto tools = make_analysis_tools(a.analysis);
    const auto report = analyze_file(a.input, tools.options(a.analysis));
    const fs::path dir = a.out;
    ensure_directory(dir);
    const auto label = a.label.empty() ? fs::path(a.input).stem().string() : a.label;
    const auto text = report_to_text(report, label);
    write_file_atomic(dir / "report.json", report_to_json(report).dump(2) + "\n");
    write_file_atomic(dir / "report.txt", text);
    out << text;
    return kExitOk;
}

std::pair<std::string, std::string> split_label(const std::string& spec)
{
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
        return {fs::path(spec).stem().string(), spec};
    return {spec.substr(0, eq), spec.substr(eq + 1)};
}

struct CompareArgs {
    std::vector<std::string> inputs;
    std::string out;
    std::optional<std::uint64_t> seed;
    AnalysisFlags analysis;
};

int cmd_compare(const CompareArgs& a, std::ostream& out)
{
    if (a.inputs.size() < 2)
        throw UsageError("compare needs at least two --input values");
    std::vector<QuestionSource> sources;
    for (const auto& spec : a.inputs) {
        auto [label, path] = split_label(spec);
        sources.push_back({label, read_question_source(path)});
    }
    const auto tools = make_analysis_tools(a.analysis);
    const auto table = compare(sources, tools.options(a.analysis));
    const auto dir = make_run_directory(a.out, a.seed);
    const auto text = comparison_to_text(table);
    write_file_atomic(dir / "comparison.json", comparison_to_json(table).dump(2) + "\n");
    write_file_atomic(dir / "comparison.txt", text);
    out << text << fmt::format("wrote {}\n", dir.string());
    return kExitOk;
}

struct SweepArgs {
    std::string axis;
    std::string corpus;
    std::vector<std::size_t> xs;
    std::vector<std::string> variants;
    std::size_t total = 500;
    std::string out;
    std::optional<std::uint64_t> seed;
    ProviderFlags provider;
    PipelineFlags pipeline;
    AnalysisFlags analysis;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err)
{
    const auto axis = parse_sweep_axis(a.axis == "num-documents"            ? "num_documents"
                                       : a.axis == "questions-per-document" ? "questions_per_document"
                                                                            : a.axis);
    const auto corpus = load_corpus_flag(a.corpus, a.pipeline);
    const auto templates = load_templates(a.pipeline);
    const auto seed = resolve_seed(a.seed, std::nullopt, err);

    std::vector<std::string> specs = a.variants;
    if (specs.empty())
        specs = {"vanilla,vanilla", "configured,default"};

    auto judge = make_judge(a.provider);
    std::vector<std::unique_ptr<ChatProvider>> generators;
    std::vector<SweepVariant> variants;
    for (const auto& spec : specs) {
        std::vector<std::string> parts;
        std::stringstream ss(spec);
        for (std::string part; std::getline(ss, part, ',');)
            parts.push_back(part);
        if (parts.size() < 2 || parts.size() > 3 || parts[0].empty())
            throw UsageError(fmt::format("--variant \"{}\": expected NAME,CONFIG|vanilla|default[,PERSONA]", spec));
        generators.push_back(make_generator(a.provider, parts.size() == 3 ? parts[2] : a.provider.persona));
        variants.push_back({parts[0], load_config_flag(parts[1]), Providers{*generators.back(), *judge}});
    }

    SweepOptions options;
    options.total = a.total;
    options.seed = seed;
    options.pipeline = pipeline_options(a.pipeline, a.provider, templates);
    const auto tools = make_analysis_tools(a.analysis);

    const auto result = run_sweep(axis, variants, corpus, a.xs, options, tools.options(a.analysis));
    const auto dir = make_run_directory(a.out, seed);
    write_file_atomic(dir / "sweep.csv", sweep_to_csv(result));

    ordered_json j;
    j["axis"] = std::string(to_string(axis));
    j["seed"] = seed;
    j["total"] = a.total;
    auto& points = j["points"] = ordered_json::array();
    std::size_t errors = 0;
    for (const auto& p : result.points) {
        ordered_json pj;
        pj["x"] = p.x;
        auto& reports = pj["reports"] = ordered_json::object();
        for (const auto& [label, r] : p.reports)
            reports[label] = report_to_json(r);
        auto& errs = pj["errors"] = ordered_json::object();
        for (const auto& [label, msg] : p.errors) {
            errs[label] = msg;
            err << fmt::format("x={} {}: {}\n", p.x, label, msg);
            ++errors;
        }
        points.push_back(std::move(pj));
    }
    write_file_atomic(dir / "sweep.json", j.dump(2) + "\n");

    // The last point doubles as a comparison table across variants.
    if (!result.points.empty() && result.points.back().reports.size() >= 2) {
        std::vector<ComparisonRow> rows;
        for (const auto& [label, r] : result.points.back().reports)
            rows.push_back({label, r});
        const auto table = build_comparison(std::move(rows));
        write_file_atomic(dir / "comparison.json", comparison_to_json(table).dump(2) + "\n");
        write_file_atomic(dir / "comparison.txt", comparison_to_text(table));
    }

    out << fmt::format("{} point(s), {} failed variant run(s); wrote {}\n", result.points.size(), errors,
                       dir.string());
    return kExitOk;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Synthetic question-answer benchmark generator and diversity analyzer", "qabench"};
    app.set_version_flag("--version", QABENCH_VERSION);
    app.require_subcommand(1);

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a category configuration file");
    validate->add_option("config", validate_path, "Configuration JSON")->required();

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Generate a benchmark from a corpus");
    generate->add_option("--config", gen.config, "Configuration JSON, 'default', or omit for no categorizations");
    generate->add_option("--corpus", gen.corpus, "JSONL file or directory of .txt files")->required();
    generate->add_option("--out", gen.out, "Output directory")->required();
    generate->add_option("--seed", gen.seed, "Master seed");
    generate->add_option("--per-doc", gen.per_doc, "Questions per document")->check(CLI::NonNegativeNumber);
    generate->add_option("--total", gen.total, "Questions over documents drawn uniformly")
        ->check(CLI::NonNegativeNumber);
    generate->add_option("--counts", gen.counts, "JSON object of document id to question count");
    add_provider_flags(*generate, gen.provider);
    add_pipeline_flags(*generate, gen.pipeline);

    AnalyzeArgs an;
    auto* analyze_cmd = app.add_subcommand("analyze", "Diversity report for one benchmark or question file");
    analyze_cmd->add_option("input", an.input, "benchmark.jsonl or one question per line")->required();
    analyze_cmd->add_option("--out", an.out, "Output directory")->required();
    analyze_cmd->add_option("--label", an.label, "Row label in report.txt");
    add_analysis_flags(*analyze_cmd, an.analysis);

    CompareArgs cmp;
    auto* compare_cmd = app.add_subcommand("compare", "Side-by-side diversity table");
    compare_cmd->add_option("--input", cmp.inputs, "LABEL=PATH, repeatable")->required();
    compare_cmd->add_option("--out", cmp.out, "Directory that receives the run directory")->required();
    compare_cmd->add_option("--seed", cmp.seed, "Recorded in the run directory name");
    add_analysis_flags(*compare_cmd, cmp.analysis);

    SweepArgs sw;
    auto* sweep = app.add_subcommand("sweep", "Diversity as questions per document or documents grow");
    sweep->add_option("--axis", sw.axis, "questions_per_document or num_documents")->required();
    sweep->add_option("--corpus", sw.corpus, "JSONL file or directory of .txt files")->required();
    sweep->add_option("--x", sw.xs, "Comma-separated x values, strictly increasing")->required()->delimiter(',');
    sweep->add_option("--variant", sw.variants, "NAME,CONFIG|vanilla|default[,PERSONA], repeatable");
    sweep->add_option("--total", sw.total, "Questions per point on the num_documents axis");
    sweep->add_option("--out", sw.out, "Directory that receives the run directory")->required();
    sweep->add_option("--seed", sw.seed, "Master seed");
    add_provider_flags(*sweep, sw.provider);
    add_pipeline_flags(*sweep, sw.pipeline);
    add_analysis_flags(*sweep, sw.analysis);

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    const auto cmdline = command_line(argc, argv);
    try {
        if (*validate)
            return cmd_validate(validate_path, out, err);
        if (*generate)
            return cmd_generate(gen, cmdline, out, err);
        if (*analyze_cmd)
            return cmd_analyze(an, out);
        if (*compare_cmd)
            return cmd_compare(cmp, out);
        if (*sweep)
            return cmd_sweep(sw, out, err);
    }
    catch (const RunAbortedError& e) {
        err << "error: run aborted: " << e.what() << '\n';
        return kExitAborted;
    }
    catch (const ProviderError& e) {
        err << "error: provider: " << e.what() << '\n';
        return kExitProvider;
    }
    catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    }
    catch (const ConfigError& e) {
        for (const auto& d : e.diagnostics())
            err << "error: " << format_diagnostic(d) << '\n';
        return kExitValidation;
    }
    catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    }
    return kExitValidation;
}

} // namespace qabench
