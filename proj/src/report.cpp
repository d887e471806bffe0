#include "qabench/report.hpp"

#include "qabench/error.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace qabench {

std::string_view metric_name(Metric m)
{
    switch (m) {
    case Metric::ngd: return "ngd";
    case Metric::srs: return "srs";
    case Metric::word_cr: return "word_cr";
    case Metric::pos_cr: return "pos_cr";
    case Metric::embeddings_hs: return "embeddings_hs";
    }
    return "unknown";
}

bool higher_is_better(Metric m) noexcept
{
    return m == Metric::ngd;
}

std::optional<double> metric_value(const DiversityReport& r, Metric m)
{
    switch (m) {
    case Metric::ngd: return r.ngd;
    case Metric::srs: return r.srs;
    case Metric::word_cr: return r.word_cr;
    case Metric::pos_cr: return r.pos_cr;
    case Metric::embeddings_hs: return r.embeddings_hs;
    }
    return std::nullopt;
}

ComparisonTable build_comparison(std::vector<ComparisonRow> rows)
{
    ComparisonTable t;
    t.rows = std::move(rows);
    for (std::size_t m = 0; m < kComparedMetrics.size(); ++m) {
        const auto metric = kComparedMetrics[m];
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            const auto v = metric_value(t.rows[i].report, metric);
            if (!v)
                continue;
            if (!t.best[m]) {
                t.best[m] = i;
                continue;
            }
            const double cur = *metric_value(t.rows[*t.best[m]].report, metric);
            if (higher_is_better(metric) ? *v > cur : *v < cur)
                t.best[m] = i;
        }
    }
    return t;
}

ComparisonTable compare(std::span<const QuestionSource> inputs, const AnalysisOptions& options)
{
    if (inputs.size() < 2)
        throw Error(fmt::format("compare needs at least two inputs, got {}", inputs.size()));
    std::vector<ComparisonRow> rows;
    rows.reserve(inputs.size());
    for (const auto& in : inputs) {
        try {
            rows.push_back({in.label, analyze(in.questions, options)});
        }
        catch (const Error& e) {
            throw Error(fmt::format("{}: {}", in.label, e.what()));
        }
    }
    return build_comparison(std::move(rows));
}

nlohmann::ordered_json comparison_to_json(const ComparisonTable& table)
{
    nlohmann::ordered_json j;
    auto& rows = j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : table.rows)
        rows.push_back({{"label", r.label}, {"report", report_to_json(r.report)}});
    auto& best = j["best"] = nlohmann::ordered_json::object();
    for (std::size_t m = 0; m < kComparedMetrics.size(); ++m) {
        const auto name = std::string(metric_name(kComparedMetrics[m]));
        best[name] = table.best[m] ? nlohmann::ordered_json(table.rows[*table.best[m]].label)
                                   : nlohmann::ordered_json();
    }
    auto& dir = j["direction"] = nlohmann::ordered_json::object();
    for (auto m : kComparedMetrics)
        dir[std::string(metric_name(m))] = higher_is_better(m) ? "higher" : "lower";
    return j;
}

std::string comparison_to_text(const ComparisonTable& table)
{
    std::size_t w = 5;
    for (const auto& r : table.rows)
        w = std::max(w, r.label.size());

    auto cell = [&](std::size_t row, std::size_t m) {
        const auto v = metric_value(table.rows[row].report, kComparedMetrics[m]);
        if (!v)
            return std::string("-");
        return fmt::format("{:.3f}{}", *v, table.best[m] == row ? "*" : "");
    };

    std::string out = fmt::format("{:<{}}  {:>6}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>9}\n", "", w, "n", "NGD",
                                  "SRS", "word-CR", "PoS-CR", "HS", "templates");
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        out += fmt::format("{:<{}}  {:>6}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>9}\n", r.label, w,
                           r.report.n_questions, cell(i, 0), cell(i, 1), cell(i, 2), cell(i, 3), cell(i, 4),
                           r.report.distinct_templates);
    }
    out += "* best per column (NGD higher is better, others lower)\n";
    return out;
}

std::string_view to_string(SweepAxis axis)
{
    return axis == SweepAxis::questions_per_document ? "questions_per_document" : "num_documents";
}

SweepAxis parse_sweep_axis(std::string_view name)
{
    if (name == "questions_per_document" || name == "per-doc")
        return SweepAxis::questions_per_document;
    if (name == "num_documents" || name == "docs")
        return SweepAxis::num_documents;
    throw Error(fmt::format("unknown sweep axis \"{}\" (expected questions_per_document or num_documents)", name));
}

std::vector<std::pair<std::string, std::size_t>> apportion(std::span<const std::string> ids, std::size_t total)
{
    if (ids.empty())
        throw Error("apportion over zero documents");
    const std::size_t base = total / ids.size();
    const std::size_t extra = total % ids.size();
    std::vector<std::pair<std::string, std::size_t>> out;
    out.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        out.emplace_back(ids[i], base + (i < extra ? 1 : 0));
    return out;
}

std::vector<std::string> sweep_document_order(const Corpus& corpus, std::uint64_t seed)
{
    std::vector<std::string> ids;
    ids.reserve(corpus.size());
    for (const auto& d : corpus.documents)
        ids.push_back(d.id);
    Rng rng(mix_seed(seed, std::string_view("sweep-document-order")));
    rng.shuffle(ids);
    return ids;
}

PerDocumentSampling sweep_sampling(SweepAxis axis, const Corpus& corpus, std::size_t x, std::size_t total,
                                   std::uint64_t seed)
{
    if (x == 0)
        throw Error("sweep x values must be positive");
    PerDocumentSampling s;
    if (axis == SweepAxis::questions_per_document) {
        for (const auto& d : corpus.documents)
            s.counts[d.id] = x;
        return s;
    }
    if (x > corpus.size())
        throw Error(fmt::format("num_documents x = {} exceeds the corpus size {}", x, corpus.size()));
    const auto order = sweep_document_order(corpus, seed);
    for (auto& [id, n] : apportion(std::span(order).first(x), total))
        if (n > 0)
            s.counts[id] = n;
    return s;
}

std::uint64_t sweep_point_seed(std::uint64_t seed, std::size_t variant_index, std::size_t x)
{
    return mix_seed(mix_seed(seed, static_cast<std::uint64_t>(variant_index)), static_cast<std::uint64_t>(x));
}

SweepResult run_sweep(SweepAxis axis, std::span<const SweepVariant> variants, const Corpus& corpus,
                      std::span<const std::size_t> xs, const SweepOptions& options, const AnalysisOptions& analysis)
{
    if (variants.empty())
        throw Error("sweep needs at least one variant");
    if (xs.empty())
        throw Error("sweep needs at least one x value");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] == 0)
            throw Error("sweep x values must be positive");
        if (i > 0 && xs[i] <= xs[i - 1])
            throw Error("sweep x values must be strictly increasing");
        if (axis == SweepAxis::num_documents && xs[i] > corpus.size())
            throw Error(fmt::format("num_documents x = {} exceeds the corpus size {}", xs[i], corpus.size()));
    }

    SweepResult result;
    result.axis = axis;
    for (const auto x : xs) {
        SweepPoint point;
        point.x = x;
        const auto sampling = sweep_sampling(axis, corpus, x, options.total, options.seed);
        for (std::size_t v = 0; v < variants.size(); ++v) {
            const auto& variant = variants[v];
            try {
                Rng rng(sweep_point_seed(options.seed, v, x));
                const auto plan = make_sampling_plan(corpus, sampling, rng);
                const auto bench = run_generation(variant.config, corpus, plan, variant.providers, rng,
                                                  options.pipeline);
                std::vector<std::string> questions;
                questions.reserve(bench.records.size());
                for (const auto& r : bench.records)
                    questions.push_back(r.question);
                point.reports.emplace_back(variant.label, analyze(questions, analysis));
            }
            catch (const ProviderError& e) {
                if (e.is_auth_failure())
                    throw;
                point.errors.emplace_back(variant.label, e.what());
            }
            catch (const Error& e) {
                point.errors.emplace_back(variant.label, e.what());
            }
        }
        result.points.push_back(std::move(point));
    }
    return result;
}

namespace {

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace

std::string sweep_to_csv(const SweepResult& result)
{
    std::string out = "x,label,metric,value\n";
    for (const auto& p : result.points) {
        for (const auto& [label, r] : p.reports) {
            for (auto m : kComparedMetrics)
                if (const auto v = metric_value(r, m))
                    out += fmt::format("{},{},{},{:.10g}\n", p.x, csv_field(label), metric_name(m), *v);
            out += fmt::format("{},{},distinct_templates,{}\n", p.x, csv_field(label), r.distinct_templates);
            out += fmt::format("{},{},n_questions,{}\n", p.x, csv_field(label), r.n_questions);
        }
    }
    return out;
}

} // namespace qabench
