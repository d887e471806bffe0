#include "qabench/diversity.hpp"

#include "qabench/error.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <zlib.h>

namespace qabench {

namespace {

std::vector<std::vector<std::string>> token_lists(std::span<const std::string> questions)
{
    std::vector<std::vector<std::string>> out;
    out.reserve(questions.size());
    for (const auto& q : questions)
        out.push_back(tokenize(q).tokens);
    return out;
}

std::vector<TokenSequence> token_sequences(std::span<const std::string> questions)
{
    std::vector<TokenSequence> out;
    out.reserve(questions.size());
    for (const auto& q : questions)
        out.push_back(tokenize(q));
    return out;
}

template <class Range>
std::string join(const Range& items, std::string_view sep)
{
    std::string out;
    bool first = true;
    for (const auto& s : items) {
        if (!first)
            out += sep;
        out += s;
        first = false;
    }
    return out;
}

void require_questions(std::span<const std::string> questions, std::string_view what)
{
    if (questions.empty())
        throw Error(fmt::format("{}: no questions", what));
}

} // namespace

double ngd(std::span<const std::string> questions, kernels::Execution ex)
{
    require_questions(questions, "ngd");
    const auto lists = token_lists(questions);
    return kernels::ngram_diversity(kernels::ngram_counts(kernels::intern(lists), ex));
}

double srs(std::span<const std::string> questions, kernels::Execution ex)
{
    require_questions(questions, "srs");
    if (questions.size() < 2)
        return 0.0;
    const auto lists = token_lists(questions);
    const auto repeating = kernels::repeating_questions(kernels::intern(lists), kSelfRepetitionOrder, ex);
    return static_cast<double>(repeating) / static_cast<double>(questions.size());
}

std::string gzip_compress(std::string_view payload, int level)
{
    z_stream zs{};
    if (deflateInit2(&zs, level, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw Error("gzip: deflateInit2 failed");
    gz_header header{};
    header.time = 0;
    header.os = 255;
    deflateSetHeader(&zs, &header);

    std::string out(deflateBound(&zs, payload.size()) + 32, '\0');
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(payload.data()));
    zs.avail_in = static_cast<uInt>(payload.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    const auto produced = zs.total_out;
    deflateEnd(&zs);
    if (rc != Z_STREAM_END)
        throw Error(fmt::format("gzip: deflate failed ({})", rc));
    out.resize(produced);
    return out;
}

double compression_ratio(std::string_view payload)
{
    if (payload.empty())
        throw Error("compression ratio of an empty payload");
    return static_cast<double>(payload.size()) / static_cast<double>(gzip_compress(payload).size());
}

double word_cr(std::span<const std::string> questions)
{
    require_questions(questions, "word_cr");
    return compression_ratio(join(questions, "\n"));
}

double pos_cr_from_tags(std::span<const PosSequence> tags)
{
    if (tags.empty())
        throw Error("pos_cr: no questions");
    std::vector<std::string> lines;
    lines.reserve(tags.size());
    for (const auto& seq : tags)
        lines.push_back(join(seq.tags, " "));
    return compression_ratio(join(lines, "\n"));
}

double pos_cr(std::span<const std::string> questions, const Tagger& tagger)
{
    require_questions(questions, "pos_cr");
    const auto seqs = token_sequences(questions);
    return pos_cr_from_tags(tagger.tag_batch(seqs));
}

double homogenization_of(std::span<const EmbeddingVector> vectors, kernels::Execution ex)
{
    if (vectors.size() < 2)
        throw Error("homogenization needs at least two questions");
    const auto dim = vectors.front().dimension();
    std::vector<double> rows;
    rows.reserve(vectors.size() * dim);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].dimension() != dim)
            throw Error(fmt::format("embedding {} has dimension {}, expected {}", i, vectors[i].dimension(), dim));
        rows.insert(rows.end(), vectors[i].values.begin(), vectors[i].values.end());
    }
    return kernels::homogenization(rows, dim, ex);
}

double homogenization(std::span<const std::string> questions, Embedder& embedder, kernels::Execution ex)
{
    if (questions.size() < 2)
        throw Error("homogenization needs at least two questions");
    const auto vectors = embedder.embed_batch(questions);
    check_embeddings(questions, vectors);
    return homogenization_of(vectors, ex);
}

TemplateStats template_stats_from_tags(std::span<const std::string> questions, std::span<const PosSequence> tags,
                                       std::size_t keep_top)
{
    if (questions.size() != tags.size())
        throw Error(fmt::format("template stats: {} questions but {} tag sequences", questions.size(), tags.size()));
    require_questions(questions, "template stats");

    std::map<PosTemplate, TemplateCount> groups;
    for (std::size_t i = 0; i < questions.size(); ++i) {
        if (tags[i].tags.empty())
            throw Error(fmt::format("question {} has no tokens: \"{}\"", i + 1, questions[i]));
        auto t = template_of(tags[i]);
        auto& g = groups[t];
        if (g.count == 0)
            g.tmpl = std::move(t);
        ++g.count;
        if (g.examples.size() < 3)
            g.examples.push_back(questions[i]);
    }

    TemplateStats s;
    s.n_questions = questions.size();
    s.distinct = groups.size();
    for (auto& [_, g] : groups)
        s.ranked.push_back(std::move(g));
    // The map already orders templates ascending; a stable sort keeps that for ties.
    std::stable_sort(s.ranked.begin(), s.ranked.end(),
                     [](const TemplateCount& a, const TemplateCount& b) { return a.count > b.count; });

    const double n = static_cast<double>(s.n_questions);
    std::size_t cumulative = 0;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, s.ranked.size()); ++i) {
        cumulative += s.ranked[i].count;
        if (i == 0)
            s.top1_frequency = static_cast<double>(cumulative) / n;
    }
    s.top3_frequency = static_cast<double>(cumulative) / n;
    if (s.ranked.size() > keep_top)
        s.ranked.resize(keep_top);
    return s;
}

TemplateStats template_stats(std::span<const std::string> questions, const Tagger& tagger, std::size_t keep_top)
{
    require_questions(questions, "template stats");
    const auto seqs = token_sequences(questions);
    return template_stats_from_tags(questions, tagger.tag_batch(seqs), keep_top);
}

DiversityReport analyze(std::span<const std::string> questions, const AnalysisOptions& options)
{
    if (!options.tagger)
        throw Error("analyze: a tagger is required");
    require_questions(questions, "analyze");

    const auto seqs = token_sequences(questions);
    std::vector<std::vector<std::string>> lists;
    lists.reserve(seqs.size());
    for (const auto& s : seqs)
        lists.push_back(s.tokens);
    const auto interned = kernels::intern(lists);
    const auto tags = options.tagger->tag_batch(seqs);

    DiversityReport r;
    r.n_questions = questions.size();
    r.ngd = kernels::ngram_diversity(kernels::ngram_counts(interned, options.execution));
    r.srs = questions.size() < 2 ? 0.0
                                 : static_cast<double>(kernels::repeating_questions(interned, kSelfRepetitionOrder,
                                                                                    options.execution)) /
                                       static_cast<double>(questions.size());
    r.word_cr = word_cr(questions);
    r.pos_cr = pos_cr_from_tags(tags);
    const auto stats = template_stats_from_tags(questions, tags, options.keep_top);
    r.distinct_templates = stats.distinct;
    r.top_templates = stats.ranked;
    r.top1_frequency = stats.top1_frequency;
    r.top3_frequency = stats.top3_frequency;
    r.tagger = options.tagger->identifier();
    if (options.embedder) {
        r.embedder = options.embedder->identifier();
        if (questions.size() >= 2)
            r.embeddings_hs = homogenization(questions, *options.embedder, options.execution);
    }
    return r;
}

std::vector<std::string> parse_question_source(std::string_view contents)
{
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos <= contents.size()) {
        auto nl = contents.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = contents.size();
        std::string line(contents.substr(pos, nl - pos));
        pos = nl + 1;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") != std::string::npos)
            lines.push_back(std::move(line));
        if (nl == contents.size())
            break;
    }

    const bool jsonl = !lines.empty() && lines.front().find_first_not_of(" \t") != std::string::npos &&
                       lines.front()[lines.front().find_first_not_of(" \t")] == '{';
    if (!jsonl)
        return lines;

    std::vector<std::string> out;
    out.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            const auto j = nlohmann::json::parse(lines[i]);
            out.push_back(j.at("question").get<std::string>());
        }
        catch (const nlohmann::json::exception& e) {
            throw ParseError(fmt::format("record {}: {}", i + 1, e.what()), i + 1);
        }
    }
    return out;
}

std::vector<std::string> read_question_source(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(fmt::format("cannot read {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    auto questions = parse_question_source(ss.str());
    if (questions.empty())
        throw Error(fmt::format("{} contains no questions", path.string()));
    return questions;
}

DiversityReport analyze_file(const std::filesystem::path& path, const AnalysisOptions& options)
{
    const auto questions = read_question_source(path);
    return analyze(questions, options);
}

nlohmann::ordered_json report_to_json(const DiversityReport& r)
{
    nlohmann::ordered_json j;
    j["n_questions"] = r.n_questions;
    j["ngd"] = r.ngd;
    j["srs"] = r.srs;
    j["word_cr"] = r.word_cr;
    j["pos_cr"] = r.pos_cr;
    j["embeddings_hs"] = r.embeddings_hs ? nlohmann::ordered_json(*r.embeddings_hs) : nlohmann::ordered_json();
    j["distinct_templates"] = r.distinct_templates;
    j["top1_frequency"] = r.top1_frequency;
    j["top3_frequency"] = r.top3_frequency;
    auto& top = j["top_templates"] = nlohmann::ordered_json::array();
    for (const auto& t : r.top_templates)
        top.push_back({{"template", t.tmpl.to_string()}, {"count", t.count}, {"examples", t.examples}});
    j["metadata"] = {
        {"tagger", r.tagger},
        {"embedder", r.embedder.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(r.embedder)},
        {"ngram_tokens", "lowercased"},
        {"ngram_max_order", kernels::kMaxNgramOrder},
        {"srs_order", kSelfRepetitionOrder},
        {"gzip_level", kGzipLevel},
        {"template_length", kTemplateLength},
    };
    return j;
}

std::string report_to_text(const DiversityReport& r, std::string_view label)
{
    const auto hs = r.embeddings_hs ? fmt::format("{:.3f}", *r.embeddings_hs) : std::string("-");
    const std::size_t w = std::max<std::size_t>(9, label.size());
    std::string out = fmt::format("{:<{}}  {:>6}  {:>8}  {:>6}  {:>7}  {:>7}  {:>6}  {:>9}\n", "", w, "n", "NGD",
                                  "SRS", "word-CR", "PoS-CR", "HS", "templates");
    out += fmt::format("{:<{}}  {:>6}  {:>8.3f}  {:>6.3f}  {:>7.3f}  {:>7.3f}  {:>6}  {:>9}\n", label, w,
                       r.n_questions, r.ngd, r.srs, r.word_cr, r.pos_cr, hs, r.distinct_templates);
    if (!r.top_templates.empty()) {
        out += "\ntop templates\n";
        for (const auto& t : r.top_templates) {
            out += fmt::format("  {:>5}  {:>5.1f}%  {}\n", t.count,
                               100.0 * static_cast<double>(t.count) / static_cast<double>(r.n_questions),
                               t.tmpl.to_string());
        }
    }
    return out;
}

} // namespace qabench
