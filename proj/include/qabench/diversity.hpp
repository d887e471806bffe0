#pragma once

#include "qabench/kernels.hpp"
#include "qabench/providers.hpp"
#include "qabench/tagger.hpp"
#include "qabench/textproc.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace qabench {

inline constexpr std::size_t kSelfRepetitionOrder = 4;
inline constexpr int kGzipLevel = 6;

/// N-gram diversity: sum over n = 1..4 of unique/total n-grams, pooled over
/// per-question windows of lowercased tokens. Throws on an empty list.
double ngd(std::span<const std::string> questions, kernels::Execution ex = kernels::Execution::parallel);

/// Self-repetition: share of questions with a 4-gram that also occurs in a
/// different question. 0 for fewer than two questions.
double srs(std::span<const std::string> questions, kernels::Execution ex = kernels::Execution::parallel);

/// gzip member with an empty header (mtime 0, no name, OS unknown).
std::string gzip_compress(std::string_view payload, int level = kGzipLevel);

/// Uncompressed size over gzip size. Throws on an empty payload.
double compression_ratio(std::string_view payload);

/// Compression ratio of the questions joined by newlines.
double word_cr(std::span<const std::string> questions);

/// Compression ratio of the full tag sequences, space-joined, one question per line.
double pos_cr(std::span<const std::string> questions, const Tagger& tagger);
double pos_cr_from_tags(std::span<const PosSequence> tags);

/// Mean pairwise cosine similarity of the question embeddings. Needs at
/// least two questions.
double homogenization(std::span<const std::string> questions, Embedder& embedder,
                      kernels::Execution ex = kernels::Execution::parallel);
double homogenization_of(std::span<const EmbeddingVector> vectors,
                         kernels::Execution ex = kernels::Execution::parallel);

struct TemplateCount {
    PosTemplate tmpl;
    std::size_t count = 0;
    std::vector<std::string> examples;  // up to three, in input order
};

struct TemplateStats {
    std::size_t n_questions = 0;
    std::size_t distinct = 0;
    std::vector<TemplateCount> ranked;  // count desc, then template asc
    double top1_frequency = 0.0;
    double top3_frequency = 0.0;        // cumulative
};

TemplateStats template_stats(std::span<const std::string> questions, const Tagger& tagger,
                             std::size_t keep_top = 10);
TemplateStats template_stats_from_tags(std::span<const std::string> questions,
                                       std::span<const PosSequence> tags, std::size_t keep_top = 10);

struct DiversityReport {
    std::size_t n_questions = 0;
    double ngd = 0.0;
    double srs = 0.0;
    double word_cr = 0.0;
    double pos_cr = 0.0;
    std::optional<double> embeddings_hs;
    std::size_t distinct_templates = 0;
    std::vector<TemplateCount> top_templates;
    double top1_frequency = 0.0;
    double top3_frequency = 0.0;
    std::string tagger;
    std::string embedder;  // empty when none
};

struct AnalysisOptions {
    const Tagger* tagger = nullptr;    // required
    Embedder* embedder = nullptr;      // optional
    std::size_t keep_top = 10;
    kernels::Execution execution = kernels::Execution::parallel;
};

/// Every metric over the question texts.
DiversityReport analyze(std::span<const std::string> questions, const AnalysisOptions& options);

/// Questions from a benchmark JSONL file (the "question" field) or from a
/// plain text file with one question per line.
std::vector<std::string> read_question_source(const std::filesystem::path& path);
std::vector<std::string> parse_question_source(std::string_view contents);

DiversityReport analyze_file(const std::filesystem::path& path, const AnalysisOptions& options);

nlohmann::ordered_json report_to_json(const DiversityReport& report);
/// Aligned table: one header row and one row for the report.
std::string report_to_text(const DiversityReport& report, std::string_view label = "benchmark");

} // namespace qabench
