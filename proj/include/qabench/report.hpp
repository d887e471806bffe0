#pragma once

#include "qabench/corpus.hpp"
#include "qabench/diversity.hpp"
#include "qabench/pipeline.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace qabench {

enum class Metric { ngd, srs, word_cr, pos_cr, embeddings_hs };
inline constexpr std::array<Metric, 5> kComparedMetrics = {Metric::ngd, Metric::srs, Metric::word_cr,
                                                           Metric::pos_cr, Metric::embeddings_hs};

std::string_view metric_name(Metric m);
/// NGD is the only metric where higher means more diverse.
bool higher_is_better(Metric m) noexcept;
std::optional<double> metric_value(const DiversityReport& r, Metric m);

struct ComparisonRow {
    std::string label;
    DiversityReport report;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;
    /// Per metric (kComparedMetrics order), index of the best row. Ties go to
    /// the earlier row; empty when no row has the metric.
    std::array<std::optional<std::size_t>, kComparedMetrics.size()> best;
};

ComparisonTable build_comparison(std::vector<ComparisonRow> rows);

struct QuestionSource {
    std::string label;
    std::vector<std::string> questions;
};

/// Analyzes each source and marks the best row per metric. Needs ≥ 2 inputs.
ComparisonTable compare(std::span<const QuestionSource> inputs, const AnalysisOptions& options);

nlohmann::ordered_json comparison_to_json(const ComparisonTable& table);
/// Aligned text table; best cells carry a trailing '*'.
std::string comparison_to_text(const ComparisonTable& table);

enum class SweepAxis { questions_per_document, num_documents };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view name);

struct SweepVariant {
    std::string label;
    GenerationConfig config;
    Providers providers;
};

struct SweepPoint {
    std::size_t x = 0;
    std::vector<std::pair<std::string, DiversityReport>> reports;
    std::vector<std::pair<std::string, std::string>> errors;  // label -> message
};

struct SweepResult {
    SweepAxis axis = SweepAxis::questions_per_document;
    std::vector<SweepPoint> points;
};

struct SweepOptions {
    std::size_t total = 500;  // num_documents axis only
    std::uint64_t seed = 0;
    PipelineOptions pipeline;
};

/// Splits `total` over `ids` as evenly as possible; the remainder goes one
/// each to the earliest documents (largest remainder with ties in order).
std::vector<std::pair<std::string, std::size_t>> apportion(std::span<const std::string> ids, std::size_t total);

/// Document order used by the num_documents axis: the corpus shuffled once
/// by a seed derived from the sweep seed. Point x uses its first x entries.
std::vector<std::string> sweep_document_order(const Corpus& corpus, std::uint64_t seed);

PerDocumentSampling sweep_sampling(SweepAxis axis, const Corpus& corpus, std::size_t x, std::size_t total,
                                   std::uint64_t seed);

/// Seed of the standalone run equivalent to (variant, x).
std::uint64_t sweep_point_seed(std::uint64_t seed, std::size_t variant_index, std::size_t x);

/// For each x (strictly increasing) and each variant: plan and generation
/// from Rng(sweep_point_seed(...)), then analysis. A failing point is
/// recorded in SweepPoint::errors and the sweep continues.
SweepResult run_sweep(SweepAxis axis, std::span<const SweepVariant> variants, const Corpus& corpus,
                      std::span<const std::size_t> xs, const SweepOptions& options,
                      const AnalysisOptions& analysis);

/// Long-format CSV: x,label,metric,value.
std::string sweep_to_csv(const SweepResult& result);

} // namespace qabench
