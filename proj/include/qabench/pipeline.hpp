#pragma once

#include "qabench/config.hpp"
#include "qabench/corpus.hpp"
#include "qabench/prompt.hpp"
#include "qabench/providers.hpp"
#include "qabench/rng.hpp"
#include "qabench/sampler.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qabench {

struct CandidatePair {
    std::string question;
    std::string answer;
    std::string raw_line;
};

struct FilterVerdict {
    bool context_free = false;
    bool category_adherent = false;
    bool faithful = false;
    std::string judge_raw;

    bool passed() const noexcept { return context_free && category_adherent && faithful; }
};

struct JudgedCandidate {
    CandidatePair pair;
    FilterVerdict verdict;
};

struct RecordProvenance {
    std::string generator;
    std::string judge;
    std::string prompt_sha256;
    std::uint64_t record_seed = 0;
    int attempt = 0;        // 0-based index of the attempt that produced the record
    double temperature = kDefaultTemperature;
    int max_tokens = kDefaultMaxTokens;
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct BenchmarkRecord {
    std::string record_id;
    std::string question;
    std::string answer;
    std::string document_id;
    std::vector<std::pair<std::string, std::string>> user_categories;     // categorization -> category
    std::vector<std::pair<std::string, std::string>> question_categories;
    std::vector<JudgedCandidate> candidates;
    RecordProvenance provenance;
};

struct RecordFailure {
    std::size_t plan_index = 0;
    std::string document_id;
    int attempts = 0;
    std::string reason;
};

struct Benchmark {
    std::vector<BenchmarkRecord> records;
    std::vector<RecordFailure> failures;
    std::string config_digest;
    std::string corpus_digest;
};

class CandidateParseError : public Error {
public:
    CandidateParseError(const std::string& what, std::string raw) : Error(what), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

class JudgeError : public Error {
public:
    using Error::Error;
};

/// All attempts for a record were exhausted.
class RecordFailedError : public Error {
public:
    RecordFailedError(const std::string& what, int attempts) : Error(what), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

/// Failure share exceeded PipelineOptions::max_failure_ratio.
class RunAbortedError : public Error {
public:
    RunAbortedError(const std::string& what, std::vector<RecordFailure> failures)
        : Error(what), failures_(std::move(failures)) {}
    const std::vector<RecordFailure>& failures() const noexcept { return failures_; }

private:
    std::vector<RecordFailure> failures_;
};

struct Providers {
    ChatProvider& generator;
    ChatProvider& judge;
};

struct PipelineOptions {
    /// Extra attempts after a zero-pass (or unparsable) generation.
    int retries = 2;
    int workers = 4;
    double max_failure_ratio = 0.2;
    double temperature = kDefaultTemperature;
    int max_tokens = kDefaultMaxTokens;
    double judge_temperature = 0.0;
    std::string generator_model;
    std::string judge_model;
    const TextTemplate* generation_template = nullptr;  // nullptr: bundled template
    const TextTemplate* judge_template = nullptr;
    /// Called from worker threads after each plan entry completes.
    std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Candidates found line by line in raw model output. Lines that are (or
/// contain) a JSON object with non-empty string "question" and "answer" are
/// kept in order; everything else is ignored. At most k are returned.
/// Throws CandidateParseError when none is found.
std::vector<CandidatePair> parse_candidates(std::string_view raw, int k);

/// Parses a judge reply. The category field may be absent only when
/// `category_requested` is false, in which case it is vacuously true.
FilterVerdict parse_verdict(std::string_view raw, bool category_requested);

std::string render_judge_prompt(const CandidatePair& pair, const CategoryDraw& draw, const Document& doc,
                                const TextTemplate& tmpl = default_judge_template());

/// One judge call with the three checks. Throws JudgeError on an unusable reply.
FilterVerdict judge_candidate(const CandidatePair& pair, const CategoryDraw& draw, const Document& doc,
                              ChatProvider& judge, const PipelineOptions& options = {});

/// Attempt a of a record uses the sub-seed mix_seed(record_seed, a) both as
/// the request seed and to pick uniformly among passing candidates.
BenchmarkRecord generate_record(const CategoryDraw& draw, const Document& doc, const GenerationConfig& cfg,
                                const Providers& providers, std::uint64_t record_seed,
                                const PipelineOptions& options = {});

/// Runs one generate_record per plan entry.
///
/// Before any work starts, `rng` is consumed in plan order: for each entry
/// the category draw, then one 64-bit record seed. Records come back in plan
/// order whatever the completion order. Throws RunAbortedError when the
/// failure share exceeds options.max_failure_ratio.
Benchmark run_generation(const GenerationConfig& cfg, const Corpus& corpus, std::span<const std::string> plan,
                         const Providers& providers, Rng& rng, const PipelineOptions& options = {});

std::string record_id_for(std::size_t plan_index);
std::string config_digest(const GenerationConfig& cfg);

/// One compact JSON object, no trailing newline.
std::string record_to_json(const BenchmarkRecord& record);
void write_benchmark_jsonl(const Benchmark& benchmark, std::ostream& out);

} // namespace qabench
