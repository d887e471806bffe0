#pragma once

#include "qabench/error.hpp"
#include "qabench/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qabench {

struct Document {
    std::string id;
    std::string text;
    std::map<std::string, std::string> metadata;
    bool truncated = false;
};

struct Corpus {
    std::vector<Document> documents;

    std::size_t size() const noexcept { return documents.size(); }
    /// nullptr when absent. Linear in corpus size until build_index() is called.
    const Document* find(std::string_view id) const;
    void build_index();

private:
    std::map<std::string, std::size_t, std::less<>> index_;
};

enum class CorpusFormat { jsonl, plain_dir };

struct CorpusOptions {
    /// Documents longer than this many code points are cut at the last
    /// whitespace before the budget.
    std::size_t char_budget = 24000;
};

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const CorpusOptions& options = {});
Corpus parse_corpus_jsonl(std::string_view contents, const CorpusOptions& options = {});

/// Returns text cut to at most `budget` code points, breaking at the last
/// whitespace before the budget (or hard at the budget when there is none).
std::string truncate_to_budget(std::string_view text, std::size_t budget, bool& truncated);

/// SHA-256 over (id, text) pairs in corpus order.
std::string corpus_digest(const Corpus& corpus);

struct UniformSampling {
    std::size_t total = 0;
};

struct PerDocumentSampling {
    std::map<std::string, std::size_t> counts;
};

using SamplingMode = std::variant<UniformSampling, PerDocumentSampling>;

/// Ordered document ids to generate from.
///
/// Uniform: `total` ids drawn with replacement. Per-document: each id
/// repeated counts[id] times (in corpus order), then shuffled.
/// Consumes `rng`; the overload taking a seed uses a fresh stream.
std::vector<std::string> make_sampling_plan(const Corpus& corpus, const SamplingMode& mode, Rng& rng);
std::vector<std::string> make_sampling_plan(const Corpus& corpus, const SamplingMode& mode,
                                            std::uint64_t seed);

} // namespace qabench
