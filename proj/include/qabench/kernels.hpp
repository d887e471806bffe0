#pragma once

// Data-parallel metric kernels. Every kernel has a serial reference and an
// OpenMP version producing the same result; tests compare the two and the
// bench target times them.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qabench::kernels {

enum class Execution { serial, parallel };

inline constexpr std::size_t kMaxNgramOrder = 4;

/// Questions with tokens replaced by dense ids.
struct InternedQuestions {
    std::vector<std::vector<std::uint32_t>> ids;
    std::size_t vocabulary_size = 0;
};

InternedQuestions intern(std::span<const std::vector<std::string>> token_lists);

struct NgramCounts {
    std::array<std::size_t, kMaxNgramOrder> unique{};
    std::array<std::size_t, kMaxNgramOrder> total{};
};

NgramCounts ngram_counts_serial(const InternedQuestions& q);
NgramCounts ngram_counts_parallel(const InternedQuestions& q);

/// Sum over orders of unique/total, orders with no n-grams contributing 0.
double ngram_diversity(const NgramCounts& counts) noexcept;

/// Number of questions sharing at least one n-gram with a different question.
std::size_t repeating_questions_serial(const InternedQuestions& q, std::size_t n);
std::size_t repeating_questions_parallel(const InternedQuestions& q, std::size_t n);

/// Mean cosine similarity over ordered pairs of distinct indices, via
/// (|sum e|^2 - sum |e|^2) / (N (N-1)) on L2-normalized rows. `rows` is
/// N x dim, row-major. Block partial sums are combined in a fixed order so
/// the parallel result does not depend on thread count.
double homogenization_serial(std::span<const double> rows, std::size_t dim);
double homogenization_parallel(std::span<const double> rows, std::size_t dim);

NgramCounts ngram_counts(const InternedQuestions& q, Execution ex);
std::size_t repeating_questions(const InternedQuestions& q, std::size_t n, Execution ex);
double homogenization(std::span<const double> rows, std::size_t dim, Execution ex);

} // namespace qabench::kernels
