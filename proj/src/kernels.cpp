#include "qabench/kernels.hpp"

#include "qabench/error.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

namespace qabench::kernels {

namespace {

// An n-gram of up to four ids, zero-padded. Ids start at 1 so padding never
// collides with a real token.
struct Gram {
    std::array<std::uint32_t, kMaxNgramOrder> ids{};
    bool operator==(const Gram&) const = default;
};

struct GramHash {
    std::size_t operator()(const Gram& g) const noexcept
    {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL;
        for (auto id : g.ids) {
            h ^= id + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            h *= 0xff51afd7ed558ccdULL;
        }
        return static_cast<std::size_t>(h ^ (h >> 33));
    }
};

Gram gram_at(const std::vector<std::uint32_t>& q, std::size_t start, std::size_t n)
{
    Gram g;
    for (std::size_t i = 0; i < n; ++i)
        g.ids[i] = q[start + i];
    return g;
}

std::size_t windows(std::size_t len, std::size_t n)
{
    return len >= n ? len - n + 1 : 0;
}

constexpr std::size_t kShards = 16;
constexpr std::size_t kBlockRows = 256;

void check_order(std::size_t n)
{
    if (n == 0 || n > kMaxNgramOrder)
        throw Error(fmt::format("n-gram order must be between 1 and {}, got {}", kMaxNgramOrder, n));
}

std::vector<Gram> distinct_grams(const std::vector<std::uint32_t>& q, std::size_t n)
{
    std::vector<Gram> grams;
    grams.reserve(windows(q.size(), n));
    for (std::size_t i = 0; i < windows(q.size(), n); ++i)
        grams.push_back(gram_at(q, i, n));
    std::sort(grams.begin(), grams.end(), [](const Gram& a, const Gram& b) { return a.ids < b.ids; });
    grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    return grams;
}

// Normalizes rows into a copy; zero rows are rejected.
std::vector<double> normalized(std::span<const double> rows, std::size_t dim)
{
    if (dim == 0 || rows.size() % dim != 0)
        throw Error(fmt::format("embedding matrix of {} values is not a multiple of dimension {}", rows.size(), dim));
    const std::size_t n = rows.size() / dim;
    if (n < 2)
        throw Error("homogenization needs at least two vectors");
    std::vector<double> out(rows.begin(), rows.end());
    for (std::size_t r = 0; r < n; ++r) {
        double norm = 0.0;
        for (std::size_t c = 0; c < dim; ++c)
            norm += out[r * dim + c] * out[r * dim + c];
        if (!(norm > 0.0) || !std::isfinite(norm))
            throw Error(fmt::format("embedding {} has zero or non-finite norm", r));
        norm = std::sqrt(norm);
        for (std::size_t c = 0; c < dim; ++c)
            out[r * dim + c] /= norm;
    }
    return out;
}

struct BlockSum {
    std::vector<double> sum;
    double sq = 0.0;
};

BlockSum block_sum(const std::vector<double>& unit, std::size_t dim, std::size_t block)
{
    const std::size_t n = unit.size() / dim;
    BlockSum b{std::vector<double>(dim, 0.0), 0.0};
    const std::size_t end = std::min(n, (block + 1) * kBlockRows);
    for (std::size_t r = block * kBlockRows; r < end; ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            const double v = unit[r * dim + c];
            b.sum[c] += v;
            b.sq += v * v;
        }
    }
    return b;
}

double combine(const std::vector<BlockSum>& blocks, std::size_t dim, std::size_t n)
{
    std::vector<double> total(dim, 0.0);
    double sq = 0.0;
    for (const auto& b : blocks) {
        for (std::size_t c = 0; c < dim; ++c)
            total[c] += b.sum[c];
        sq += b.sq;
    }
    double dot = 0.0;
    for (double v : total)
        dot += v * v;
    const double nn = static_cast<double>(n);
    return (dot - sq) / (nn * (nn - 1.0));
}

} // namespace

InternedQuestions intern(std::span<const std::vector<std::string>> token_lists)
{
    InternedQuestions out;
    std::unordered_map<std::string, std::uint32_t> ids;
    out.ids.reserve(token_lists.size());
    for (const auto& tokens : token_lists) {
        std::vector<std::uint32_t> row;
        row.reserve(tokens.size());
        for (const auto& t : tokens) {
            auto [it, fresh] = ids.try_emplace(t, static_cast<std::uint32_t>(ids.size() + 1));
            row.push_back(it->second);
        }
        out.ids.push_back(std::move(row));
    }
    out.vocabulary_size = ids.size();
    return out;
}

NgramCounts ngram_counts_serial(const InternedQuestions& q)
{
    NgramCounts c;
    for (std::size_t n = 1; n <= kMaxNgramOrder; ++n) {
        std::unordered_set<Gram, GramHash> seen;
        for (const auto& row : q.ids) {
            for (std::size_t i = 0; i < windows(row.size(), n); ++i) {
                seen.insert(gram_at(row, i, n));
                ++c.total[n - 1];
            }
        }
        c.unique[n - 1] = seen.size();
    }
    return c;
}

NgramCounts ngram_counts_parallel(const InternedQuestions& q)
{
    NgramCounts c;
    const long rows = static_cast<long>(q.ids.size());
    std::vector<std::size_t> offset(q.ids.size() + 1);
    std::vector<Gram> grams;
    std::vector<std::uint64_t> hashes;
    for (std::size_t n = 1; n <= kMaxNgramOrder; ++n) {
        for (std::size_t r = 0; r < q.ids.size(); ++r)
            offset[r + 1] = offset[r] + windows(q.ids[r].size(), n);
        const std::size_t total = offset.back();
        c.total[n - 1] = total;
        grams.resize(total);
        hashes.resize(total);

        // hash every window once, then let each shard pick its own
#pragma omp parallel for schedule(static)
        for (long r = 0; r < rows; ++r) {
            const auto& row = q.ids[static_cast<std::size_t>(r)];
            GramHash hash;
            std::size_t at = offset[static_cast<std::size_t>(r)];
            for (std::size_t i = 0; i < windows(row.size(), n); ++i, ++at) {
                grams[at] = gram_at(row, i, n);
                hashes[at] = hash(grams[at]);
            }
        }

        std::array<std::size_t, kShards> unique{};
#pragma omp parallel for schedule(dynamic)
        for (long shard = 0; shard < static_cast<long>(kShards); ++shard) {
            std::unordered_set<Gram, GramHash> seen;
            seen.reserve(total / kShards + 1);
            for (std::size_t i = 0; i < total; ++i)
                if (hashes[i] % kShards == static_cast<std::size_t>(shard))
                    seen.insert(grams[i]);
            unique[static_cast<std::size_t>(shard)] = seen.size();
        }
        for (auto u : unique)
            c.unique[n - 1] += u;
    }
    return c;
}

double ngram_diversity(const NgramCounts& counts) noexcept
{
    double sum = 0.0;
    for (std::size_t i = 0; i < kMaxNgramOrder; ++i)
        if (counts.total[i] > 0)
            sum += static_cast<double>(counts.unique[i]) / static_cast<double>(counts.total[i]);
    return sum;
}

std::size_t repeating_questions_serial(const InternedQuestions& q, std::size_t n)
{
    check_order(n);
    // Number of distinct questions each n-gram occurs in.
    std::unordered_map<Gram, std::size_t, GramHash> owners;
    std::vector<std::vector<Gram>> per_question;
    per_question.reserve(q.ids.size());
    for (const auto& row : q.ids) {
        per_question.push_back(distinct_grams(row, n));
        for (const auto& g : per_question.back())
            ++owners[g];
    }
    std::size_t repeating = 0;
    for (const auto& grams : per_question)
        repeating += std::any_of(grams.begin(), grams.end(), [&](const Gram& g) { return owners[g] > 1; });
    return repeating;
}

std::size_t repeating_questions_parallel(const InternedQuestions& q, std::size_t n)
{
    check_order(n);
    const long nq = static_cast<long>(q.ids.size());
    std::vector<std::vector<Gram>> per_question(q.ids.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (long i = 0; i < nq; ++i)
        per_question[static_cast<std::size_t>(i)] = distinct_grams(q.ids[static_cast<std::size_t>(i)], n);

    std::array<std::unordered_map<Gram, std::size_t, GramHash>, kShards> owners;
    GramHash hash;
#pragma omp parallel for schedule(dynamic)
    for (long s = 0; s < static_cast<long>(kShards); ++s) {
        auto& shard = owners[static_cast<std::size_t>(s)];
        for (const auto& grams : per_question)
            for (const auto& g : grams)
                if (hash(g) % kShards == static_cast<std::size_t>(s))
                    ++shard[g];
    }

    std::size_t repeating = 0;
#pragma omp parallel for reduction(+ : repeating) schedule(dynamic, 64)
    for (long i = 0; i < nq; ++i) {
        for (const auto& g : per_question[static_cast<std::size_t>(i)]) {
            const auto& shard = owners[hash(g) % kShards];
            if (shard.at(g) > 1) {
                ++repeating;
                break;
            }
        }
    }
    return repeating;
}

double homogenization_serial(std::span<const double> rows, std::size_t dim)
{
    const auto unit = normalized(rows, dim);
    const std::size_t n = unit.size() / dim;
    const std::size_t blocks = (n + kBlockRows - 1) / kBlockRows;
    std::vector<BlockSum> sums;
    sums.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b)
        sums.push_back(block_sum(unit, dim, b));
    return combine(sums, dim, n);
}

double homogenization_parallel(std::span<const double> rows, std::size_t dim)
{
    const auto unit = normalized(rows, dim);
    const std::size_t n = unit.size() / dim;
    const long blocks = static_cast<long>((n + kBlockRows - 1) / kBlockRows);
    std::vector<BlockSum> sums(static_cast<std::size_t>(blocks));
#pragma omp parallel for schedule(static)
    for (long b = 0; b < blocks; ++b)
        sums[static_cast<std::size_t>(b)] = block_sum(unit, dim, static_cast<std::size_t>(b));
    return combine(sums, dim, n);
}

NgramCounts ngram_counts(const InternedQuestions& q, Execution ex)
{
    return ex == Execution::serial ? ngram_counts_serial(q) : ngram_counts_parallel(q);
}

std::size_t repeating_questions(const InternedQuestions& q, std::size_t n, Execution ex)
{
    return ex == Execution::serial ? repeating_questions_serial(q, n) : repeating_questions_parallel(q, n);
}

double homogenization(std::span<const double> rows, std::size_t dim, Execution ex)
{
    return ex == Execution::serial ? homogenization_serial(rows, dim) : homogenization_parallel(rows, dim);
}

} // namespace qabench::kernels
