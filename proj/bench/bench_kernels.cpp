// Serial reference vs OpenMP kernels on synthetic question sets. Each
// parallel benchmark first checks that it agrees with the serial result.

#include "qabench/kernels.hpp"
#include "qabench/rng.hpp"
#include "qabench/tagger.hpp"

#include <cstdlib>
#include <iostream>

#include <benchmark/benchmark.h>

using namespace qabench;
using namespace qabench::kernels;

namespace {

std::vector<std::vector<std::string>> synthetic_questions(std::size_t n)
{
    Rng rng(n);
    std::vector<std::vector<std::string>> q(n);
    for (auto& words : q) {
        const auto len = 4 + rng.below(12);
        for (std::uint64_t i = 0; i < len; ++i)
            words.push_back("w" + std::to_string(rng.below(800)));
    }
    return q;
}

std::vector<double> synthetic_rows(std::size_t n, std::size_t dim)
{
    Rng rng(n * 31 + dim);
    std::vector<double> rows(n * dim);
    for (auto& x : rows)
        x = rng.uniform01() - 0.4;
    return rows;
}

void require(bool ok, const char* what)
{
    if (!ok) {
        std::cerr << "serial/parallel mismatch: " << what << '\n';
        std::abort();
    }
}

void BM_NgramCounts(benchmark::State& state, Execution ex)
{
    const auto in = intern(synthetic_questions(static_cast<std::size_t>(state.range(0))));
    require(ngram_counts_serial(in).unique == ngram_counts_parallel(in).unique, "ngram counts");
    for (auto _ : state)
        benchmark::DoNotOptimize(ngram_counts(in, ex));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RepeatingQuestions(benchmark::State& state, Execution ex)
{
    const auto in = intern(synthetic_questions(static_cast<std::size_t>(state.range(0))));
    require(repeating_questions_serial(in, 4) == repeating_questions_parallel(in, 4), "repeating questions");
    for (auto _ : state)
        benchmark::DoNotOptimize(repeating_questions(in, 4, ex));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Homogenization(benchmark::State& state, Execution ex)
{
    const std::size_t dim = 384;
    const auto rows = synthetic_rows(static_cast<std::size_t>(state.range(0)), dim);
    require(homogenization_serial(rows, dim) == homogenization_parallel(rows, dim), "homogenization");
    for (auto _ : state)
        benchmark::DoNotOptimize(homogenization(rows, dim, ex));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Tagging(benchmark::State& state, Execution ex)
{
    static const PerceptronTagger tagger = PerceptronTagger::builtin();
    std::vector<TokenSequence> batch;
    for (const auto& words : synthetic_questions(static_cast<std::size_t>(state.range(0)))) {
        std::string s;
        for (const auto& w : words)
            s += w + ' ';
        batch.push_back(tokenize(s + "?"));
    }
    require(tagger.tag_batch(batch) == tagger.tag_batch_serial(batch), "tagging");
    for (auto _ : state) {
        if (ex == Execution::serial)
            benchmark::DoNotOptimize(tagger.tag_batch_serial(batch));
        else
            benchmark::DoNotOptimize(tagger.tag_batch(batch));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

} // namespace

BENCHMARK_CAPTURE(BM_NgramCounts, serial, Execution::serial)->Arg(2000)->Arg(20000);
BENCHMARK_CAPTURE(BM_NgramCounts, parallel, Execution::parallel)->Arg(2000)->Arg(20000);
BENCHMARK_CAPTURE(BM_RepeatingQuestions, serial, Execution::serial)->Arg(2000)->Arg(20000);
BENCHMARK_CAPTURE(BM_RepeatingQuestions, parallel, Execution::parallel)->Arg(2000)->Arg(20000);
BENCHMARK_CAPTURE(BM_Homogenization, serial, Execution::serial)->Arg(2000)->Arg(20000);
BENCHMARK_CAPTURE(BM_Homogenization, parallel, Execution::parallel)->Arg(2000)->Arg(20000);
BENCHMARK_CAPTURE(BM_Tagging, serial, Execution::serial)->Arg(2000);
BENCHMARK_CAPTURE(BM_Tagging, parallel, Execution::parallel)->Arg(2000);

BENCHMARK_MAIN();
