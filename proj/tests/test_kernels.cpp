#include "qabench/kernels.hpp"

#include "oracles.hpp"
#include "qabench/rng.hpp"

#include <omp.h>

#include <gtest/gtest.h>

using namespace qabench;
using namespace qabench::kernels;

namespace {

std::vector<std::vector<std::string>> random_questions(Rng& rng, std::size_t n, std::size_t max_len,
                                                       std::size_t vocab)
{
    std::vector<std::vector<std::string>> out(n);
    for (auto& q : out) {
        const auto len = rng.below(max_len + 1);
        for (std::uint64_t i = 0; i < len; ++i)
            q.push_back("w" + std::to_string(rng.below(vocab)));
    }
    return out;
}

} // namespace

TEST(Intern, DenseIds)
{
    const std::vector<std::vector<std::string>> q = {{"a", "b"}, {"b", "c", "a"}};
    const auto in = intern(q);
    EXPECT_EQ(in.vocabulary_size, 3u);
    EXPECT_EQ(in.ids[0][1], in.ids[1][0]);
    EXPECT_NE(in.ids[0][0], in.ids[0][1]);
}

TEST(Kernels, SerialParallelAndOracleAgree)
{
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const auto qs = random_questions(rng, 1 + rng.below(50), 12, 2 + rng.below(20));
        const auto in = intern(qs);
        const auto s = ngram_counts_serial(in);
        const auto p = ngram_counts_parallel(in);
        EXPECT_EQ(s.unique, p.unique);
        EXPECT_EQ(s.total, p.total);
        EXPECT_NEAR(ngram_diversity(s), oracle::ngd(qs), 1e-9);
        for (std::size_t n = 1; n <= 4; ++n)
            EXPECT_EQ(repeating_questions_serial(in, n), repeating_questions_parallel(in, n));
        const double srs = qs.size() < 2 ? 0.0
                                         : static_cast<double>(repeating_questions_serial(in, 4)) /
                                               static_cast<double>(qs.size());
        EXPECT_NEAR(srs, oracle::srs(qs), 1e-9);
    }
}

TEST(Kernels, ParallelIndependentOfThreadCount)
{
    Rng rng(5);
    const auto qs = random_questions(rng, 3000, 12, 40);
    const auto in = intern(qs);
    std::vector<double> rows;
    const std::size_t dim = 16;
    for (std::size_t i = 0; i < 1500 * dim; ++i)
        rows.push_back(rng.uniform01() - 0.3);

    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto c1 = ngram_counts_parallel(in);
    const auto r1 = repeating_questions_parallel(in, 4);
    const double h1 = homogenization_parallel(rows, dim);
    omp_set_num_threads(4);
    const auto c4 = ngram_counts_parallel(in);
    const auto r4 = repeating_questions_parallel(in, 4);
    const double h4 = homogenization_parallel(rows, dim);
    omp_set_num_threads(saved);
    EXPECT_EQ(c1.unique, c4.unique);
    EXPECT_EQ(r1, r4);
    EXPECT_EQ(h1, h4);  // bitwise: fixed block order
    EXPECT_EQ(h1, homogenization_serial(rows, dim));
}

TEST(Homogenization, MatchesPairLoop)
{
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(199), dim = 1 + rng.below(24);
        std::vector<double> rows;
        std::vector<std::vector<double>> vecs(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < dim; ++d) {
                double x = rng.uniform01() * 2 - 1;
                if (d == 0)
                    x += 0.01;  // never a zero row
                rows.push_back(x);
                vecs[i].push_back(x);
            }
        EXPECT_NEAR(homogenization_serial(rows, dim), oracle::mean_pairwise_cosine(vecs), 1e-9);
        EXPECT_NEAR(homogenization_parallel(rows, dim), oracle::mean_pairwise_cosine(vecs), 1e-9);
    }
}

TEST(Homogenization, FixedPoints)
{
    const std::vector<double> three = {1, 0, 0, 1, 1, 0};
    EXPECT_NEAR(homogenization_serial(three, 2), 1.0 / 3.0, 1e-12);
    const std::vector<double> orth = {1, 0, 0, 1};
    EXPECT_NEAR(homogenization_serial(orth, 2), 0.0, 1e-12);
    const std::vector<double> same = {3, 4, 0.6, 0.8, 6, 8};
    EXPECT_NEAR(homogenization_serial(same, 2), 1.0, 1e-12);
}

TEST(Homogenization, RejectsDegenerateInput)
{
    EXPECT_ANY_THROW(homogenization_serial(std::vector<double>{1, 0}, 2));
    EXPECT_ANY_THROW(homogenization_serial(std::vector<double>{1, 0, 0, 0}, 2));
    EXPECT_ANY_THROW(homogenization_serial(std::vector<double>{1, 0, 0}, 2));
}

TEST(NgramDiversity, ZeroTotalsContributeNothing)
{
    NgramCounts c;
    c.unique = {3, 2, 0, 0};
    c.total = {6, 4, 0, 0};
    EXPECT_DOUBLE_EQ(ngram_diversity(c), 1.0);
}
