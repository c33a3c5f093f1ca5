#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "carclust/carclust.hpp"
#include "oracles.hpp"

using namespace carclust;

namespace {

FitConfig config(Index G, Index P = 1, Index restarts = 5, std::uint64_t seed = 0) {
    FitConfig c;
    c.n_clusters = G;
    c.lag_order = P;
    c.n_restarts = restarts;
    c.seed = seed;
    return c;
}

double pooled_ari(const PartitionSequence& a, const PartitionSequence& b, Index first) {
    return adjusted_rand_index(pooled_labels(a, first), pooled_labels(b, first));
}

}

TEST(Estimator, RecoversNoiselessSeparatedClusters) {
    auto gen = generate_panel(separated_spec(30, 2, 6, 3, 10.0, 0.0, 0.0, 4));
    const auto res = fit_multistart(gen.panel, config(3, 1, 4));
    EXPECT_NEAR(res.objective, 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(pooled_ari(res.partition, gen.partition, 0), 1.0);
}

TEST(Estimator, ExactAtTruthWithZeroNoise) {
    for (Index P : {1, 2}) {
        auto gen = generate_panel(separated_spec(12, 2, 6, 3, 5.0, 0.0, 0.3, 9, P));
        const auto res = fit_from(gen.panel, config(3, P, 1), gen.partition);
        EXPECT_NEAR(res.objective, 0.0, 1e-12) << "P=" << P;
        EXPECT_DOUBLE_EQ(pooled_ari(res.partition, gen.partition, P), 1.0);
    }
}

TEST(Estimator, ObjectiveTraceIsMonotone) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto panel = oracle::random_panel(20, 2, 6, seed);
        auto c = config(3, 1 + static_cast<Index>(seed % 2), 1, seed);
        const auto res = fit(panel, c);
        for (std::size_t k = 1; k < res.objective_trace.size(); ++k) {
            EXPECT_LE(res.objective_trace[k], res.objective_trace[k - 1] * (1 + 1e-9) + 1e-12) << "seed " << seed << " k " << k;
        }
        EXPECT_NEAR(res.objective, res.objective_trace.back(), 1e-9 * std::max(1.0, res.objective));
    }
}

TEST(Estimator, ReportedObjectiveMatchesOracle) {
    auto panel = oracle::random_panel(15, 3, 5, 3);
    for (Index P : {1, 2}) {
        const auto res = fit_multistart(panel, config(3, P, 3));
        EXPECT_NEAR(res.objective, oracle::objective(panel, res.partition, res.model_centroids, res.coefficients),
                    1e-9 * res.objective);
        EXPECT_EQ(res.model_centroids.times(), 4);
        EXPECT_EQ(res.empirical_centroids.times(), 5);
        EXPECT_EQ(res.static_slices, P);
    }
}

TEST(Estimator, FittedPartitionIsArgminOfFittedModel) {
    auto panel = oracle::random_panel(25, 2, 6, 17);
    const auto res = fit_multistart(panel, config(3, 1, 4));
    ASSERT_TRUE(res.converged);
    const auto next = update_partition(panel, res.model_centroids, res.coefficients);
    EXPECT_LE(objective(panel, next, res.model_centroids, res.coefficients), res.objective * (1 + 1e-12));
}

TEST(Estimator, ReachesEnumeratedGlobalMinimum) {
    int hits = 0;
    const int instances = 10;
    for (int k = 0; k < instances; ++k) {
        auto panel = oracle::random_panel(4, 1, 3, 900 + static_cast<std::uint64_t>(k));
        const double best = oracle::enumerate_global_minimum(panel, 2);
        const auto res = fit_multistart(panel, config(2, 1, 20, static_cast<std::uint64_t>(k)));
        EXPECT_GE(res.objective, best - 1e-9);
        hits += res.objective <= best + 1e-6 ? 1 : 0;
    }
    EXPECT_GE(hits, 9);
}

TEST(Estimator, SingleClusterGivesPooledWithinScatter) {
    auto panel = oracle::random_panel(9, 2, 5, 8);
    const auto res = fit(panel, config(1, 1, 1));
    double expected = 0;
    for (Index t = 1; t < 5; ++t) {
        expected += oracle::slice_wcss(panel.slice(t), std::vector<Index>(9, 0), 1);
    }
    EXPECT_NEAR(res.objective, expected, 1e-9 * expected);
    for (Index t = 0; t < 5; ++t)
        for (Index i = 0; i < 9; ++i) EXPECT_EQ(res.partition.label(i, t), 0);
}

TEST(Estimator, OneRestartMatchesFit) {
    auto panel = oracle::random_panel(18, 2, 5, 5);
    auto c = config(3, 1, 1, 42);
    const auto a = fit(panel, c);
    const auto b = fit_multistart(panel, c);
    EXPECT_EQ(a.partition, b.partition);
    EXPECT_EQ(a.objective, b.objective);
}

TEST(Estimator, DeterministicForFixedSeed) {
    auto panel = oracle::random_panel(30, 3, 6, 6);
    auto c = config(4, 2, 6, 123);
    const auto a = fit_multistart(panel, c);
    const auto b = fit_multistart(panel, c);
    EXPECT_EQ(a.partition, b.partition);
    EXPECT_EQ(a.objective, b.objective);
    EXPECT_EQ(a.restart_index, b.restart_index);
    EXPECT_EQ(a.coefficients.stacked(), b.coefficients.stacked());
}

TEST(Estimator, IndependentOfThreadCount) {
    auto panel = oracle::random_panel(30, 2, 6, 66);
    auto c = config(3, 1, 7, 9);
    c.threads = 1;
    const auto a = fit_multistart(panel, c);
    c.threads = 4;
    const auto b = fit_multistart(panel, c);
    EXPECT_EQ(a.partition, b.partition);
    EXPECT_EQ(a.objective, b.objective);
    EXPECT_EQ(a.restart_index, b.restart_index);
}

TEST(Estimator, InvariantToInitialLabelPermutation) {
    auto panel = oracle::random_panel(20, 2, 5, 31);
    auto init = oracle::random_full_partition(20, 5, 3, 32);
    std::vector<std::vector<Index>> swapped;
    const std::vector<Index> perm{2, 0, 1};
    for (Index t = 0; t < 5; ++t) {
        std::vector<Index> s;
        for (auto l : init.slice(t)) s.push_back(perm[static_cast<std::size_t>(l)]);
        swapped.push_back(s);
    }
    const auto a = fit_from(panel, config(3, 1, 1), init);
    const auto b = fit_from(panel, config(3, 1, 1), PartitionSequence(3, swapped));
    EXPECT_NEAR(a.objective, b.objective, 1e-9 * a.objective);
    EXPECT_NEAR(pooled_ari(a.partition, b.partition, 0), 1.0, 1e-12);
}

TEST(Estimator, InvariantToUnitOrder) {
    auto panel = oracle::random_panel(16, 2, 5, 41);
    auto init = oracle::random_full_partition(16, 5, 3, 42);
    std::vector<Index> order(16);
    std::iota(order.begin(), order.end(), 0);
    std::reverse(order.begin(), order.end());

    std::vector<Matrix> slices;
    std::vector<std::vector<Index>> labels;
    for (Index t = 0; t < 5; ++t) {
        Matrix x(16, 2);
        std::vector<Index> l(16);
        for (Index k = 0; k < 16; ++k) {
            x.row(k) = panel.slice(t).row(order[static_cast<std::size_t>(k)]);
            l[static_cast<std::size_t>(k)] = init.label(order[static_cast<std::size_t>(k)], t);
        }
        slices.push_back(x);
        labels.push_back(l);
    }
    const auto shuffled = LongitudinalPanel::from_slices(slices);
    const auto a = fit_from(panel, config(3, 1, 1), init);
    const auto b = fit_from(shuffled, config(3, 1, 1), PartitionSequence(3, labels));
    EXPECT_NEAR(a.objective, b.objective, 1e-9 * a.objective);
    for (Index t = 0; t < 5; ++t)
        for (Index k = 0; k < 16; ++k) EXPECT_EQ(b.partition.label(k, t), a.partition.label(order[static_cast<std::size_t>(k)], t));
}

TEST(Estimator, AlignedLabelsFollowClustersOverTime) {
    // With switching off, the fitted labels at every time must agree with the first slice.
    auto gen = generate_panel(separated_spec(24, 2, 6, 3, 15.0, 0.5, 0.0, 12));
    const auto res = fit_multistart(gen.panel, config(3, 1, 6));
    for (Index t = 1; t < 6; ++t)
        for (Index i = 0; i < 24; ++i) EXPECT_EQ(res.partition.label(i, t), res.partition.label(i, 1));
}

TEST(Estimator, NoEmptyClusterInResult) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto panel = oracle::random_panel(8, 1, 5, seed);
        const auto res = fit_multistart(panel, config(4, 1, 3, seed));
        for (Index t = 1; t < 5; ++t)
            for (Index g = 0; g < 4; ++g) EXPECT_GT(res.partition.count(g, t), 0);
    }
}

TEST(Estimator, ReseedNeverRaisesSliceLoss) {
    Matrix x(4, 1);
    x << 0, 1, 2, 10;
    Matrix centers(2, 1);
    centers << 1, 100;
    std::vector<Index> labels{0, 0, 0, 0};
    EXPECT_EQ(reseed_empty_clusters(labels, x, centers, 2), 1);
    EXPECT_EQ(labels[3], 1);
}

TEST(Estimator, ConfigErrors) {
    auto panel = oracle::random_panel(5, 2, 4, 1);
    EXPECT_THROW(fit(panel, config(0)), InvalidConfig);
    EXPECT_THROW(fit(panel, config(6)), InvalidConfig);
    EXPECT_THROW(fit(panel, config(2, 0)), InvalidConfig);
    EXPECT_THROW(fit(panel, config(2, 3)), InvalidConfig);
    auto c = config(2);
    c.n_restarts = 0;
    EXPECT_THROW(fit_multistart(panel, c), InvalidConfig);
    c = config(2);
    c.rel_tol = 0;
    EXPECT_THROW(fit(panel, c), InvalidConfig);
    c = config(2);
    c.max_iters = 0;
    EXPECT_THROW(fit(panel, c), InvalidConfig);
    EXPECT_THROW(fit_from(panel, config(2), PartitionSequence::constant(3, 5, 4)), InvalidConfig);
}

TEST(Estimator, InitStrategiesProduceValidPartitions) {
    auto panel = oracle::random_panel(12, 2, 4, 3);
    for (auto s : {InitStrategy::RandomPartition, InitStrategy::SlicewiseKMeans}) {
        auto rng = restart_rng(5, 0);
        const auto p = initial_partition(panel, 3, s, rng);
        EXPECT_EQ(p.units(), 12);
        EXPECT_EQ(p.times(), 4);
    }
    EXPECT_EQ(strategy_for_restart(InitStrategy::Mixed, 0), InitStrategy::RandomPartition);
    EXPECT_EQ(strategy_for_restart(InitStrategy::Mixed, 1), InitStrategy::SlicewiseKMeans);
    EXPECT_EQ(strategy_for_restart(InitStrategy::SlicewiseKMeans, 0), InitStrategy::SlicewiseKMeans);
}
