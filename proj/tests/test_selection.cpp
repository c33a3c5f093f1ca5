#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "carclust/carclust.hpp"
#include "oracles.hpp"

using namespace carclust;

namespace {

std::vector<Matrix> hand_instance() {
    Matrix x(4, 1);
    x << 0.0, 0.1, 10.0, 10.1;
    return {x};
}

double naive_trace_w(const LongitudinalPanel& panel, const PartitionSequence& part) {
    double total = 0;
    for (Index t = 0; t < panel.times(); ++t) {
        const auto means = oracle::grouped_means(panel, part, t);
        for (Index i = 0; i < panel.units(); ++i)
            for (Index j = 0; j < panel.vars(); ++j) {
                const double d = panel.value(i, j, t) - means[static_cast<std::size_t>(part.label(i, t))][static_cast<std::size_t>(j)];
                total += d * d;
            }
    }
    return total;
}

double min_eigenvalue(const Matrix& m) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().minCoeff();
}

}

TEST(Ch, HandInstance) {
    const auto slices = hand_instance();
    PartitionSequence part(2, {{0, 0, 1, 1}});
    const auto v = ch_components(slices, part);
    EXPECT_NEAR(v.trace_w, 0.01, 1e-12);
    EXPECT_NEAR(v.trace_b, 100.0, 1e-10);
    EXPECT_NEAR(v.ch, 20000.0, 20000.0 * 1e-9);
}

TEST(Ch, Errors) {
    const auto slices = hand_instance();
    EXPECT_THROW(ch_components(slices, PartitionSequence(1, {{0, 0, 0, 0}})), UndefinedForSingleCluster);
    Matrix x(4, 1);
    x << 1, 1, 2, 2;
    std::vector<Matrix> tight{x};
    EXPECT_THROW(ch_components(tight, PartitionSequence(2, {{0, 0, 1, 1}})), ZeroWithinScatter);
    EXPECT_THROW(ch_components(slices, PartitionSequence(2, {{0, 0, 0, 0}})), EmptyCluster);
}

TEST(Scatter, IdentityAndSymmetry) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto panel = oracle::random_panel(12, 3, 4, seed, 2.0);
        auto part = oracle::random_full_partition(12, 4, 3, seed + 50);
        const Matrix w = within_scatter(panel, part);
        const Matrix b = between_scatter(panel, part);
        EXPECT_TRUE(w.isApprox(w.transpose()));
        EXPECT_TRUE(b.isApprox(b.transpose()));
        EXPECT_GE(min_eigenvalue(w), -1e-10);
        EXPECT_GE(min_eigenvalue(b), -1e-10);
        const double total = total_scatter(panel);
        EXPECT_NEAR(w.trace() + b.trace(), total, 1e-9 * total);
        EXPECT_NEAR(w.trace(), naive_trace_w(panel, part), 1e-9 * total);
    }
}

TEST(Ch, ScaleAndShiftInvariant) {
    auto panel = oracle::random_panel(10, 2, 3, 4);
    auto part = oracle::random_full_partition(10, 3, 2, 5);
    std::vector<Matrix> scaled;
    for (const auto& x : panel.slices()) scaled.push_back(3.5 * x.array() + 7.0);
    EXPECT_NEAR(ch_index(scaled, part), ch_index(panel, part), 1e-9 * ch_index(panel, part));
}

TEST(Select, SingletonRange) {
    auto gen = generate_panel(separated_spec(30, 2, 5, 3, 10.0, 1.0, 0.0, 3));
    FitConfig c;
    c.n_restarts = 3;
    const auto report = select_g(gen.panel, {3}, 1, c);
    EXPECT_EQ(report.selected_g, 3);
    ASSERT_EQ(report.candidates.size(), 1u);
    EXPECT_TRUE(report.selected().fit.has_value());
}

TEST(Select, PicksTrueClusterCount) {
    auto gen = generate_panel(separated_spec(60, 2, 6, 3, 20.0, 1.0, 0.02, 8));
    FitConfig c;
    c.n_restarts = 6;
    const auto report = select_g(gen.panel, {2, 3, 4, 5}, 1, c);
    EXPECT_EQ(report.selected_g, 3);
    for (const auto& cand : report.candidates) {
        ASSERT_TRUE(cand.ch.has_value());
        EXPECT_LE(*cand.ch, *report.selected().ch);
        EXPECT_NEAR(*cand.ch, ch_index(gen.panel, cand.fit->partition), 1e-9 * *cand.ch);
    }
}

TEST(Select, DeterministicAndRejectsSmallG) {
    auto panel = oracle::random_panel(15, 2, 4, 1);
    FitConfig c;
    c.n_restarts = 2;
    c.seed = 77;
    const auto a = select_g(panel, {2, 3}, 1, c);
    const auto b = select_g(panel, {2, 3}, 1, c);
    EXPECT_EQ(a.selected_g, b.selected_g);
    EXPECT_EQ(*a.candidates[1].ch, *b.candidates[1].ch);
    EXPECT_THROW(select_g(panel, {1, 2}, 1, c), InvalidConfig);
    EXPECT_THROW(select_g(panel, {}, 1, c), InvalidConfig);
}

TEST(Select, FailedCandidatesAreRecorded) {
    auto panel = oracle::random_panel(4, 1, 4, 2);
    FitConfig c;
    c.n_restarts = 2;
    const auto report = select_g(panel, {2, 5}, 1, c);
    EXPECT_EQ(report.selected_g, 2);
    EXPECT_FALSE(report.candidates[1].error.empty());
    EXPECT_FALSE(report.candidates[1].ch.has_value());
}
