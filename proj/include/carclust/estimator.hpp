#ifndef CARCLUST_ESTIMATOR_HPP
#define CARCLUST_ESTIMATOR_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "car_model.hpp"
#include "errors.hpp"
#include "panel.hpp"

/**
 * @file estimator.hpp
 * @brief Coordinate-descent fit of the clustered VAR(P) model with random or k-means restarts.
 */

namespace carclust {

enum class InitStrategy { RandomPartition, SlicewiseKMeans, Mixed };

inline const char* to_string(InitStrategy s) {
    switch (s) {
    case InitStrategy::RandomPartition:
        return "random";
    case InitStrategy::SlicewiseKMeans:
        return "slicewise";
    case InitStrategy::Mixed:
        return "mixed";
    }
    return "unknown";
}

struct FitConfig {
    Index n_clusters = 2;
    Index lag_order = 1;
    Index n_restarts = 10;
    Index max_iters = 200;
    double rel_tol = 1e-8;
    std::uint64_t seed = 0;
    InitStrategy init_strategy = InitStrategy::Mixed;
    /// Worker threads for restarts; 0 means hardware concurrency.
    unsigned threads = 1;
};

inline void validate(const FitConfig& config, const LongitudinalPanel& panel) {
    if (config.n_clusters < 1) {
        throw InvalidConfig("number of clusters must be at least 1, got " + std::to_string(config.n_clusters));
    }
    if (config.n_clusters > panel.units()) {
        throw InvalidConfig("number of clusters (" + std::to_string(config.n_clusters) + ") exceeds number of units ("
                            + std::to_string(panel.units()) + ")");
    }
    if (config.lag_order < 1) {
        throw InvalidConfig("lag order must be at least 1, got " + std::to_string(config.lag_order));
    }
    if (panel.times() < config.lag_order + 2) {
        throw InvalidConfig("lag order " + std::to_string(config.lag_order) + " needs at least "
                            + std::to_string(config.lag_order + 2) + " time points, panel has "
                            + std::to_string(panel.times()));
    }
    if (config.n_restarts < 1) {
        throw InvalidConfig("number of restarts must be at least 1, got " + std::to_string(config.n_restarts));
    }
    if (config.max_iters < 1) {
        throw InvalidConfig("max iterations must be at least 1, got " + std::to_string(config.max_iters));
    }
    if (!(config.rel_tol > 0) || !std::isfinite(config.rel_tol)) {
        throw InvalidConfig("relative tolerance must be positive and finite");
    }
}

struct FitResult {
    PartitionSequence partition;
    /// Lagged regression parameters, times 0..T-2.
    CentroidSequence model_centroids;
    /// Per-time cluster means of the fitted partition, times 0..T-1.
    CentroidSequence empirical_centroids;
    VarCoefficients coefficients;
    double objective = 0;
    Index iterations = 0;
    bool converged = false;
    Index restart_index = 0;
    std::vector<double> objective_trace;
    /// Leading slices (t < P) that the loss ignores; labelled by Lloyd iterations anchored on the following slice.
    Index static_slices = 0;
    Index reseeds = 0;
    InitStrategy init_used = InitStrategy::RandomPartition;
};

/**
 * Moves units into empty clusters: for each empty cluster in ascending order, the unit with the
 * largest squared distance to its assigned centre (among clusters with more than one member)
 * is moved. Returns the number of moves.
 */
inline Index reseed_empty_clusters(std::vector<Index>& labels, const Matrix& x, const Matrix& centers, Index n_clusters) {
    std::vector<Index> counts(static_cast<std::size_t>(n_clusters), 0);
    for (auto g : labels) {
        ++counts[static_cast<std::size_t>(g)];
    }
    Vector dist = assigned_distances(x, labels, centers);

    Index moves = 0;
    for (Index g = 0; g < n_clusters; ++g) {
        if (counts[static_cast<std::size_t>(g)] > 0) {
            continue;
        }
        Index far = -1;
        double far_dist = -1;
        for (Index i = 0; i < x.rows(); ++i) {
            const auto own = labels[static_cast<std::size_t>(i)];
            if (counts[static_cast<std::size_t>(own)] > 1 && dist(i) > far_dist) {
                far = i;
                far_dist = dist(i);
            }
        }
        if (far < 0) {
            break;
        }
        auto& own = labels[static_cast<std::size_t>(far)];
        --counts[static_cast<std::size_t>(own)];
        own = g;
        ++counts[static_cast<std::size_t>(g)];
        dist(far) = (x.row(far) - centers.row(g)).squaredNorm();
        ++moves;
    }
    return moves;
}

namespace detail {

/// Group means with zero rows for empty clusters.
inline Matrix lenient_means(const Matrix& x, std::span<const Index> labels, Index n_clusters) {
    auto grouped = group_sums(x, labels, n_clusters);
    for (Index g = 0; g < n_clusters; ++g) {
        const auto c = grouped.counts[static_cast<std::size_t>(g)];
        if (c > 0) {
            grouped.sums.row(g) /= static_cast<double>(c);
        }
    }
    return grouped.sums;
}

inline void repair_slice(std::vector<Index>& labels, const Matrix& x, Index n_clusters) {
    reseed_empty_clusters(labels, x, lenient_means(x, labels, n_clusters), n_clusters);
}

/**
 * Permutation `perm` (new label of old label b at time t is perm[b]) maximizing the number of units
 * that keep their label between `prev` and `cur`. Exhaustive up to 8 clusters, greedy beyond.
 */
inline std::vector<Index> best_overlap_permutation(std::span<const Index> prev, std::span<const Index> cur, Index G) {
    IndexMatrix overlap = IndexMatrix::Zero(G, G);
    for (std::size_t i = 0; i < prev.size(); ++i) {
        ++overlap(prev[i], cur[i]);
    }

    std::vector<Index> perm(static_cast<std::size_t>(G));
    std::iota(perm.begin(), perm.end(), 0);
    if (G <= 8) {
        std::vector<Index> best = perm;
        Index best_score = -1;
        do {
            Index score = 0;
            for (Index b = 0; b < G; ++b) {
                score += overlap(perm[static_cast<std::size_t>(b)], b);
            }
            if (score > best_score) {
                best_score = score;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }

    std::vector<bool> used_prev(static_cast<std::size_t>(G), false), used_cur(static_cast<std::size_t>(G), false);
    for (Index k = 0; k < G; ++k) {
        Index ba = -1, bb = -1, bv = -1;
        for (Index a = 0; a < G; ++a) {
            if (used_prev[static_cast<std::size_t>(a)]) {
                continue;
            }
            for (Index b = 0; b < G; ++b) {
                if (!used_cur[static_cast<std::size_t>(b)] && overlap(a, b) > bv) {
                    ba = a;
                    bb = b;
                    bv = overlap(a, b);
                }
            }
        }
        used_prev[static_cast<std::size_t>(ba)] = true;
        used_cur[static_cast<std::size_t>(bb)] = true;
        perm[static_cast<std::size_t>(bb)] = ba;
    }
    return perm;
}

/**
 * With one lag, relabelling the partition at time t together with the rows of C_{t-1} leaves the loss
 * unchanged. Chain the labels from t = 2 onward so that clusters keep their identity over time.
 */
inline void align_single_lag_labels(PartitionSequence& part, CentroidSequence& model) {
    const Index G = part.clusters();
    for (Index t = 2; t < part.times(); ++t) {
        const auto perm = best_overlap_permutation(part.slice(t - 1), part.slice(t), G);
        std::vector<Index> relabelled(part.slice(t).begin(), part.slice(t).end());
        for (auto& l : relabelled) {
            l = perm[static_cast<std::size_t>(l)];
        }
        part.set_slice(t, std::move(relabelled));

        Matrix rows(G, model.vars());
        for (Index g = 0; g < G; ++g) {
            rows.row(perm[static_cast<std::size_t>(g)]) = model.at(t - 1).row(g);
        }
        model.at(t - 1) = rows;
    }
}

}

/**
 * One restart of the three-block coordinate descent. The constructor repairs empty clusters in
 * the initial partition, seeds the model centroids with per-time class means and fits the
 * coefficients; each `step_*` call then performs one block update and returns the new loss.
 */
class CoordinateDescent {
public:
    CoordinateDescent(const LongitudinalPanel& panel, Index lag_order, PartitionSequence initial)
        : panel_(&panel), lag_order_(lag_order), partition_(std::move(initial)) {
        detail::check_partition_dims(panel, partition_);
        if (panel.times() < lag_order + 2) {
            throw InvalidConfig("lag order " + std::to_string(lag_order) + " needs at least "
                                + std::to_string(lag_order + 2) + " time points");
        }
        const Index G = partition_.clusters();
        for (Index t = 0; t < panel.times(); ++t) {
            std::vector<Index> labels(partition_.slice(t).begin(), partition_.slice(t).end());
            detail::repair_slice(labels, panel.slice(t), G);
            partition_.set_slice(t, std::move(labels));
        }

        const auto empirical = empirical_centroids(panel, partition_);
        centroids_.centers.assign(empirical.centers.begin(), empirical.centers.end() - 1);
        coefficients_ = update_coefficients(panel, partition_, centroids_, lag_order_);
        objective_ = carclust::objective(panel, partition_, centroids_, coefficients_);
    }

    double step_centroids() {
        try {
            centroids_ = update_centroids(*panel_, partition_, coefficients_, centroids_);
        } catch (const SingularDesign&) {
            // The loss does not depend on the centroids; keeping them is an exact minimizer.
        }
        return refresh();
    }

    double step_coefficients() {
        coefficients_ = update_coefficients(*panel_, partition_, centroids_, lag_order_);
        return refresh();
    }

    /**
     * Argmin assignment followed by reseeding of empty clusters. On a loss-bearing slice, a reseeded
     * assignment that would cost more than the previous assignment is discarded in favour of the latter.
     * The slices before P are then rebuilt from the final labels at P.
     */
    double step_partition() {
        const auto candidate = update_partition(*panel_, centroids_, coefficients_);
        const Index G = partition_.clusters();
        for (Index t = lag_order_; t < panel_->times(); ++t) {
            const Matrix centers = predicted_centroids(centroids_, coefficients_, t);
            std::vector<Index> labels(candidate.slice(t).begin(), candidate.slice(t).end());
            const Index moves = reseed_empty_clusters(labels, panel_->slice(t), centers, G);
            if (moves > 0
                && slice_loss(panel_->slice(t), labels, centers) > slice_loss(panel_->slice(t), partition_.slice(t), centers)) {
                continue;
            }
            reseeds_ += moves;
            partition_.set_slice(t, std::move(labels));
        }

        std::vector<std::vector<Index>> all(static_cast<std::size_t>(panel_->times()));
        all[static_cast<std::size_t>(lag_order_)].assign(partition_.slice(lag_order_).begin(), partition_.slice(lag_order_).end());
        assign_static_slices(*panel_, all, predicted_centroids(centroids_, coefficients_, lag_order_), lag_order_);
        for (Index t = 0; t < lag_order_; ++t) {
            auto& labels = all[static_cast<std::size_t>(t)];
            reseeds_ += reseed_empty_clusters(labels, panel_->slice(t), detail::lenient_means(panel_->slice(t), labels, G), G);
            partition_.set_slice(t, std::move(labels));
        }
        return refresh();
    }

    double objective() const { return objective_; }
    const PartitionSequence& partition() const { return partition_; }
    const CentroidSequence& centroids() const { return centroids_; }
    const VarCoefficients& coefficients() const { return coefficients_; }
    Index lag_order() const { return lag_order_; }
    Index reseeds() const { return reseeds_; }

    /// Moves the state out; the object must not be stepped afterwards.
    PartitionSequence take_partition() { return std::move(partition_); }
    CentroidSequence take_centroids() { return std::move(centroids_); }

private:
    double refresh() {
        objective_ = carclust::objective(*panel_, partition_, centroids_, coefficients_);
        return objective_;
    }

    const LongitudinalPanel* panel_;
    Index lag_order_;
    PartitionSequence partition_;
    CentroidSequence centroids_;
    VarCoefficients coefficients_;
    double objective_ = 0;
    Index reseeds_ = 0;
};

inline std::mt19937_64 restart_rng(std::uint64_t seed, Index restart) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(restart)};
    return std::mt19937_64(seq);
}

inline InitStrategy strategy_for_restart(InitStrategy configured, Index restart) {
    if (configured != InitStrategy::Mixed) {
        return configured;
    }
    return restart % 2 == 0 ? InitStrategy::RandomPartition : InitStrategy::SlicewiseKMeans;
}

/// I.i.d. uniform labels for every (unit, time).
inline PartitionSequence random_partition(Index units, Index times, Index n_clusters, std::mt19937_64& rng) {
    std::uniform_int_distribution<Index> pick(0, n_clusters - 1);
    std::vector<std::vector<Index>> labels(static_cast<std::size_t>(times), std::vector<Index>(static_cast<std::size_t>(units)));
    for (auto& slice : labels) {
        for (auto& l : slice) {
            l = pick(rng);
        }
    }
    return PartitionSequence(n_clusters, std::move(labels));
}

/**
 * Lloyd's k-means on one slice with k-means++ seeding. Returns labels with no empty cluster.
 */
inline std::vector<Index> kmeans_slice(const Matrix& x, Index n_clusters, std::mt19937_64& rng, Index max_iters = 100) {
    const Index n = x.rows();
    Matrix centers(n_clusters, x.cols());
    std::uniform_int_distribution<Index> first(0, n - 1);
    centers.row(0) = x.row(first(rng));

    Vector d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Index k = 1; k < n_clusters; ++k) {
        for (Index i = 0; i < n; ++i) {
            d2(i) = std::min(d2(i), (x.row(i) - centers.row(k - 1)).squaredNorm());
        }
        const double total = d2.sum();
        Index chosen = 0;
        if (total > 0) {
            double target = unif(rng) * total;
            chosen = n - 1;
            for (Index i = 0; i < n; ++i) {
                target -= d2(i);
                if (target < 0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = first(rng);
        }
        centers.row(k) = x.row(chosen);
    }

    std::vector<Index> labels = nearest_labels(x, centers);
    detail::repair_slice(labels, x, n_clusters);
    for (Index it = 0; it < max_iters; ++it) {
        centers = detail::lenient_means(x, labels, n_clusters);
        auto next = nearest_labels(x, centers);
        detail::repair_slice(next, x, n_clusters);
        if (next == labels) {
            break;
        }
        labels = std::move(next);
    }
    return labels;
}

/**
 * Static k-means per slice, then labels at time t are matched to those at t-1 by greedily pairing
 * the closest class means.
 */
inline PartitionSequence slicewise_kmeans_partition(const LongitudinalPanel& panel, Index n_clusters, std::mt19937_64& rng) {
    std::vector<std::vector<Index>> labels;
    labels.reserve(static_cast<std::size_t>(panel.times()));
    Matrix prev_means;
    for (Index t = 0; t < panel.times(); ++t) {
        auto slice = kmeans_slice(panel.slice(t), n_clusters, rng);
        const Matrix means = detail::lenient_means(panel.slice(t), slice, n_clusters);
        if (t == 0) {
            prev_means = means;
            labels.push_back(std::move(slice));
            continue;
        }

        std::vector<Index> perm(static_cast<std::size_t>(n_clusters), -1);
        std::vector<bool> taken(static_cast<std::size_t>(n_clusters), false);
        for (Index k = 0; k < n_clusters; ++k) {
            Index best_a = -1, best_b = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Index a = 0; a < n_clusters; ++a) {
                if (taken[static_cast<std::size_t>(a)]) {
                    continue;
                }
                for (Index b = 0; b < n_clusters; ++b) {
                    if (perm[static_cast<std::size_t>(b)] >= 0) {
                        continue;
                    }
                    const double d = (prev_means.row(a) - means.row(b)).squaredNorm();
                    if (d < best) {
                        best = d;
                        best_a = a;
                        best_b = b;
                    }
                }
            }
            taken[static_cast<std::size_t>(best_a)] = true;
            perm[static_cast<std::size_t>(best_b)] = best_a;
        }

        Matrix aligned(n_clusters, panel.vars());
        for (Index b = 0; b < n_clusters; ++b) {
            aligned.row(perm[static_cast<std::size_t>(b)]) = means.row(b);
        }
        for (auto& l : slice) {
            l = perm[static_cast<std::size_t>(l)];
        }
        prev_means = aligned;
        labels.push_back(std::move(slice));
    }
    return PartitionSequence(n_clusters, std::move(labels));
}

inline PartitionSequence initial_partition(const LongitudinalPanel& panel, Index n_clusters, InitStrategy strategy,
                                           std::mt19937_64& rng) {
    if (strategy == InitStrategy::SlicewiseKMeans) {
        return slicewise_kmeans_partition(panel, n_clusters, rng);
    }
    return random_partition(panel.units(), panel.times(), n_clusters, rng);
}

/**
 * Runs coordinate descent from a given partition until the relative decrease over one full
 * iteration drops below `rel_tol`, or `max_iters` iterations.
 */
inline FitResult fit_from(const LongitudinalPanel& panel, const FitConfig& config, PartitionSequence initial,
                          Index restart_index = 0) {
    validate(config, panel);
    if (initial.clusters() != config.n_clusters) {
        throw InvalidConfig("initial partition has " + std::to_string(initial.clusters()) + " clusters, config asks for "
                            + std::to_string(config.n_clusters));
    }

    CoordinateDescent cd(panel, config.lag_order, std::move(initial));
    FitResult result;
    result.objective_trace.push_back(cd.objective());

    for (Index iter = 1; iter <= config.max_iters; ++iter) {
        const double start = cd.objective();
        result.objective_trace.push_back(cd.step_centroids());
        result.objective_trace.push_back(cd.step_coefficients());
        const double end = cd.step_partition();
        result.objective_trace.push_back(end);
        result.iterations = iter;
        if (start <= 0 || start - end < config.rel_tol * start) {
            result.converged = true;
            break;
        }
    }

    result.coefficients = cd.coefficients();
    result.reseeds = cd.reseeds();
    result.partition = cd.take_partition();
    result.model_centroids = cd.take_centroids();
    if (config.lag_order == 1) {
        detail::align_single_lag_labels(result.partition, result.model_centroids);
    }
    result.empirical_centroids = empirical_centroids(panel, result.partition);
    result.objective = carclust::objective(panel, result.partition, result.model_centroids, result.coefficients);
    result.restart_index = restart_index;
    result.static_slices = config.lag_order;
    return result;
}

/// Single restart `restart_index` with its seeded initialization.
inline FitResult fit_restart(const LongitudinalPanel& panel, const FitConfig& config, Index restart_index) {
    validate(config, panel);
    auto rng = restart_rng(config.seed, restart_index);
    const auto strategy = strategy_for_restart(config.init_strategy, restart_index);
    auto result = fit_from(panel, config, initial_partition(panel, config.n_clusters, strategy, rng), restart_index);
    result.init_used = strategy;
    return result;
}

inline FitResult fit(const LongitudinalPanel& panel, const FitConfig& config) {
    return fit_restart(panel, config, 0);
}

/**
 * Best of `n_restarts` independent fits by loss; ties go to the lowest restart index.
 * Restarts run on up to `config.threads` workers and the result does not depend on the thread count.
 */
inline FitResult fit_multistart(const LongitudinalPanel& panel, const FitConfig& config) {
    validate(config, panel);
    const auto restarts = static_cast<std::size_t>(config.n_restarts);
    std::vector<std::optional<FitResult>> results(restarts);
    std::vector<std::string> failures(restarts);

    auto run_one = [&](std::size_t r) {
        try {
            results[r] = fit_restart(panel, config, static_cast<Index>(r));
        } catch (const Error& e) {
            failures[r] = e.what();
        }
    };

    unsigned workers = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, restarts));
    if (workers <= 1) {
        for (std::size_t r = 0; r < restarts; ++r) {
            run_one(r);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t r = next++; r < restarts; r = next++) {
                    run_one(r);
                }
            });
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    std::optional<std::size_t> best;
    for (std::size_t r = 0; r < restarts; ++r) {
        if (results[r] && (!best || results[r]->objective < results[*best]->objective)) {
            best = r;
        }
    }
    if (!best) {
        throw AllRestartsFailed("all " + std::to_string(restarts) + " restarts failed; first error: " + failures.front());
    }
    return std::move(*results[*best]);
}

}

#endif
