#ifndef CARCLUST_SELECTION_HPP
#define CARCLUST_SELECTION_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "estimator.hpp"
#include "panel.hpp"

/**
 * @file selection.hpp
 * @brief Calinski-Harabasz criterion over the pooled (unit, time) observations and the G sweep.
 *
 * Scatter matrices use per-time class means and per-time grand means, summed over all T slices.
 */

namespace carclust {

namespace detail {

inline void check_scatter_dims(std::span<const Matrix> slices, const PartitionSequence& part) {
    if (slices.empty() || static_cast<Index>(slices.size()) != part.times() || slices.front().rows() != part.units()) {
        throw DimensionMismatch("partition is " + std::to_string(part.units()) + " units x " + std::to_string(part.times())
                                + " times but the data has " + std::to_string(slices.size()) + " slices");
    }
}

}

/**
 * Within-cluster scatter `W = sum_t sum_g sum_{i in g at t} (x_it - m_gt)(x_it - m_gt)'`.
 * Takes raw slices so that a single time point is accepted.
 */
inline Matrix within_scatter(std::span<const Matrix> slices, const PartitionSequence& part) {
    detail::check_scatter_dims(slices, part);
    const Index J = slices.front().cols();
    Matrix w = Matrix::Zero(J, J);
    for (Index t = 0; t < part.times(); ++t) {
        const Matrix& x = slices[static_cast<std::size_t>(t)];
        const Matrix means = empirical_centroid_slice(x, part.slice(t), part.clusters(), t);
        Matrix dev(x.rows(), J);
        for (Index i = 0; i < x.rows(); ++i) {
            dev.row(i) = x.row(i) - means.row(part.label(i, t));
        }
        w.noalias() += dev.transpose() * dev;
    }
    return w;
}

/**
 * Between-cluster scatter `B = sum_t sum_g n_gt (m_gt - m_t)(m_gt - m_t)'`, `m_t` the all-unit mean at t.
 */
inline Matrix between_scatter(std::span<const Matrix> slices, const PartitionSequence& part) {
    detail::check_scatter_dims(slices, part);
    const auto sizes = cluster_sizes(part);
    const Index J = slices.front().cols();
    Matrix b = Matrix::Zero(J, J);
    for (Index t = 0; t < part.times(); ++t) {
        const Matrix& x = slices[static_cast<std::size_t>(t)];
        const Matrix means = empirical_centroid_slice(x, part.slice(t), part.clusters(), t);
        const RowVector grand = x.colwise().mean();
        for (Index g = 0; g < part.clusters(); ++g) {
            const RowVector d = means.row(g) - grand;
            b.noalias() += static_cast<double>(sizes(g, t)) * d.transpose() * d;
        }
    }
    return b;
}

/// `sum_t sum_i ||x_it - m_t||^2`.
inline double total_scatter(std::span<const Matrix> slices) {
    double total = 0;
    for (const auto& x : slices) {
        total += (x.rowwise() - x.colwise().mean()).squaredNorm();
    }
    return total;
}

inline Matrix within_scatter(const LongitudinalPanel& panel, const PartitionSequence& part) {
    return within_scatter(panel.slices(), part);
}

inline Matrix between_scatter(const LongitudinalPanel& panel, const PartitionSequence& part) {
    return between_scatter(panel.slices(), part);
}

inline double total_scatter(const LongitudinalPanel& panel) {
    return total_scatter(panel.slices());
}

struct ChValue {
    double ch = 0;
    double trace_w = 0;
    double trace_b = 0;
};

/**
 * `CH = tr(B)/tr(W) * (nT - G)/(G - 1)` with all traces reported alongside.
 */
inline ChValue ch_components(std::span<const Matrix> slices, const PartitionSequence& part) {
    const Index G = part.clusters();
    if (G < 2) {
        throw UndefinedForSingleCluster();
    }
    ChValue out;
    out.trace_w = within_scatter(slices, part).trace();
    out.trace_b = between_scatter(slices, part).trace();
    if (!(out.trace_w > 0)) {
        throw ZeroWithinScatter();
    }
    const double nt = static_cast<double>(part.units() * part.times());
    out.ch = (out.trace_b / out.trace_w) * ((nt - static_cast<double>(G)) / static_cast<double>(G - 1));
    return out;
}

inline ChValue ch_components(const LongitudinalPanel& panel, const PartitionSequence& part) {
    return ch_components(panel.slices(), part);
}

inline double ch_index(std::span<const Matrix> slices, const PartitionSequence& part) {
    return ch_components(slices, part).ch;
}

inline double ch_index(const LongitudinalPanel& panel, const PartitionSequence& part) {
    return ch_components(panel, part).ch;
}

struct ChCandidate {
    Index n_clusters = 0;
    std::optional<double> ch;
    double trace_w = 0;
    double trace_b = 0;
    double objective = 0;
    Index iterations = 0;
    bool converged = false;
    Index restart_index = 0;
    /// Empty when the candidate fitted and scored successfully.
    std::string error;
    std::optional<FitResult> fit;
};

struct ChReport {
    std::vector<ChCandidate> candidates;
    Index selected_g = 0;
    Index lag_order = 1;

    const ChCandidate& selected() const {
        for (const auto& c : candidates) {
            if (c.n_clusters == selected_g) {
                return c;
            }
        }
        throw Error("report has no selected candidate");
    }
};

/**
 * Fits every G in `g_range` with the same seed and restarts and keeps the candidate with the
 * largest CH (ties to the smaller G). Failed candidates are recorded with their error.
 */
inline ChReport select_g(const LongitudinalPanel& panel, const std::vector<Index>& g_range, Index lag_order,
                         const FitConfig& config) {
    if (g_range.empty()) {
        throw InvalidConfig("cluster range is empty");
    }
    for (auto g : g_range) {
        if (g < 2) {
            throw InvalidConfig("model selection needs at least 2 clusters per candidate, got " + std::to_string(g));
        }
    }

    ChReport report;
    report.lag_order = lag_order;
    std::optional<double> best;
    std::string first_error;
    for (auto g : g_range) {
        ChCandidate cand;
        cand.n_clusters = g;
        FitConfig cfg = config;
        cfg.n_clusters = g;
        cfg.lag_order = lag_order;
        try {
            auto result = fit_multistart(panel, cfg);
            cand.objective = result.objective;
            cand.iterations = result.iterations;
            cand.converged = result.converged;
            cand.restart_index = result.restart_index;
            const auto ch = ch_components(panel, result.partition);
            cand.ch = ch.ch;
            cand.trace_w = ch.trace_w;
            cand.trace_b = ch.trace_b;
            cand.fit = std::move(result);
            if (!best || *cand.ch > *best || (*cand.ch == *best && g < report.selected_g)) {
                best = cand.ch;
                report.selected_g = g;
            }
        } catch (const Error& e) {
            cand.error = e.what();
            if (first_error.empty()) {
                first_error = "G=" + std::to_string(g) + ": " + e.what();
            }
        }
        report.candidates.push_back(std::move(cand));
    }
    if (!best) {
        throw AllRestartsFailed("every candidate cluster count failed; " + first_error);
    }
    return report;
}

}

#endif
