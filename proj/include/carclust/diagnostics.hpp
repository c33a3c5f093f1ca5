#ifndef CARCLUST_DIAGNOSTICS_HPP
#define CARCLUST_DIAGNOSTICS_HPP

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "panel.hpp"

/**
 * @file diagnostics.hpp
 * @brief Partition dynamics: transition matrices, membership shares, unit trajectories and ARI.
 */

namespace carclust {

struct TransitionMatrix {
    /// Row-stochastic; rows of never-occupied source clusters are all zero.
    Matrix probs;
    /// counts(a, b): units in a at t-1 and in b at t, summed over t.
    IndexMatrix counts;
    /// Off-diagonal total, i.e. the number of label switches.
    Index n_transitions = 0;
    std::vector<bool> empty_rows;
};

inline TransitionMatrix transition_matrix(const PartitionSequence& part) {
    if (part.times() < 2) {
        throw SingleTimePoint();
    }
    const Index G = part.clusters();
    TransitionMatrix out;
    out.counts = IndexMatrix::Zero(G, G);
    for (Index t = 1; t < part.times(); ++t) {
        for (Index i = 0; i < part.units(); ++i) {
            ++out.counts(part.label(i, t - 1), part.label(i, t));
        }
    }

    out.probs = Matrix::Zero(G, G);
    out.empty_rows.assign(static_cast<std::size_t>(G), false);
    for (Index a = 0; a < G; ++a) {
        const Index row = out.counts.row(a).sum();
        if (row == 0) {
            out.empty_rows[static_cast<std::size_t>(a)] = true;
            continue;
        }
        for (Index b = 0; b < G; ++b) {
            out.probs(a, b) = static_cast<double>(out.counts(a, b)) / static_cast<double>(row);
            if (a != b) {
                out.n_transitions += out.counts(a, b);
            }
        }
    }
    return out;
}

/// Fraction of all (unit, time) pairs in each cluster.
inline Vector membership_shares(const PartitionSequence& part) {
    Vector shares = Vector::Zero(part.clusters());
    for (Index t = 0; t < part.times(); ++t) {
        for (auto g : part.slice(t)) {
            shares(g) += 1.0;
        }
    }
    return shares / static_cast<double>(part.units() * part.times());
}

struct UnitTrajectory {
    std::vector<Index> labels;
    Index switches = 0;
};

inline UnitTrajectory unit_trajectory(const PartitionSequence& part, Index unit) {
    if (unit < 0 || unit >= part.units()) {
        throw UnknownUnit("#" + std::to_string(unit));
    }
    UnitTrajectory out;
    out.labels.reserve(static_cast<std::size_t>(part.times()));
    for (Index t = 0; t < part.times(); ++t) {
        out.labels.push_back(part.label(unit, t));
        if (t > 0 && out.labels[static_cast<std::size_t>(t)] != out.labels[static_cast<std::size_t>(t - 1)]) {
            ++out.switches;
        }
    }
    return out;
}

inline UnitTrajectory unit_trajectory(const PartitionSequence& part, const LongitudinalPanel& panel, const std::string& unit_id) {
    const auto& ids = panel.unit_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == unit_id) {
            return unit_trajectory(part, static_cast<Index>(i));
        }
    }
    throw UnknownUnit(unit_id);
}

/**
 * Adjusted Rand index between two labelings of the same items (Hubert and Arabie).
 * Returns 1 when both labelings put every item in one cluster.
 */
inline double adjusted_rand_index(std::span<const Index> a, std::span<const Index> b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("labelings have different lengths");
    }
    std::map<std::pair<Index, Index>, double> joint;
    std::map<Index, double> rows, cols;
    for (std::size_t k = 0; k < a.size(); ++k) {
        joint[{a[k], b[k]}] += 1;
        rows[a[k]] += 1;
        cols[b[k]] += 1;
    }
    auto pairs = [](double m) { return m * (m - 1) / 2; };
    double sum_joint = 0, sum_rows = 0, sum_cols = 0;
    for (const auto& [key, v] : joint) {
        sum_joint += pairs(v);
    }
    for (const auto& [key, v] : rows) {
        sum_rows += pairs(v);
    }
    for (const auto& [key, v] : cols) {
        sum_cols += pairs(v);
    }
    const double total = pairs(static_cast<double>(a.size()));
    const double expected = total > 0 ? sum_rows * sum_cols / total : 0;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) {
        return 1.0;
    }
    return (sum_joint - expected) / (max_index - expected);
}

/// Labels of every unit at times `first..T-1`, time-major.
inline std::vector<Index> pooled_labels(const PartitionSequence& part, Index first = 0) {
    std::vector<Index> out;
    for (Index t = first; t < part.times(); ++t) {
        out.insert(out.end(), part.slice(t).begin(), part.slice(t).end());
    }
    return out;
}

}

#endif
