#ifndef CARCLUST_PANEL_HPP
#define CARCLUST_PANEL_HPP

#include <charconv>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

/**
 * @file panel.hpp
 * @brief Three-way panel data, partition sequences, centroid sequences and VAR coefficients.
 *
 * Storage is time-major: a panel is a sequence of T slices, each an n-by-J matrix
 * (units on rows, variables on columns). Partitions store one integer label per unit
 * and time; the binary membership array is exposed through `membership()` and `indicator()`.
 * All indices are 0-based.
 */

namespace carclust {

using IndexMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

inline bool parse_number(std::string_view text, double& out) {
    if (text.empty()) {
        return false;
    }
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
}

}

/**
 * Ordering of time labels: numeric when both labels parse as numbers, lexicographic otherwise.
 */
inline bool time_label_less(const std::string& a, const std::string& b) {
    double x = 0, y = 0;
    if (detail::parse_number(a, x) && detail::parse_number(b, y)) {
        return x < y;
    }
    return a < b;
}

inline std::vector<std::string> default_labels(std::string_view prefix, Index count, Index first = 1) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(count));
    for (Index k = 0; k < count; ++k) {
        out.push_back(std::string(prefix) + std::to_string(k + first));
    }
    return out;
}

/**
 * Dense, complete panel of `n` units observed on `J` variables at `T` ordered times.
 * Immutable once constructed.
 */
class LongitudinalPanel {
public:
    LongitudinalPanel(std::vector<Matrix> slices,
                      std::vector<std::string> unit_ids,
                      std::vector<std::string> var_names,
                      std::vector<std::string> time_labels)
        : slices_(std::move(slices)), unit_ids_(std::move(unit_ids)), var_names_(std::move(var_names)),
          time_labels_(std::move(time_labels)) {
        validate();
    }

    /// Panel with generated labels `u1.., x1.., 1..T`.
    static LongitudinalPanel from_slices(std::vector<Matrix> slices) {
        const Index n = slices.empty() ? 0 : slices.front().rows();
        const Index J = slices.empty() ? 0 : slices.front().cols();
        const auto T = static_cast<Index>(slices.size());
        return LongitudinalPanel(std::move(slices), default_labels("u", n), default_labels("x", J), default_labels("", T));
    }

    Index units() const { return slices_.front().rows(); }
    Index vars() const { return slices_.front().cols(); }
    Index times() const { return static_cast<Index>(slices_.size()); }

    const Matrix& slice(Index t) const { return slices_[static_cast<std::size_t>(t)]; }
    std::span<const Matrix> slices() const { return slices_; }
    double value(Index i, Index j, Index t) const { return slice(t)(i, j); }

    const std::vector<std::string>& unit_ids() const { return unit_ids_; }
    const std::vector<std::string>& var_names() const { return var_names_; }
    const std::vector<std::string>& time_labels() const { return time_labels_; }

private:
    void validate() const {
        if (slices_.size() < 2) {
            throw InvalidPanel("panel needs at least two time slices, got " + std::to_string(slices_.size()));
        }
        const Index n = slices_.front().rows();
        const Index J = slices_.front().cols();
        if (n < 2) {
            throw InvalidPanel("panel needs at least two units, got " + std::to_string(n));
        }
        if (J < 1) {
            throw InvalidPanel("panel needs at least one variable");
        }
        for (std::size_t t = 0; t < slices_.size(); ++t) {
            const auto& s = slices_[t];
            if (s.rows() != n || s.cols() != J) {
                throw InvalidPanel("time slice " + std::to_string(t + 1) + " has shape " + std::to_string(s.rows()) + "x"
                                   + std::to_string(s.cols()) + ", expected " + std::to_string(n) + "x" + std::to_string(J));
            }
            for (Index i = 0; i < n; ++i) {
                for (Index j = 0; j < J; ++j) {
                    if (!std::isfinite(s(i, j))) {
                        throw InvalidPanel("non-finite value at unit " + std::to_string(i + 1) + ", variable "
                                           + std::to_string(j + 1) + ", time " + std::to_string(t + 1));
                    }
                }
            }
        }
        if (static_cast<Index>(unit_ids_.size()) != n) {
            throw InvalidPanel("expected " + std::to_string(n) + " unit ids, got " + std::to_string(unit_ids_.size()));
        }
        if (static_cast<Index>(var_names_.size()) != J) {
            throw InvalidPanel("expected " + std::to_string(J) + " variable names, got " + std::to_string(var_names_.size()));
        }
        if (time_labels_.size() != slices_.size()) {
            throw InvalidPanel("expected " + std::to_string(slices_.size()) + " time labels, got "
                               + std::to_string(time_labels_.size()));
        }
        require_unique(unit_ids_, "unit id");
        require_unique(var_names_, "variable name");
        for (std::size_t t = 1; t < time_labels_.size(); ++t) {
            if (!time_label_less(time_labels_[t - 1], time_labels_[t])) {
                throw InvalidPanel("time labels must be strictly increasing: '" + time_labels_[t - 1] + "' then '"
                                   + time_labels_[t] + "'");
            }
        }
    }

    static void require_unique(const std::vector<std::string>& names, const char* what) {
        std::unordered_set<std::string> seen;
        for (const auto& name : names) {
            if (!seen.insert(name).second) {
                throw InvalidPanel(std::string("duplicate ") + what + " '" + name + "'");
            }
        }
    }

    std::vector<Matrix> slices_;
    std::vector<std::string> unit_ids_;
    std::vector<std::string> var_names_;
    std::vector<std::string> time_labels_;
};

/**
 * Hard partition of `n` units into `G` clusters at each of `T` times.
 * Stored as labels; every (unit, time) pair has exactly one cluster by construction.
 */
class PartitionSequence {
public:
    PartitionSequence() = default;

    PartitionSequence(Index n_clusters, std::vector<std::vector<Index>> labels)
        : clusters_(n_clusters), labels_(std::move(labels)) {
        if (labels_.empty()) {
            throw InvalidPartition("partition needs at least one time slice");
        }
        const std::size_t n = labels_.front().size();
        if (n_clusters < 1 || static_cast<std::size_t>(n_clusters) > n) {
            throw InvalidPartition("number of clusters must lie in [1, " + std::to_string(n) + "], got "
                                   + std::to_string(n_clusters));
        }
        for (std::size_t t = 0; t < labels_.size(); ++t) {
            if (labels_[t].size() != n) {
                throw InvalidPartition("time slice " + std::to_string(t + 1) + " has " + std::to_string(labels_[t].size())
                                       + " labels, expected " + std::to_string(n));
            }
            for (std::size_t i = 0; i < n; ++i) {
                const Index g = labels_[t][i];
                if (g < 0 || g >= n_clusters) {
                    throw InvalidPartition("label " + std::to_string(g) + " of unit " + std::to_string(i + 1) + " at time "
                                           + std::to_string(t + 1) + " is outside [0, " + std::to_string(n_clusters) + ")");
                }
            }
        }
    }

    /// Every unit in cluster `cluster` at every time.
    static PartitionSequence constant(Index n_clusters, Index units, Index times, Index cluster = 0) {
        return PartitionSequence(
            n_clusters, std::vector<std::vector<Index>>(static_cast<std::size_t>(times),
                                                        std::vector<Index>(static_cast<std::size_t>(units), cluster)));
    }

    Index clusters() const { return clusters_; }
    Index units() const { return labels_.empty() ? 0 : static_cast<Index>(labels_.front().size()); }
    Index times() const { return static_cast<Index>(labels_.size()); }

    Index label(Index i, Index t) const { return labels_[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]; }
    std::span<const Index> slice(Index t) const { return labels_[static_cast<std::size_t>(t)]; }

    int membership(Index i, Index g, Index t) const { return label(i, t) == g ? 1 : 0; }

    /// Binary n-by-G membership matrix at time `t`.
    Matrix indicator(Index t) const {
        Matrix u = Matrix::Zero(units(), clusters_);
        for (Index i = 0; i < units(); ++i) {
            u(i, label(i, t)) = 1.0;
        }
        return u;
    }

    void assign(Index i, Index t, Index g) {
        if (g < 0 || g >= clusters_) {
            throw InvalidPartition("label " + std::to_string(g) + " is outside [0, " + std::to_string(clusters_) + ")");
        }
        labels_[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = g;
    }

    void set_slice(Index t, std::vector<Index> labels) {
        if (static_cast<Index>(labels.size()) != units()) {
            throw InvalidPartition("replacement slice has the wrong number of units");
        }
        labels_[static_cast<std::size_t>(t)] = std::move(labels);
    }

    Index count(Index g, Index t) const {
        Index c = 0;
        for (auto l : slice(t)) {
            c += (l == g);
        }
        return c;
    }

    friend bool operator==(const PartitionSequence&, const PartitionSequence&) = default;

private:
    Index clusters_ = 0;
    std::vector<std::vector<Index>> labels_;
};

/**
 * Per-time G-by-J centroid matrices. Model centroids cover times 0..T-2,
 * empirical centroids cover 0..T-1.
 */
struct CentroidSequence {
    std::vector<Matrix> centers;

    Index times() const { return static_cast<Index>(centers.size()); }
    Index clusters() const { return centers.empty() ? 0 : centers.front().rows(); }
    Index vars() const { return centers.empty() ? 0 : centers.front().cols(); }

    const Matrix& at(Index t) const { return centers[static_cast<std::size_t>(t)]; }
    Matrix& at(Index t) { return centers[static_cast<std::size_t>(t)]; }

    bool finite() const {
        for (const auto& c : centers) {
            if (!c.allFinite()) {
                return false;
            }
        }
        return true;
    }
};

/**
 * VAR(P) law on centroids: x_t = c + A_1 x_{t-1} + ... + A_P x_{t-P}.
 */
struct VarCoefficients {
    Vector intercept;
    std::vector<Matrix> lags;

    Index vars() const { return intercept.size(); }
    Index lag_order() const { return static_cast<Index>(lags.size()); }

    static VarCoefficients zero(Index vars, Index lag_order) {
        return {Vector::Zero(vars), std::vector<Matrix>(static_cast<std::size_t>(lag_order), Matrix::Zero(vars, vars))};
    }

    /// Stacked J-by-(J*P+1) form [c, A_1, ..., A_P].
    Matrix stacked() const {
        const Index J = vars();
        Matrix b(J, J * lag_order() + 1);
        b.col(0) = intercept;
        for (Index p = 0; p < lag_order(); ++p) {
            b.block(0, 1 + p * J, J, J) = lags[static_cast<std::size_t>(p)];
        }
        return b;
    }

    static VarCoefficients from_stacked(const Matrix& b) {
        const Index J = b.rows();
        if (J < 1 || (b.cols() - 1) % J != 0 || b.cols() < J + 1) {
            throw DimensionMismatch("stacked coefficient matrix must be J x (J*P+1), got " + std::to_string(b.rows()) + "x"
                                    + std::to_string(b.cols()));
        }
        const Index P = (b.cols() - 1) / J;
        VarCoefficients out;
        out.intercept = b.col(0);
        for (Index p = 0; p < P; ++p) {
            out.lags.push_back(b.block(0, 1 + p * J, J, J));
        }
        return out;
    }

    bool finite() const {
        if (!intercept.allFinite()) {
            return false;
        }
        for (const auto& a : lags) {
            if (!a.allFinite()) {
                return false;
            }
        }
        return true;
    }
};

/**
 * Number of units in each cluster at each time, as a G-by-T array.
 */
inline IndexMatrix cluster_sizes(const PartitionSequence& part) {
    IndexMatrix sizes = IndexMatrix::Zero(part.clusters(), part.times());
    for (Index t = 0; t < part.times(); ++t) {
        for (auto g : part.slice(t)) {
            ++sizes(g, t);
        }
    }
    return sizes;
}

/// Class-conditional mean of the observations at time `t`. Empty clusters are rejected.
inline Matrix empirical_centroid_slice(const Matrix& x, std::span<const Index> labels, Index n_clusters, Index t = 0) {
    Matrix sums = Matrix::Zero(n_clusters, x.cols());
    std::vector<Index> counts(static_cast<std::size_t>(n_clusters), 0);
    for (Index i = 0; i < x.rows(); ++i) {
        const auto g = labels[static_cast<std::size_t>(i)];
        sums.row(g) += x.row(i);
        ++counts[static_cast<std::size_t>(g)];
    }
    for (Index g = 0; g < n_clusters; ++g) {
        if (counts[static_cast<std::size_t>(g)] == 0) {
            throw EmptyCluster(static_cast<std::size_t>(g), static_cast<std::size_t>(t));
        }
        sums.row(g) /= static_cast<double>(counts[static_cast<std::size_t>(g)]);
    }
    return sums;
}

/**
 * Per-time cluster means for t = 0..T-1.
 */
inline CentroidSequence empirical_centroids(const LongitudinalPanel& panel, const PartitionSequence& part) {
    if (part.units() != panel.units() || part.times() != panel.times()) {
        throw DimensionMismatch("partition is " + std::to_string(part.units()) + " units x " + std::to_string(part.times())
                                + " times but panel is " + std::to_string(panel.units()) + " x "
                                + std::to_string(panel.times()));
    }
    CentroidSequence out;
    out.centers.reserve(static_cast<std::size_t>(panel.times()));
    for (Index t = 0; t < panel.times(); ++t) {
        out.centers.push_back(empirical_centroid_slice(panel.slice(t), part.slice(t), part.clusters(), t));
    }
    return out;
}

}

#endif
