#ifndef CARCLUST_CAR_MODEL_HPP
#define CARCLUST_CAR_MODEL_HPP

#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "panel.hpp"

/**
 * @file car_model.hpp
 * @brief Least-squares objective of the clustered VAR(P) model and its three block updates.
 *
 * With `X_t` the n-by-J data slice, `U_t` the membership indicator and `C_s` the G-by-J model
 * centroids, the model predicts cluster `g` at time `t` as
 * `mu_{g,t} = c + sum_p A_p C_{t-p}[g]` and the loss is
 * `sum_{t=P}^{T-1} || X_t - U_t M_t ||^2` with `M_t = 1 c' + sum_p C_{t-p} A_p'`.
 * Model centroids cover times `0..T-2`; the first `P` partition slices do not enter the loss.
 */

namespace carclust {

namespace detail {

struct GroupSums {
    Matrix sums;
    std::vector<Index> counts;
};

inline GroupSums group_sums(const Matrix& x, std::span<const Index> labels, Index n_clusters) {
    GroupSums out{Matrix::Zero(n_clusters, x.cols()), std::vector<Index>(static_cast<std::size_t>(n_clusters), 0)};
    for (Index i = 0; i < x.rows(); ++i) {
        const auto g = labels[static_cast<std::size_t>(i)];
        out.sums.row(g) += x.row(i);
        ++out.counts[static_cast<std::size_t>(g)];
    }
    return out;
}

inline void check_model_dims(const LongitudinalPanel& panel, Index n_clusters, const CentroidSequence& model,
                             const VarCoefficients& coeffs) {
    const Index J = panel.vars();
    const Index T = panel.times();
    if (coeffs.vars() != J) {
        throw DimensionMismatch("coefficients have " + std::to_string(coeffs.vars()) + " variables, panel has "
                                + std::to_string(J));
    }
    for (const auto& a : coeffs.lags) {
        if (a.rows() != J || a.cols() != J) {
            throw DimensionMismatch("lag matrices must be " + std::to_string(J) + "x" + std::to_string(J));
        }
    }
    if (coeffs.lag_order() < 1) {
        throw DimensionMismatch("coefficients need at least one lag matrix");
    }
    if (model.times() != T - 1) {
        throw DimensionMismatch("model centroids cover " + std::to_string(model.times()) + " times, expected "
                                + std::to_string(T - 1));
    }
    for (const auto& c : model.centers) {
        if (c.rows() != n_clusters || c.cols() != J) {
            throw DimensionMismatch("model centroid slices must be " + std::to_string(n_clusters) + "x" + std::to_string(J)
                                    + ", got " + std::to_string(c.rows()) + "x" + std::to_string(c.cols()));
        }
    }
}

inline void check_partition_dims(const LongitudinalPanel& panel, const PartitionSequence& part) {
    if (part.units() != panel.units() || part.times() != panel.times()) {
        throw DimensionMismatch("partition is " + std::to_string(part.units()) + " units x " + std::to_string(part.times())
                                + " times but panel is " + std::to_string(panel.units()) + " x "
                                + std::to_string(panel.times()));
    }
}

}

/**
 * Predicted cluster centres at time `t >= P`: `1 c' + sum_p C_{t-p} A_p'` (G-by-J).
 */
inline Matrix predicted_centroids(const CentroidSequence& model, const VarCoefficients& coeffs, Index t) {
    const Index G = model.clusters();
    Matrix mu = Matrix::Ones(G, 1) * coeffs.intercept.transpose();
    for (Index p = 1; p <= coeffs.lag_order(); ++p) {
        mu.noalias() += model.at(t - p) * coeffs.lags[static_cast<std::size_t>(p - 1)].transpose();
    }
    return mu;
}

/// Squared distance of every unit to the centre of its assigned cluster.
inline Vector assigned_distances(const Matrix& x, std::span<const Index> labels, const Matrix& centers) {
    Vector d(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
        d(i) = (x.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
    }
    return d;
}

/// Nearest centre per row of `x`; ties go to the lowest cluster index.
inline std::vector<Index> nearest_labels(const Matrix& x, const Matrix& centers) {
    std::vector<Index> labels(static_cast<std::size_t>(x.rows()), 0);
    for (Index i = 0; i < x.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Index g = 0; g < centers.rows(); ++g) {
            const double d = (x.row(i) - centers.row(g)).squaredNorm();
            if (d < best) {
                best = d;
                labels[static_cast<std::size_t>(i)] = g;
            }
        }
    }
    return labels;
}

/**
 * Loss contribution of one identified time slice.
 */
inline double slice_loss(const Matrix& x, std::span<const Index> labels, const Matrix& mu) {
    return assigned_distances(x, labels, mu).sum();
}

/**
 * Least-squares loss summed over t = P..T-1.
 */
inline double objective(const LongitudinalPanel& panel, const PartitionSequence& part, const CentroidSequence& model,
                        const VarCoefficients& coeffs) {
    detail::check_partition_dims(panel, part);
    detail::check_model_dims(panel, part.clusters(), model, coeffs);
    const Index P = coeffs.lag_order();
    if (panel.times() <= P) {
        throw DimensionMismatch("lag order " + std::to_string(P) + " needs more than " + std::to_string(panel.times())
                                + " time points");
    }

    double total = 0;
    for (Index t = P; t < panel.times(); ++t) {
        total += slice_loss(panel.slice(t), part.slice(t), predicted_centroids(model, coeffs, t));
    }
    return total;
}

/**
 * Exact minimizer of the loss over the single centroid slice `C_s`, all other blocks fixed.
 *
 * `C_s` enters the terms `t = s + l` for lags `l` with `P <= t <= T-1`. The normal equations
 * decouple by cluster: `z_g (sum_l n_{g,t} A_l'A_l) = sum_l (sum_{i in g at t} r_i) A_l`,
 * where `r_i` is the residual with the `l`-th lag contribution removed. Each system is solved
 * with a pseudo-inverse, giving the minimum-norm row when the lag matrices are singular.
 */
inline Matrix update_centroid_slice(const LongitudinalPanel& panel, const PartitionSequence& part,
                                    const VarCoefficients& coeffs, const CentroidSequence& current, Index s) {
    const Index P = coeffs.lag_order();
    const Index T = panel.times();
    const Index G = part.clusters();
    const Index J = panel.vars();

    std::vector<Matrix> normal(static_cast<std::size_t>(G), Matrix::Zero(J, J));
    Matrix rhs = Matrix::Zero(G, J);

    for (Index l = 1; l <= P; ++l) {
        const Index t = s + l;
        if (t < P || t > T - 1) {
            continue;
        }
        const Matrix& a = coeffs.lags[static_cast<std::size_t>(l - 1)];
        const Matrix gram = a.transpose() * a;

        Matrix others = Matrix::Ones(G, 1) * coeffs.intercept.transpose();
        for (Index p = 1; p <= P; ++p) {
            if (p != l) {
                others.noalias() += current.at(t - p) * coeffs.lags[static_cast<std::size_t>(p - 1)].transpose();
            }
        }

        const auto grouped = detail::group_sums(panel.slice(t), part.slice(t), G);
        for (Index g = 0; g < G; ++g) {
            const auto n_g = static_cast<double>(grouped.counts[static_cast<std::size_t>(g)]);
            rhs.row(g) += (grouped.sums.row(g) - n_g * others.row(g)) * a;
            normal[static_cast<std::size_t>(g)] += n_g * gram;
        }
    }

    Matrix out(G, J);
    for (Index g = 0; g < G; ++g) {
        out.row(g) = (linalg::pseudo_inverse(normal[static_cast<std::size_t>(g)]) * rhs.row(g).transpose()).transpose();
    }
    return out;
}

/**
 * Centroid block update. One Gauss-Seidel sweep over `s = 0..T-2`, each slice replaced by
 * its exact conditional minimizer. For P = 1 the slices are independent and the sweep equals
 * `C_s = (U'U)^{-1} U' (X_{s+1} - 1 c') A_1 (A_1'A_1)^+`.
 *
 * Throws `EmptyCluster` if a cluster has no members at some t >= P, and `SingularDesign`
 * if every lag matrix is zero (the loss then does not depend on the centroids).
 */
inline CentroidSequence update_centroids(const LongitudinalPanel& panel, const PartitionSequence& part,
                                         const VarCoefficients& coeffs, const CentroidSequence& current) {
    detail::check_partition_dims(panel, part);
    detail::check_model_dims(panel, part.clusters(), current, coeffs);
    const Index P = coeffs.lag_order();
    if (panel.times() < P + 1) {
        throw DegenerateDesign("lag order " + std::to_string(P) + " leaves no identified time slices");
    }

    for (Index t = P; t < panel.times(); ++t) {
        const auto sizes = detail::group_sums(panel.slice(t), part.slice(t), part.clusters()).counts;
        for (Index g = 0; g < part.clusters(); ++g) {
            if (sizes[static_cast<std::size_t>(g)] == 0) {
                throw EmptyCluster(static_cast<std::size_t>(g), static_cast<std::size_t>(t));
            }
        }
    }

    bool all_zero = true;
    for (const auto& a : coeffs.lags) {
        all_zero = all_zero && a.isZero(0.0);
    }
    if (all_zero) {
        throw SingularDesign("every lag matrix is zero; centroids are not identified");
    }

    CentroidSequence next = current;
    for (Index s = 0; s + 1 < panel.times(); ++s) {
        next.at(s) = update_centroid_slice(panel, part, coeffs, next, s);
    }
    return next;
}

/**
 * Augmented design `[1, C_{t-1}, ..., C_{t-P}]` for time `t` (G-by-(J*P+1)).
 */
inline Matrix augmented_centroids(const CentroidSequence& model, Index lag_order, Index t) {
    const Index G = model.clusters();
    const Index J = model.vars();
    Matrix d(G, J * lag_order + 1);
    d.col(0).setOnes();
    for (Index p = 1; p <= lag_order; ++p) {
        d.block(0, 1 + (p - 1) * J, G, J) = model.at(t - p);
    }
    return d;
}

/**
 * Coefficient block update: minimum-norm solution of the stacked regression of `X_t` on
 * `U_t [1, C_{t-1}, ..., C_{t-P}]` over t = P..T-1.
 */
inline VarCoefficients update_coefficients(const LongitudinalPanel& panel, const PartitionSequence& part,
                                           const CentroidSequence& model, Index lag_order) {
    detail::check_partition_dims(panel, part);
    const Index T = panel.times();
    const Index J = panel.vars();
    const Index G = part.clusters();
    if (lag_order < 1) {
        throw DimensionMismatch("lag order must be at least 1");
    }
    if (T <= lag_order) {
        throw DegenerateDesign("stacked design is empty: " + std::to_string(T) + " time points for lag order "
                               + std::to_string(lag_order));
    }
    detail::check_model_dims(panel, G, model, VarCoefficients::zero(J, lag_order));

    const Index K = J * lag_order + 1;
    Matrix gram = Matrix::Zero(K, K);
    Matrix cross = Matrix::Zero(K, J);
    for (Index t = lag_order; t < T; ++t) {
        const Matrix d = augmented_centroids(model, lag_order, t);
        const auto grouped = detail::group_sums(panel.slice(t), part.slice(t), G);
        Vector n(G);
        for (Index g = 0; g < G; ++g) {
            n(g) = static_cast<double>(grouped.counts[static_cast<std::size_t>(g)]);
        }
        gram.noalias() += d.transpose() * n.asDiagonal() * d;
        cross.noalias() += d.transpose() * grouped.sums;
    }

    const Matrix b_transposed = linalg::pseudo_inverse(gram) * cross;
    return VarCoefficients::from_stacked(b_transposed.transpose());
}

/**
 * Lloyd iterations on one slice from the given starting centres. A centre that loses all its
 * units stays where it is. Returns the labels and the final centres.
 */
inline std::pair<std::vector<Index>, Matrix> lloyd_slice(const Matrix& x, Matrix centers, Index max_iters = 100) {
    std::vector<Index> labels = nearest_labels(x, centers);
    for (Index it = 0; it < max_iters; ++it) {
        const auto grouped = detail::group_sums(x, labels, centers.rows());
        for (Index g = 0; g < centers.rows(); ++g) {
            const auto c = grouped.counts[static_cast<std::size_t>(g)];
            if (c > 0) {
                centers.row(g) = grouped.sums.row(g) / static_cast<double>(c);
            }
        }
        auto next = nearest_labels(x, centers);
        if (next == labels) {
            break;
        }
        labels = std::move(next);
    }
    return {std::move(labels), std::move(centers)};
}

/**
 * Labels for the slices the loss ignores (t < P), filled backward from t = P-1. Slice t runs
 * Lloyd iterations started from the class means of slice t+1, falling back to `anchor_centers`
 * (the centres behind the labels at t = P) for clusters that are empty there.
 * `labels` holds all T slices; only the first P are overwritten.
 */
inline void assign_static_slices(const LongitudinalPanel& panel, std::vector<std::vector<Index>>& labels,
                                 Matrix anchor_centers, Index lag_order) {
    Matrix centers = std::move(anchor_centers);
    for (Index t = lag_order - 1; t >= 0; --t) {
        const auto next = static_cast<std::size_t>(t + 1);
        const auto grouped = detail::group_sums(panel.slice(t + 1), labels[next], centers.rows());
        for (Index g = 0; g < centers.rows(); ++g) {
            const auto c = grouped.counts[static_cast<std::size_t>(g)];
            if (c > 0) {
                centers.row(g) = grouped.sums.row(g) / static_cast<double>(c);
            }
        }
        auto [slice, fitted] = lloyd_slice(panel.slice(t), centers);
        labels[static_cast<std::size_t>(t)] = std::move(slice);
        centers = std::move(fitted);
    }
}

/**
 * Partition block update: every unit at t >= P goes to the nearest predicted centre (ties to the
 * lowest cluster index); the first P slices, which the loss ignores, follow `assign_static_slices`.
 * Clusters may come out empty.
 */
inline PartitionSequence update_partition(const LongitudinalPanel& panel, const CentroidSequence& model,
                                          const VarCoefficients& coeffs) {
    detail::check_model_dims(panel, model.clusters(), model, coeffs);
    const Index P = coeffs.lag_order();
    std::vector<std::vector<Index>> labels(static_cast<std::size_t>(panel.times()));
    for (Index t = P; t < panel.times(); ++t) {
        labels[static_cast<std::size_t>(t)] = nearest_labels(panel.slice(t), predicted_centroids(model, coeffs, t));
    }
    assign_static_slices(panel, labels, predicted_centroids(model, coeffs, P), P);
    return PartitionSequence(model.clusters(), std::move(labels));
}

}

#endif
