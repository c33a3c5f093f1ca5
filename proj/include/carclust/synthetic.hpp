#ifndef CARCLUST_SYNTHETIC_HPP
#define CARCLUST_SYNTHETIC_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "errors.hpp"
#include "panel.hpp"

/**
 * @file synthetic.hpp
 * @brief Seeded simulation of clustered panels whose centroids follow a VAR(P) law.
 */

namespace carclust {

struct SyntheticSpec {
    Index units = 30;
    Index vars = 2;
    Index times = 6;
    Index clusters = 3;
    VarCoefficients coefficients = VarCoefficients::zero(2, 1);
    /// G-by-J centroids at the first time; earlier lags are held at these values.
    Matrix initial_centroids;
    /// Standard deviation of both the centroid innovations and the unit-level noise.
    double noise_scale = 1.0;
    /// Per unit and time step, probability that the membership is redrawn uniformly.
    double switch_prob = 0.0;
    std::uint64_t seed = 0;
    bool require_stationary = false;
};

struct GeneratedPanel {
    LongitudinalPanel panel;
    PartitionSequence partition;
    VarCoefficients coefficients;
    /// True centroids for all T times.
    CentroidSequence centroids;
};

/// Spectral radius of the VAR companion matrix.
inline double companion_spectral_radius(const VarCoefficients& coeffs) {
    const Index J = coeffs.vars();
    const Index P = coeffs.lag_order();
    Matrix companion = Matrix::Zero(J * P, J * P);
    for (Index p = 0; p < P; ++p) {
        companion.block(0, p * J, J, J) = coeffs.lags[static_cast<std::size_t>(p)];
    }
    if (P > 1) {
        companion.block(J, 0, J * (P - 1), J * (P - 1)).setIdentity();
    }
    Eigen::EigenSolver<Matrix> es(companion, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline void validate(const SyntheticSpec& spec) {
    if (spec.units < 2 || spec.vars < 1 || spec.times < 2) {
        throw InvalidSpec("synthetic panel needs units >= 2, vars >= 1 and times >= 2");
    }
    if (spec.clusters < 1 || spec.clusters > spec.units) {
        throw InvalidSpec("clusters must lie in [1, units], got " + std::to_string(spec.clusters));
    }
    if (spec.coefficients.vars() != spec.vars || spec.coefficients.lag_order() < 1) {
        throw InvalidSpec("generating coefficients must have " + std::to_string(spec.vars) + " variables and at least one lag");
    }
    for (const auto& a : spec.coefficients.lags) {
        if (a.rows() != spec.vars || a.cols() != spec.vars) {
            throw InvalidSpec("lag matrices must be " + std::to_string(spec.vars) + "x" + std::to_string(spec.vars));
        }
    }
    if (!spec.coefficients.finite()) {
        throw InvalidSpec("generating coefficients must be finite");
    }
    if (spec.initial_centroids.rows() != spec.clusters || spec.initial_centroids.cols() != spec.vars
        || !spec.initial_centroids.allFinite()) {
        throw InvalidSpec("initial centroids must be a finite " + std::to_string(spec.clusters) + "x"
                          + std::to_string(spec.vars) + " matrix");
    }
    if (!std::isfinite(spec.noise_scale) || spec.noise_scale < 0) {
        throw InvalidSpec("noise scale must be finite and non-negative");
    }
    if (!(spec.switch_prob >= 0 && spec.switch_prob <= 1)) {
        throw InvalidSpec("switch probability must lie in [0, 1]");
    }
    if (spec.require_stationary && companion_spectral_radius(spec.coefficients) >= 1) {
        throw InvalidSpec("generating VAR is not stationary (companion spectral radius >= 1)");
    }
}

/**
 * Simulates centroid paths, memberships and observations, in that order, from one
 * `mt19937_64` stream seeded with `spec.seed`.
 */
inline GeneratedPanel generate_panel(const SyntheticSpec& spec) {
    validate(spec);
    const Index n = spec.units, J = spec.vars, T = spec.times, G = spec.clusters;
    const Index P = spec.coefficients.lag_order();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](Index rows, Index cols) {
        Matrix m(rows, cols);
        for (Index r = 0; r < rows; ++r) {
            for (Index c = 0; c < cols; ++c) {
                m(r, c) = spec.noise_scale * normal(rng);
            }
        }
        return m;
    };

    CentroidSequence centroids;
    centroids.centers.push_back(spec.initial_centroids);
    for (Index t = 1; t < T; ++t) {
        Matrix next = Matrix::Ones(G, 1) * spec.coefficients.intercept.transpose();
        for (Index p = 1; p <= P; ++p) {
            const Matrix& lagged = centroids.at(std::max<Index>(t - p, 0));
            next.noalias() += lagged * spec.coefficients.lags[static_cast<std::size_t>(p - 1)].transpose();
        }
        next += draw(G, J);
        centroids.centers.push_back(std::move(next));
    }

    std::uniform_int_distribution<Index> pick(0, G - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::vector<Index>> labels(static_cast<std::size_t>(T), std::vector<Index>(static_cast<std::size_t>(n)));
    for (auto& l : labels[0]) {
        l = pick(rng);
    }
    for (Index t = 1; t < T; ++t) {
        for (Index i = 0; i < n; ++i) {
            const auto prev = labels[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(i)];
            labels[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = unif(rng) < spec.switch_prob ? pick(rng) : prev;
        }
    }
    PartitionSequence partition(G, std::move(labels));

    std::vector<Matrix> slices;
    slices.reserve(static_cast<std::size_t>(T));
    for (Index t = 0; t < T; ++t) {
        Matrix x = draw(n, J);
        for (Index i = 0; i < n; ++i) {
            x.row(i) += centroids.at(t).row(partition.label(i, t));
        }
        slices.push_back(std::move(x));
    }

    return {LongitudinalPanel::from_slices(std::move(slices)), std::move(partition), spec.coefficients, std::move(centroids)};
}

/**
 * Well-separated scenario with identity dynamics and zero intercept: initial centroids lie on a
 * grid with spacing `spread`, so every pair starts at least `spread` apart.
 */
inline SyntheticSpec separated_spec(Index units, Index vars, Index times, Index clusters, double spread, double noise,
                                    double switch_prob, std::uint64_t seed, Index lag_order = 1) {
    SyntheticSpec spec;
    spec.units = units;
    spec.vars = vars;
    spec.times = times;
    spec.clusters = clusters;
    spec.coefficients = VarCoefficients::zero(vars, lag_order);
    spec.coefficients.lags[0] = Matrix::Identity(vars, vars);
    spec.initial_centroids = Matrix(clusters, vars);
    for (Index g = 0; g < clusters; ++g) {
        for (Index j = 0; j < vars; ++j) {
            spec.initial_centroids(g, j) = spread * static_cast<double>(j % 2 == 0 ? g : (g * g) % clusters);
        }
    }
    spec.noise_scale = noise;
    spec.switch_prob = switch_prob;
    spec.seed = seed;
    return spec;
}

}

#endif
