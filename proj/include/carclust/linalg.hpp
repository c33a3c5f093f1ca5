#ifndef CARCLUST_LINALG_HPP
#define CARCLUST_LINALG_HPP

#include <algorithm>
#include <limits>

#include <Eigen/Dense>

namespace carclust {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

namespace linalg {

/**
 * Moore-Penrose pseudo-inverse through a thin SVD.
 * Singular values below `max(rows, cols) * eps * sigma_max` are treated as zero,
 * so the product with a right-hand side gives the minimum-norm least-squares solution.
 */
inline Matrix pseudo_inverse(const Matrix& a) {
    if (a.size() == 0) {
        return Matrix::Zero(a.cols(), a.rows());
    }
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cutoff = static_cast<double>(std::max(a.rows(), a.cols())) * std::numeric_limits<double>::epsilon()
                          * (sv.size() > 0 ? sv(0) : 0.0);

    Vector inv = Vector::Zero(sv.size());
    for (Index k = 0; k < sv.size(); ++k) {
        if (sv(k) > cutoff) {
            inv(k) = 1.0 / sv(k);
        }
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}

}

#endif
