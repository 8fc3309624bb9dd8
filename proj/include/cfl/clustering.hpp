#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cfl/errors.hpp"
#include "cfl/rng.hpp"
#include "cfl/types.hpp"

namespace cfl {

// Pairwise cosine similarities between the rows of two matrices:
// out(i, j) = <a_i, b_j> / (||a_i|| ||b_j||), clamped to [-1, 1].
// Throws NumericError naming the first zero row encountered.
template <typename DerivedA, typename DerivedB>
Matrix cosine_kernel(const Eigen::MatrixBase<DerivedA>& a_rows,
                     const Eigen::MatrixBase<DerivedB>& b_rows) {
    const Matrix a = a_rows;
    const Matrix b = b_rows;
    if (a.cols() != b.cols())
        throw NumericError("cosine_kernel: dimension mismatch");
    const Eigen::VectorXd na = a.rowwise().norm();
    const Eigen::VectorXd nb = b.rowwise().norm();
    for (Eigen::Index i = 0; i < na.size(); ++i)
        if (na(i) == 0.0)
            throw NumericError("cosine_kernel: zero row " + std::to_string(i) +
                               " on left side");
    for (Eigen::Index j = 0; j < nb.size(); ++j)
        if (nb(j) == 0.0)
            throw NumericError("cosine_kernel: zero row " + std::to_string(j) +
                               " on right side");
    Matrix out = (na.cwiseInverse().asDiagonal() * (a * b.transpose())) *
                 nb.cwiseInverse().asDiagonal();
    return out.cwiseMin(1.0).cwiseMax(-1.0);
}

// Mean of Absolute Differences of pairwise Cosine similarity:
// out(i, j) = (1 / (n-2)) * sum_{z != i,j} |M(i,z) - M(j,z)|.
// Symmetric with zero diagonal; requires n >= 3.
Matrix madc(const Matrix& cosine);

struct DirectionBasis {
    Matrix directions;               // d_w x m, orthonormal columns
    Eigen::VectorXd singular_values; // m, nonincreasing
    bool rank_deficient = false;     // surplus columns drawn from the
                                     // orthogonal complement, zero sigma
};

// Top-m left singular vectors of x (d_w x n) by randomized subspace
// iteration (oversampling 8, 4 power iterations). Column signs are fixed so
// the largest-magnitude entry of each direction is positive.
DirectionBasis truncated_svd(const Matrix& x, int m);

// The n x m matrix (1/m) * cosine_kernel(deltas, V^T). Euclidean distances
// between its rows are the EDC dissimilarities.
Matrix edc_embed(const Matrix& deltas, const DirectionBasis& basis);

struct KmeansResult {
    std::vector<int> assignments;
    Matrix centers;       // k x dim
    int iterations = 0;
    bool reseeded = false;  // an empty cluster was re-seeded at the farthest point
};

// K-Means++ seeding followed by Lloyd iterations until the assignment
// fixpoint or 100 iterations. Nearest-center ties break to the lowest index.
KmeansResult kmeanspp(const Matrix& points, int k, rng::Engine& eng);

struct LinkageResult {
    std::vector<int> assignments;                // labels ordered by smallest member
    std::vector<std::pair<int, int>> merges;     // active-list positions merged, in order
};

// Agglomerative clustering on a proximity matrix with complete linkage,
// merging until m clusters remain; ties break to the lowest pair index.
LinkageResult hierarchical_complete(const Matrix& proximity, int m);

}  // namespace cfl
