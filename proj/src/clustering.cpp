#include "cfl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace cfl {

Matrix madc(const Matrix& cosine) {
    const Eigen::Index n = cosine.rows();
    if (n != cosine.cols()) throw NumericError("madc: matrix must be square");
    if (n < 3) throw NumericError("madc: needs n >= 3 (divisor n-2)");
    Matrix out = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (Eigen::Index z = 0; z < n; ++z) {
                if (z == i || z == j) continue;
                acc += std::abs(cosine(i, z) - cosine(j, z));
            }
            out(i, j) = out(j, i) = acc / static_cast<double>(n - 2);
        }
    }
    return out;
}

namespace {

// Thin orthonormal basis of the columns of y.
Matrix thin_q(const Matrix& y) {
    Eigen::HouseholderQR<Matrix> qr(y);
    return qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
}

}  // namespace

DirectionBasis truncated_svd(const Matrix& x, int m) {
    const Eigen::Index d = x.rows();
    const Eigen::Index n = x.cols();
    if (m < 1 || m > std::min(d, n))
        throw NumericError("truncated_svd: m must satisfy 1 <= m <= min(rows, cols)");

    constexpr int kOversample = 8;
    constexpr int kPowerIterations = 4;
    const Eigen::Index q = std::min<Eigen::Index>(m + kOversample, std::min(d, n));

    // fixed internal seed: the decomposition is a pure function of its inputs
    rng::Engine eng(rng::derive(0x00c0ffee, "svd", static_cast<std::uint64_t>(d * 1315423911ULL + static_cast<std::uint64_t>(n))));
    Matrix sketch(n, q);
    for (Eigen::Index i = 0; i < sketch.size(); ++i) sketch.data()[i] = eng.normal();

    Matrix basis = thin_q(x * sketch);
    for (int it = 0; it < kPowerIterations; ++it)
        basis = thin_q(x * (x.transpose() * basis));

    const Matrix small = basis.transpose() * x;  // q x n
    Eigen::JacobiSVD<Matrix> svd(small, Eigen::ComputeThinU);

    DirectionBasis out;
    out.directions.resize(d, m);
    out.singular_values.resize(m);
    const double tol = 1e-12 * std::max(1.0, svd.singularValues()(0));
    int filled = 0;
    for (int i = 0; i < m && i < svd.singularValues().size(); ++i) {
        if (svd.singularValues()(i) <= tol) break;
        out.directions.col(filled) = basis * svd.matrixU().col(i);
        out.singular_values(filled) = svd.singularValues()(i);
        ++filled;
    }
    if (filled < m) {
        // rank deficit: pad from the orthogonal complement, zero singular value
        out.rank_deficient = true;
        for (int i = filled; i < m; ++i) {
            Eigen::VectorXd v(d);
            while (true) {
                for (Eigen::Index r = 0; r < d; ++r) v(r) = eng.normal();
                for (int j = 0; j < i; ++j)
                    v -= out.directions.col(j).dot(v) * out.directions.col(j);
                const double norm = v.norm();
                if (norm > 1e-8) {
                    v /= norm;
                    break;
                }
            }
            out.directions.col(i) = v;
            out.singular_values(i) = 0.0;
        }
    }
    // sign convention: largest-magnitude entry of every direction is positive
    for (int i = 0; i < m; ++i) {
        Eigen::Index arg = 0;
        out.directions.col(i).cwiseAbs().maxCoeff(&arg);
        if (out.directions(arg, i) < 0.0) out.directions.col(i) = -out.directions.col(i);
    }
    return out;
}

Matrix edc_embed(const Matrix& deltas, const DirectionBasis& basis) {
    if (deltas.cols() != basis.directions.rows())
        throw NumericError("edc_embed: dimension mismatch");
    const auto m = static_cast<double>(basis.directions.cols());
    return cosine_kernel(deltas, basis.directions.transpose()) / m;
}

KmeansResult kmeanspp(const Matrix& points, int k, rng::Engine& eng) {
    const Eigen::Index n = points.rows();
    if (k < 1 || n < k) throw NumericError("kmeanspp: needs n >= k >= 1");

    KmeansResult res;
    res.centers.resize(k, points.cols());

    // seeding: first center uniform, then proportional to squared distance
    res.centers.row(0) = points.row(static_cast<Eigen::Index>(eng.below(static_cast<std::uint64_t>(n))));
    Eigen::VectorXd d2 =
        (points.rowwise() - res.centers.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = d2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double u = eng.uniform();
            double cum = 0.0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                cum += d2(i) / total;
                if (u < cum) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(eng.below(static_cast<std::uint64_t>(n)));
        }
        res.centers.row(c) = points.row(pick);
        d2 = d2.cwiseMin(
            (points.rowwise() - res.centers.row(c)).rowwise().squaredNorm());
    }

    // Lloyd iterations to the assignment fixpoint
    res.assignments.assign(static_cast<std::size_t>(n), -1);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    constexpr int kMaxIterations = 100;
    for (res.iterations = 1; res.iterations <= kMaxIterations; ++res.iterations) {
        bool changed = false;
        Eigen::VectorXd nearest_d2(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = (points.row(i) - res.centers.row(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                const double d = (points.row(i) - res.centers.row(c)).squaredNorm();
                if (d < best_d) {  // strict: ties keep the lowest center index
                    best_d = d;
                    best = c;
                }
            }
            nearest_d2(i) = best_d;
            if (res.assignments[static_cast<std::size_t>(i)] != best) {
                res.assignments[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        if (!changed) break;

        std::fill(counts.begin(), counts.end(), 0);
        Matrix sums = Matrix::Zero(k, points.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            const int c = res.assignments[static_cast<std::size_t>(i)];
            sums.row(c) += points.row(i);
            ++counts[static_cast<std::size_t>(c)];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                res.centers.row(c) =
                    sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            } else {
                // empty cluster: re-seed at the point farthest from its center
                Eigen::Index far = 0;
                nearest_d2.maxCoeff(&far);
                res.centers.row(c) = points.row(far);
                nearest_d2(far) = 0.0;
                res.reseeded = true;
            }
        }
    }
    return res;
}

LinkageResult hierarchical_complete(const Matrix& proximity, int m) {
    const Eigen::Index n = proximity.rows();
    if (n != proximity.cols())
        throw NumericError("hierarchical: proximity must be square");
    if (m < 1 || n < m) throw NumericError("hierarchical: needs n >= m >= 1");

    std::vector<std::vector<int>> clusters(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        clusters[static_cast<std::size_t>(i)] = {static_cast<int>(i)};

    LinkageResult res;
    auto linkage = [&](const std::vector<int>& a, const std::vector<int>& b) {
        double worst = -std::numeric_limits<double>::infinity();
        for (int i : a)
            for (int j : b) worst = std::max(worst, proximity(i, j));
        return worst;
    };
    while (static_cast<int>(clusters.size()) > m) {
        std::size_t best_a = 0, best_b = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a + 1 < clusters.size(); ++a) {
            for (std::size_t b = a + 1; b < clusters.size(); ++b) {
                const double d = linkage(clusters[a], clusters[b]);
                if (d < best) {  // strict: ties keep the lowest (a, b) pair
                    best = d;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        res.merges.emplace_back(static_cast<int>(best_a), static_cast<int>(best_b));
        clusters[best_a].insert(clusters[best_a].end(), clusters[best_b].begin(),
                                clusters[best_b].end());
        clusters.erase(clusters.begin() + static_cast<long>(best_b));
    }

    // label clusters by their smallest member for deterministic output
    for (auto& members : clusters) std::sort(members.begin(), members.end());
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    res.assignments.assign(static_cast<std::size_t>(n), -1);
    for (std::size_t c = 0; c < clusters.size(); ++c)
        for (int i : clusters[c])
            res.assignments[static_cast<std::size_t>(i)] = static_cast<int>(c);
    return res;
}

}  // namespace cfl
