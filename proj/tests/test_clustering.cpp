#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cfl/clustering.hpp"
#include "cfl/errors.hpp"

#include "oracles.hpp"

using namespace cfl;

namespace {

Matrix random_rows(Eigen::Index n, Eigen::Index d, rng::Engine& eng) {
    Matrix m(n, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = eng.normal();
    return m;
}

// k tight, well-separated blobs
Matrix blob_points(int k, int per_blob, int dim, rng::Engine& eng,
                   std::vector<int>* truth = nullptr) {
    Matrix centers = 20.0 * random_rows(k, dim, eng);
    Matrix pts(k * per_blob, dim);
    for (int b = 0; b < k; ++b)
        for (int i = 0; i < per_blob; ++i) {
            pts.row(b * per_blob + i) =
                centers.row(b) + 0.05 * random_rows(1, dim, eng);
            if (truth) truth->push_back(b);
        }
    return pts;
}

}  // namespace

TEST_CASE("cosine kernel: self-similarity, orthogonality, pairwise oracle") {
    Matrix v(1, 3);
    v << 1.0, 2.0, -1.0;
    CHECK(cosine_kernel(v, v)(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

    Matrix ortho(2, 2);
    ortho << 1.0, 0.0, 0.0, 5.0;
    CHECK(cosine_kernel(ortho, ortho)(0, 1) == doctest::Approx(0.0));

    rng::Engine eng(4);
    const Matrix a = random_rows(3, 5, eng);
    const Matrix m = cosine_kernel(a, a);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double dot = 0, na = 0, nb = 0;
            for (int d = 0; d < 5; ++d) {
                dot += a(i, d) * a(j, d);
                na += a(i, d) * a(i, d);
                nb += a(j, d) * a(j, d);
            }
            CHECK(std::abs(m(i, j) - dot / std::sqrt(na * nb)) < 1e-12);
            CHECK(m(i, j) >= -1.0);
            CHECK(m(i, j) <= 1.0);
        }

    Matrix with_zero = a;
    with_zero.row(1).setZero();
    CHECK_THROWS_WITH_AS(cosine_kernel(with_zero, a), doctest::Contains("row 1"),
                         NumericError);
}

TEST_CASE("madc: identical rows, hand case, brute-force oracle") {
    // two clients with identical similarity profiles are indistinguishable
    Matrix m(3, 3);
    m << 1.0, 0.5, 0.2, 0.5, 1.0, 0.2, 0.2, 0.2, 1.0;
    const Matrix p = madc(m);
    CHECK(p(0, 1) == doctest::Approx(0.0));

    // n=3 hand case: out[0][1] = |M(0,2) - M(1,2)| / 1
    Matrix h(3, 3);
    h << 1.0, 0.3, 1.0, 0.3, 1.0, 0.0, 1.0, 0.0, 1.0;
    CHECK(madc(h)(0, 1) == doctest::Approx(1.0));

    rng::Engine eng(5);
    Matrix r = random_rows(5, 5, eng);
    r = ((r + r.transpose()) / 2.0).eval();
    const Matrix ours = madc(r);
    const Matrix brute = oracle::madc_bruteforce(r);
    CHECK((ours - brute).cwiseAbs().maxCoeff() < 1e-12);
    for (int i = 0; i < 5; ++i) {
        CHECK(ours(i, i) == 0.0);
        for (int j = 0; j < 5; ++j) CHECK(ours(i, j) == ours(j, i));
    }

    CHECK_THROWS_AS(madc(Matrix::Identity(2, 2)), NumericError);
}

TEST_CASE("truncated svd: diagonal case and rank-1 case") {
    Matrix x = Matrix::Zero(3, 3);
    x(0, 0) = 3.0;
    x(1, 1) = 2.0;
    x(2, 2) = 1.0;
    const DirectionBasis b = truncated_svd(x, 2);
    CHECK(b.singular_values(0) == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(b.singular_values(1) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(std::abs(b.directions(0, 0)) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(b.directions(1, 1)) == doctest::Approx(1.0).epsilon(1e-10));
    // sign convention: largest-magnitude entry positive
    CHECK(b.directions(0, 0) > 0.0);
    CHECK(b.directions(1, 1) > 0.0);

    rng::Engine eng(6);
    Eigen::VectorXd u = random_rows(8, 1, eng);
    Eigen::VectorXd v = random_rows(4, 1, eng);
    const Matrix rank1 = u * v.transpose();
    const DirectionBasis r1 = truncated_svd(rank1, 1);
    const double align = std::abs(r1.directions.col(0).dot(u.normalized()));
    CHECK(align >= 1.0 - 1e-8);
}

TEST_CASE("truncated svd singular values match the Gram-matrix oracle") {
    rng::Engine eng(7);
    const Matrix x = random_rows(20, 6, eng);  // d_w x n
    const DirectionBasis b = truncated_svd(x, 3);
    const auto ev = oracle::jacobi_eigenvalues(x.transpose() * x);
    for (int i = 0; i < 3; ++i) {
        const double expected = std::sqrt(std::max(0.0, ev[static_cast<std::size_t>(i)]));
        CHECK(std::abs(b.singular_values(i) - expected) / expected < 1e-6);
    }
    // orthonormality
    const Matrix gram = b.directions.transpose() * b.directions;
    CHECK((gram - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-6);
    // nonincreasing
    CHECK(b.singular_values(0) >= b.singular_values(1));
    CHECK(b.singular_values(1) >= b.singular_values(2));
}

TEST_CASE("truncated svd pads past the rank with flagged zero directions") {
    rng::Engine eng(8);
    Eigen::VectorXd u = random_rows(10, 1, eng);
    Eigen::VectorXd v = random_rows(5, 1, eng);
    const Matrix rank1 = u * v.transpose();
    const DirectionBasis b = truncated_svd(rank1, 3);
    CHECK(b.rank_deficient);
    CHECK(b.singular_values(0) > 0.0);
    CHECK(b.singular_values(1) == 0.0);
    CHECK(b.singular_values(2) == 0.0);
    const Matrix gram = b.directions.transpose() * b.directions;
    CHECK((gram - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-6);

    CHECK_THROWS_AS(truncated_svd(rank1, 6), NumericError);  // m > min(d, n)
}

TEST_CASE("edc embedding realizes the pairwise formula with bounded entries") {
    rng::Engine eng(9);
    const int n = 4, dw = 30, m = 2;
    const Matrix deltas = random_rows(n, dw, eng);
    const DirectionBasis basis = truncated_svd(deltas.transpose(), m);
    const Matrix emb = edc_embed(deltas, basis);
    CHECK(emb.rows() == n);
    CHECK(emb.cols() == m);
    CHECK(emb.maxCoeff() <= 1.0 / m + 1e-15);
    CHECK(emb.minCoeff() >= -1.0 / m - 1e-15);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double direct = oracle::edc_direct(deltas, basis.directions, i, j);
            CHECK(std::abs((emb.row(i) - emb.row(j)).norm() - direct) < 1e-12);
        }
    // identical deltas embed to identical rows
    Matrix dup = deltas;
    dup.row(1) = dup.row(0);
    const Matrix emb2 = edc_embed(dup, basis);
    CHECK((emb2.row(0) - emb2.row(1)).norm() == 0.0);
}

TEST_CASE("kmeans++ recovers separated blobs and the trivial single cluster") {
    rng::Engine data_eng(10);
    std::vector<int> truth;
    const Matrix pts = blob_points(2, 4, 3, data_eng, &truth);

    rng::Engine eng(11);
    const KmeansResult res = kmeanspp(pts, 2, eng);
    CHECK(oracle::same_partition(res.assignments, truth));
    const std::vector<int> optimal = oracle::optimal_kpartition(pts, 2);
    CHECK(oracle::same_partition(res.assignments, optimal));

    rng::Engine eng2(12);
    const KmeansResult one = kmeanspp(pts, 1, eng2);
    for (int a : one.assignments) CHECK(a == 0);
}

TEST_CASE("kmeans++ assignments are invariant to positive scaling") {
    rng::Engine data_eng(13);
    const Matrix pts = random_rows(12, 3, data_eng);
    for (double c : {1e-3, 1.0, 1e3}) {
        rng::Engine e1(14), e2(14);
        const KmeansResult base = kmeanspp(pts, 3, e1);
        const KmeansResult scaled = kmeanspp((c * pts).eval(), 3, e2);
        CHECK(base.assignments == scaled.assignments);
    }
}

TEST_CASE("kmeans++ separates groups deterministically per seed") {
    Matrix pts(4, 1);
    pts << 0.0, 0.0, 10.0, 10.0;
    rng::Engine eng(15);
    const KmeansResult res = kmeanspp(pts, 2, eng);
    CHECK(res.assignments[0] == res.assignments[1]);
    CHECK(res.assignments[2] == res.assignments[3]);
    CHECK(res.assignments[0] != res.assignments[2]);

    rng::Engine e1(16), e2(16);
    CHECK(kmeanspp(pts, 2, e1).assignments == kmeanspp(pts, 2, e2).assignments);
}

TEST_CASE("hierarchical complete linkage: singletons, pairs, merge oracle") {
    rng::Engine eng(16);
    Matrix prox = random_rows(6, 6, eng).cwiseAbs();
    prox = ((prox + prox.transpose()) / 2.0).eval();
    prox.diagonal().setZero();

    // m = n: identity clustering
    const LinkageResult singles = hierarchical_complete(prox, 6);
    for (int i = 0; i < 6; ++i) CHECK(singles.assignments[static_cast<std::size_t>(i)] == i);
    CHECK(singles.merges.empty());

    // two tight pairs in proximity space
    Matrix p4 = Matrix::Constant(4, 4, 10.0);
    p4.diagonal().setZero();
    p4(0, 1) = p4(1, 0) = 0.1;
    p4(2, 3) = p4(3, 2) = 0.2;
    const LinkageResult pairs = hierarchical_complete(p4, 2);
    CHECK(pairs.assignments == std::vector<int>{0, 0, 1, 1});

    // full merge sequence equals the brute-force oracle
    const LinkageResult ours = hierarchical_complete(prox, 2);
    const oracle::LinkageOracle brute = oracle::complete_linkage_bruteforce(prox, 2);
    CHECK(ours.merges == brute.merges);
    CHECK(ours.assignments == brute.assignments);
}

TEST_CASE("hierarchical clustering is permutation-equivariant as a partition") {
    rng::Engine eng(17);
    Matrix prox = random_rows(7, 7, eng).cwiseAbs();
    prox = ((prox + prox.transpose()) / 2.0).eval();
    prox.diagonal().setZero();
    const LinkageResult base = hierarchical_complete(prox, 3);

    // reverse permutation
    std::vector<int> perm{6, 5, 4, 3, 2, 1, 0};
    Matrix permuted(7, 7);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j)
            permuted(i, j) = prox(perm[static_cast<std::size_t>(i)],
                                  perm[static_cast<std::size_t>(j)]);
    const LinkageResult moved = hierarchical_complete(permuted, 3);
    std::vector<int> unpermuted(7);
    for (int i = 0; i < 7; ++i)
        unpermuted[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
            moved.assignments[static_cast<std::size_t>(i)];
    CHECK(oracle::same_partition(base.assignments, unpermuted));
}

TEST_CASE("kmeans++ is permutation-equivariant on separated data") {
    rng::Engine data_eng(18);
    std::vector<int> truth;
    const Matrix pts = blob_points(3, 3, 2, data_eng, &truth);
    rng::Engine e1(19);
    const KmeansResult base = kmeanspp(pts, 3, e1);

    std::vector<int> perm{8, 7, 6, 5, 4, 3, 2, 1, 0};
    Matrix permuted(9, 2);
    for (int i = 0; i < 9; ++i)
        permuted.row(i) = pts.row(perm[static_cast<std::size_t>(i)]);
    rng::Engine e2(19);
    const KmeansResult moved = kmeanspp(permuted, 3, e2);
    std::vector<int> unpermuted(9);
    for (int i = 0; i < 9; ++i)
        unpermuted[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
            moved.assignments[static_cast<std::size_t>(i)];
    CHECK(oracle::same_partition(base.assignments, unpermuted));
}
