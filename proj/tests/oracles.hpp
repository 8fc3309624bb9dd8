// Independent reference implementations the module tests check against.
// Everything here is deliberately written scalar-by-scalar, without reusing
// the library's computation paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "cfl/types.hpp"

namespace oracle {

// Central finite differences of a scalar function of the parameter vector.
inline cfl::ParamVector finite_difference(
    const std::function<double(const cfl::ParamVector&)>& f,
    const cfl::ParamVector& at, double step = 1e-5) {
    cfl::ParamVector g(at.size());
    cfl::ParamVector p = at;
    for (Eigen::Index i = 0; i < at.size(); ++i) {
        const double keep = p(i);
        p(i) = keep + step;
        const double hi = f(p);
        p(i) = keep - step;
        const double lo = f(p);
        p(i) = keep;
        g(i) = (hi - lo) / (2.0 * step);
    }
    return g;
}

inline double rel_error(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / scale;
}

// Softmax cross-entropy of one sample, scalar loops only.
inline double softmax_ce_sample(const std::vector<double>& logits, int label) {
    double maxv = logits[0];
    for (double v : logits) maxv = std::max(maxv, v);
    double denom = 0.0;
    for (double v : logits) denom += std::exp(v - maxv);
    return std::log(denom) - (logits[static_cast<std::size_t>(label)] - maxv);
}

// Brute-force MADC double loop.
inline cfl::Matrix madc_bruteforce(const cfl::Matrix& m) {
    const Eigen::Index n = m.rows();
    cfl::Matrix out = cfl::Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            double acc = 0.0;
            for (Eigen::Index z = 0; z < n; ++z)
                if (z != i && z != j) acc += std::abs(m(i, z) - m(j, z));
            out(i, j) = acc / static_cast<double>(n - 2);
        }
    return out;
}

// Direct EDC(i, j) evaluation from raw vectors and directions.
inline double edc_direct(const cfl::Matrix& deltas, const cfl::Matrix& directions,
                         Eigen::Index i, Eigen::Index j) {
    const auto m = directions.cols();
    double acc = 0.0;
    for (Eigen::Index v = 0; v < m; ++v) {
        auto cosine = [&](Eigen::Index row) {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (Eigen::Index d = 0; d < deltas.cols(); ++d) {
                dot += deltas(row, d) * directions(d, v);
                na += deltas(row, d) * deltas(row, d);
                nb += directions(d, v) * directions(d, v);
            }
            return dot / (std::sqrt(na) * std::sqrt(nb));
        };
        const double diff = cosine(i) - cosine(j);
        acc += diff * diff;
    }
    return std::sqrt(acc) / static_cast<double>(m);
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(cfl::Matrix a) {
    const Eigen::Index n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-24) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-18) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

// Exhaustive search for the k-partition minimizing the within-cluster sum of
// squared distances to cluster means. Returns canonicalized labels (clusters
// numbered by first appearance).
inline std::vector<int> optimal_kpartition(const cfl::Matrix& points, int k) {
    const Eigen::Index n = points.rows();
    std::vector<int> best, current(static_cast<std::size_t>(n), 0);
    double best_cost = std::numeric_limits<double>::infinity();
    std::function<void(Eigen::Index)> rec = [&](Eigen::Index i) {
        if (i == n) {
            std::vector<int> count(static_cast<std::size_t>(k), 0);
            cfl::Matrix sums = cfl::Matrix::Zero(k, points.cols());
            for (Eigen::Index p = 0; p < n; ++p) {
                sums.row(current[static_cast<std::size_t>(p)]) += points.row(p);
                ++count[static_cast<std::size_t>(current[static_cast<std::size_t>(p)])];
            }
            for (int c = 0; c < k; ++c)
                if (count[static_cast<std::size_t>(c)] == 0) return;
            double cost = 0.0;
            for (Eigen::Index p = 0; p < n; ++p) {
                const int c = current[static_cast<std::size_t>(p)];
                const auto mean = sums.row(c) / count[static_cast<std::size_t>(c)];
                cost += (points.row(p) - mean).squaredNorm();
            }
            if (cost < best_cost) {
                best_cost = cost;
                best = current;
            }
            return;
        }
        for (int c = 0; c < k; ++c) {
            current[static_cast<std::size_t>(i)] = c;
            rec(i + 1);
        }
    };
    rec(0);
    return best;
}

// Clusters as label vectors compared as partitions (label names ignored).
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    std::vector<int> map_ab(a.size(), -1), map_ba(b.size(), -1);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto x = static_cast<std::size_t>(a[i]);
        const auto y = static_cast<std::size_t>(b[i]);
        if (map_ab[x] == -1) map_ab[x] = b[i];
        if (map_ba[y] == -1) map_ba[y] = a[i];
        if (map_ab[x] != b[i] || map_ba[y] != a[i]) return false;
    }
    return true;
}

// Independent re-implementation of complete-linkage agglomeration with the
// same tie-break contract (lowest active pair).
struct LinkageOracle {
    std::vector<int> assignments;
    std::vector<std::pair<int, int>> merges;
};
inline LinkageOracle complete_linkage_bruteforce(const cfl::Matrix& prox, int m) {
    const Eigen::Index n = prox.rows();
    std::vector<std::vector<int>> cl(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) cl[static_cast<std::size_t>(i)] = {static_cast<int>(i)};
    LinkageOracle out;
    while (static_cast<int>(cl.size()) > m) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t ba = 0, bb = 1;
        for (std::size_t a = 0; a + 1 < cl.size(); ++a)
            for (std::size_t b = a + 1; b < cl.size(); ++b) {
                double link = -std::numeric_limits<double>::infinity();
                for (int i : cl[a])
                    for (int j : cl[b]) link = std::max(link, prox(i, j));
                if (link < best) {
                    best = link;
                    ba = a;
                    bb = b;
                }
            }
        out.merges.emplace_back(static_cast<int>(ba), static_cast<int>(bb));
        cl[ba].insert(cl[ba].end(), cl[bb].begin(), cl[bb].end());
        cl.erase(cl.begin() + static_cast<long>(bb));
    }
    for (auto& members : cl) std::sort(members.begin(), members.end());
    std::sort(cl.begin(), cl.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    out.assignments.assign(static_cast<std::size_t>(n), -1);
    for (std::size_t c = 0; c < cl.size(); ++c)
        for (int i : cl[c]) out.assignments[static_cast<std::size_t>(i)] = static_cast<int>(c);
    return out;
}

// 1-D earth mover distance between normalized histograms by greedy transport
// between bins (independent of the CDF formulation).
inline double emd_1d(const std::vector<double>& a, const std::vector<double>& b) {
    double sa = 0.0, sb = 0.0;
    for (double v : a) sa += v;
    for (double v : b) sb += v;
    std::vector<double> surplus(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) surplus[i] = a[i] / sa - b[i] / sb;
    double carried = 0.0, work = 0.0;
    for (std::size_t i = 0; i + 1 < surplus.size(); ++i) {
        carried += surplus[i];
        work += std::abs(carried);  // mass moved across boundary i -> i+1
    }
    return work;
}

}  // namespace oracle
