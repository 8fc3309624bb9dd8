#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "cfl/data.hpp"
#include "cfl/errors.hpp"

#include "oracles.hpp"

using namespace cfl;

namespace {

LabeledDataset toy_source(int per_class, int num_classes, int dim,
                          std::uint64_t seed) {
    rng::Engine eng(seed);
    LabeledDataset ds;
    ds.num_classes = num_classes;
    const int n = per_class * num_classes;
    ds.features.resize(n, dim);
    ds.labels.resize(n);
    for (int i = 0; i < n; ++i) {
        ds.labels(i) = i % num_classes;
        for (int j = 0; j < dim; ++j)
            ds.features(i, j) = std::abs(eng.normal()) / 4.0;
    }
    return ds;
}

LabelHistogram hist_of(const ClientData& cd) {
    return label_histogram(cd.train, cd.train.num_classes) +
           label_histogram(cd.test, cd.test.num_classes);
}

std::string temp_path(const char* stem) {
    return (std::filesystem::temp_directory_path() / stem).string();
}

}  // namespace

TEST_CASE("idx round-trip preserves counts, labels and quantized pixels") {
    const LabeledDataset src = toy_source(6, 5, 9, 21);
    const std::string img = temp_path("cfl_idx_img"), lab = temp_path("cfl_idx_lab");
    write_idx(src, img, lab);
    const LabeledDataset back = load_idx(img, lab);
    CHECK(back.size() == src.size());
    CHECK(back.num_classes == 5);
    CHECK((back.labels - src.labels).cwiseAbs().maxCoeff() == 0);
    CHECK((back.features - src.features).cwiseAbs().maxCoeff() <= 0.5 / 255.0);
    std::remove(img.c_str());
    std::remove(lab.c_str());
}

TEST_CASE("idx rejects bad magic and truncation naming the file") {
    const std::string img = temp_path("cfl_idx_bad_img");
    const std::string lab = temp_path("cfl_idx_bad_lab");
    {
        std::ofstream f(img, std::ios::binary);
        const unsigned char magic[] = {0, 0, 8, 4, 0, 0, 0, 1, 0, 0, 0, 2,
                                       0, 0, 0, 2, 1, 2, 3, 4};
        f.write(reinterpret_cast<const char*>(magic), sizeof magic);
        std::ofstream fl(lab, std::ios::binary);
        const unsigned char hl[] = {0, 0, 8, 1, 0, 0, 0, 1, 7};
        fl.write(reinterpret_cast<const char*>(hl), sizeof hl);
    }
    CHECK_THROWS_WITH_AS(load_idx(img, lab), doctest::Contains("bad image magic"),
                         IoError);
    {
        // valid magic, header says 100 records but only one byte follows
        std::ofstream fi(img, std::ios::binary);
        const unsigned char hi[] = {0, 0, 8, 3, 0, 0, 0, 100, 0, 0, 0, 1,
                                    0, 0, 0, 1, 9};
        fi.write(reinterpret_cast<const char*>(hi), sizeof hi);
        std::ofstream fl(lab, std::ios::binary);
        const unsigned char hl[] = {0, 0, 8, 1, 0, 0, 0, 100, 7};
        fl.write(reinterpret_cast<const char*>(hl), sizeof hl);
    }
    CHECK_THROWS_WITH_AS(load_idx(img, lab), doctest::Contains("truncated"), IoError);
    std::remove(img.c_str());
    std::remove(lab.c_str());
}

TEST_CASE("real MNIST first test digit is 7 when the dataset is present") {
    const char* root = std::getenv("CFL_LAB_DATA_DIR");
    if (!root) {
        MESSAGE("CFL_LAB_DATA_DIR not set; skipping real-MNIST check");
        return;
    }
    const LabeledDataset test = load_idx(std::string(root) + "/t10k-images-idx3-ubyte",
                                         std::string(root) + "/t10k-labels-idx1-ubyte");
    CHECK(test.labels(0) == 7);
    CHECK(test.features.cols() == 784);
}

TEST_CASE("synthetic generation is deterministic and heterogeneity scales") {
    const SizeLaw law{60, 1.1, 10};
    const auto a = generate_synthetic(1.0, 1.0, 8, 20, 5, law, 3);
    const auto b = generate_synthetic(1.0, 1.0, 8, 20, 5, law, 3);
    REQUIRE(a.size() == 8);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK((a[i].train.features - b[i].train.features).norm() == 0.0);
        CHECK((a[i].train.labels - b[i].train.labels).cwiseAbs().maxCoeff() == 0);
    }
    // power-law sizes: nonincreasing with rank, respecting the minimum
    for (std::size_t i = 1; i < a.size(); ++i) {
        CHECK(a[i].train.size() <= a[i - 1].train.size());
        CHECK(a[i].train.size() >= 10);
    }

    // heterogeneous (1,1) labels vary more across clients than (0,0):
    // chi-square of per-client label histograms against the pooled mix
    auto chi_square = [](const std::vector<ClientData>& clients) {
        const int c = clients[0].train.num_classes;
        Eigen::VectorXd pooled = Eigen::VectorXd::Zero(c);
        for (const auto& cd : clients)
            pooled += label_histogram(cd.train, c).cast<double>();
        pooled /= pooled.sum();
        double stat = 0.0;
        for (const auto& cd : clients) {
            const LabelHistogram h = label_histogram(cd.train, c);
            const double n = h.sum();
            for (int k = 0; k < c; ++k) {
                const double expected = n * pooled(k);
                if (expected > 0) {
                    const double diff = h(k) - expected;
                    stat += diff * diff / expected;
                }
            }
        }
        return stat;
    };
    const auto iid = generate_synthetic(0.0, 0.0, 8, 20, 5, law, 3);
    CHECK(chi_square(a) > chi_square(iid));
}

TEST_CASE("non-IID partition honors class limits and stays disjoint") {
    const LabeledDataset source = toy_source(100, 3, 4, 5);  // 300 samples
    auto [manifest, clients] = partition_noniid(source, 10, 2, 1.1, 0.2, 42, 150);
    REQUIRE(clients.size() == 10);

    std::set<long> seen;
    for (const auto& idx : {manifest.train_indices, manifest.test_indices})
        for (const auto& list : idx)
            for (long v : list) {
                CHECK(seen.insert(v).second);  // without replacement
            }

    for (const auto& cd : clients) {
        const LabelHistogram h = hist_of(cd);
        int nonzero = 0;
        for (int c = 0; c < 3; ++c)
            if (h(c) > 0) ++nonzero;
        CHECK(nonzero == 2);
        // test set drawn from the same labels as train
        const LabelHistogram ht = label_histogram(cd.test, 3);
        const LabelHistogram hr = label_histogram(cd.train, 3);
        for (int c = 0; c < 3; ++c)
            if (ht(c) > 0) CHECK(hr(c) > 0);
    }

    // classes_per_client = num_classes: every label present per client
    auto [m2, iid] = partition_noniid(source, 5, 3, 0.0, 0.2, 42, 120);
    for (const auto& cd : iid) {
        const LabelHistogram h = hist_of(cd);
        for (int c = 0; c < 3; ++c) CHECK(h(c) > 0);
    }
}

TEST_CASE("partition manifest reproduces identical clients through save/load") {
    const LabeledDataset source = toy_source(60, 4, 3, 6);
    auto [manifest, clients] = partition_noniid(source, 6, 2, 1.1, 0.25, 9, 100);
    const std::string path = temp_path("cfl_manifest.txt");
    manifest.save(path);
    const PartitionManifest loaded = PartitionManifest::load(path);
    CHECK(loaded.seed == manifest.seed);
    CHECK(loaded.classes_per_client == manifest.classes_per_client);
    CHECK(loaded.test_fraction == manifest.test_fraction);
    const auto rebuilt = materialize(source, loaded);
    REQUIRE(rebuilt.size() == clients.size());
    for (std::size_t i = 0; i < clients.size(); ++i) {
        CHECK((rebuilt[i].train.features - clients[i].train.features).norm() == 0.0);
        CHECK((rebuilt[i].test.features - clients[i].test.features).norm() == 0.0);
        CHECK((rebuilt[i].train.labels - clients[i].train.labels).cwiseAbs().maxCoeff() == 0);
    }
    std::remove(path.c_str());
}

TEST_CASE("partition reports the exhausted class") {
    const LabeledDataset source = toy_source(10, 2, 3, 7);  // 20 samples
    CHECK_THROWS_WITH_AS(partition_noniid(source, 4, 1, 0.0, 0.0, 1, 400),
                         doctest::Contains("class"), ConfigError);
}

TEST_CASE("label_histogram counts") {
    LabeledDataset ds;
    ds.num_classes = 3;
    ds.features.resize(3, 1);
    ds.features.setZero();
    ds.labels.resize(3);
    ds.labels << 0, 0, 2;
    const LabelHistogram h = label_histogram(ds, 3);
    CHECK(h(0) == 2);
    CHECK(h(1) == 0);
    CHECK(h(2) == 1);

    LabeledDataset empty;
    empty.num_classes = 3;
    empty.features.resize(0, 1);
    empty.labels.resize(0);
    CHECK(label_histogram(empty, 3).sum() == 0);

    rng::Engine eng(3);
    LabeledDataset rnd;
    rnd.num_classes = 4;
    rnd.features.resize(50, 1);
    rnd.features.setZero();
    rnd.labels.resize(50);
    std::vector<int> counts(4, 0);
    for (int i = 0; i < 50; ++i) {
        rnd.labels(i) = static_cast<int>(eng.below(4));
        ++counts[static_cast<std::size_t>(rnd.labels(i))];
    }
    const LabelHistogram rh = label_histogram(rnd, 4);
    for (int c = 0; c < 4; ++c) CHECK(rh(c) == counts[static_cast<std::size_t>(c)]);
}

TEST_CASE("shift_distance is the scaled 1-D Wasserstein distance") {
    LabelHistogram a(2), b(2);
    a << 2, 0;
    b << 0, 2;
    CHECK(shift_distance(a, b) == doctest::Approx(2.0));

    LabelHistogram c(3), d(3);
    c << 1, 1, 0;
    d << 0, 1, 1;
    CHECK(shift_distance(c, d) == doctest::Approx(2.0));  // |0.5-0| + |1-0.5| scaled by 2

    LabelHistogram e(2), f(2);
    e << 4, 4;
    f << 5, 5;
    CHECK(shift_distance(e, f) == 0.0);

    CHECK(shift_distance(a, a) == 0.0);
    LabelHistogram zero = LabelHistogram::Zero(2);
    CHECK(shift_distance(zero, b) == 0.0);
    CHECK(shift_distance(a, zero) == 0.0);

    // random histograms against the greedy-transport oracle
    rng::Engine eng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + static_cast<int>(eng.below(6));
        LabelHistogram x(k), y(k);
        for (int i = 0; i < k; ++i) {
            x(i) = static_cast<int>(eng.below(20));
            y(i) = static_cast<int>(eng.below(20));
        }
        if (x.sum() == 0 || y.sum() == 0) continue;
        std::vector<double> xv(x.data(), x.data() + k), yv(y.data(), y.data() + k);
        const double expected = x.sum() * oracle::emd_1d(xv, yv);
        CHECK(shift_distance(x, y) == doctest::Approx(expected).epsilon(1e-12));
        // symmetry up to the n_old scale
        CHECK(shift_distance(x, y) / x.sum() ==
              doctest::Approx(shift_distance(y, x) / y.sum()).epsilon(1e-12));
    }
}

TEST_CASE("threshold_tau implements the 20% rule") {
    CHECK(threshold_tau(100, 10) == doctest::Approx(2.0));
    CHECK(threshold_tau(0, 10) == 0.0);
    CHECK(threshold_tau(55, 10) == doctest::Approx(1.1));
    CHECK_THROWS_AS(threshold_tau(10, 0), ConfigError);
}

TEST_CASE("swap-all exchanges whole payloads and conserves the global mix") {
    auto clients = generate_synthetic(1.0, 1.0, 6, 8, 4, SizeLaw{40, 0.0, 10}, 11);
    LabelHistogram global = LabelHistogram::Zero(4);
    for (const auto& cd : clients) global += hist_of(cd);

    rng::Engine eng(5);
    CHECK_FALSE(shift_swap_all(clients, 0.0, eng).mutated);

    int swaps = 0;
    for (int round = 0; round < 1000; ++round) {
        const ShiftRecord rec = shift_swap_all(clients, 0.05, eng);
        if (rec.mutated) {
            ++swaps;
            CHECK(rec.client_a != rec.client_b);
        }
    }
    // Binomial(1000, 0.05): mean 50, sigma ~6.9
    CHECK(swaps > 50 - 21);
    CHECK(swaps < 50 + 21);

    LabelHistogram after = LabelHistogram::Zero(4);
    for (const auto& cd : clients) after += hist_of(cd);
    CHECK((after - global).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("swap-part exchanges one unique label on each side") {
    // two 2-class clients over {0,1} and {2,3}
    auto make_client = [](int id, int la, int lb) {
        ClientData cd;
        cd.client_id = id;
        cd.train.num_classes = 4;
        cd.train.features.resize(6, 2);
        cd.train.features.setConstant(id);
        cd.train.labels.resize(6);
        cd.train.labels << la, la, la, lb, lb, lb;
        cd.test.num_classes = 4;
        cd.test.features.resize(2, 2);
        cd.test.features.setConstant(id + 10);
        cd.test.labels.resize(2);
        cd.test.labels << la, lb;
        return cd;
    };
    std::vector<ClientData> clients{make_client(0, 0, 1), make_client(1, 2, 3)};
    LabelHistogram global = LabelHistogram::Zero(4);
    for (const auto& cd : clients) global += hist_of(cd);

    rng::Engine eng(7);
    CHECK_FALSE(shift_swap_part(clients, 0.0, eng).mutated);
    ShiftRecord rec;
    while (!rec.mutated) rec = shift_swap_part(clients, 1.0, eng);

    const LabelHistogram h0 = hist_of(clients[0]);
    const LabelHistogram h1 = hist_of(clients[1]);
    // each still holds two labels, exactly one imported from the other side
    int imported0 = 0, imported1 = 0;
    for (int c2 = 0; c2 < 4; ++c2) {
        if (h0(c2) > 0 && c2 >= 2) ++imported0;
        if (h1(c2) > 0 && c2 <= 1) ++imported1;
    }
    CHECK(imported0 == 1);
    CHECK(imported1 == 1);
    LabelHistogram after = LabelHistogram::Zero(4);
    for (const auto& cd : clients) after += hist_of(cd);
    CHECK((after - global).cwiseAbs().maxCoeff() == 0);

    // no unique pair: identical label sets are a recorded no-op
    std::vector<ClientData> same{make_client(0, 0, 1), make_client(1, 0, 1)};
    rng::Engine eng2(9);
    for (int i = 0; i < 20; ++i) CHECK_FALSE(shift_swap_part(same, 1.0, eng2).mutated);
}

TEST_CASE("incremental release follows the 25% schedule with a stable mix") {
    // per-label counts divisible by 4 so chunk mixes are exact
    std::vector<ClientData> clients(3);
    for (int i = 0; i < 3; ++i) {
        auto& cd = clients[static_cast<std::size_t>(i)];
        cd.client_id = i;
        cd.train.num_classes = 2;
        cd.train.features.resize(40, 2);
        cd.train.features.setRandom();
        cd.train.labels.resize(40);
        for (int s = 0; s < 40; ++s) cd.train.labels(s) = s % 2;
    }
    prepare_incremental(clients, 0.25);
    for (const auto& cd : clients) {
        CHECK(cd.train.size() == 10);
        CHECK(cd.held_back.size() == 30);
        CHECK(cd.held_chunk_sizes == std::vector<int>{10, 10, 10});
    }

    CHECK_FALSE(shift_incremental(clients, 1, 0.25, 50).mutated);
    CHECK_FALSE(shift_incremental(clients, 49, 0.25, 50).mutated);
    const long expectations[] = {20, 30, 40};
    int step = 0;
    for (int round : {50, 100, 150}) {
        const LabelHistogram before = label_histogram(clients[0].train, 2);
        CHECK(shift_incremental(clients, round, 0.25, 50).mutated);
        for (const auto& cd : clients)
            CHECK(cd.train.size() == expectations[step]);
        const LabelHistogram after = label_histogram(clients[0].train, 2);
        CHECK(shift_distance(before, after) <= 1e-9);
        ++step;
    }
    CHECK_FALSE(shift_incremental(clients, 200, 0.25, 50).mutated);  // exhausted
    const LabelHistogram final_mix = label_histogram(clients[0].train, 2);
    CHECK(final_mix(0) == 20);
    CHECK(final_mix(1) == 20);
}
