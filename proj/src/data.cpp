#include "cfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "cfl/errors.hpp"

namespace cfl {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("idx: truncated header in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

// Largest-remainder apportionment: per-bucket takes t_c with sum(t) = total,
// t_c <= k_c, proportional to k_c.
std::vector<long> apportion(const std::vector<long>& k, long total) {
    const long n = std::accumulate(k.begin(), k.end(), 0L);
    std::vector<long> t(k.size(), 0);
    if (n == 0 || total <= 0) return t;
    std::vector<std::pair<double, std::size_t>> rema;
    long assigned = 0;
    for (std::size_t c = 0; c < k.size(); ++c) {
        const double exact = static_cast<double>(total) * k[c] / n;
        t[c] = std::min<long>(k[c], static_cast<long>(exact));
        assigned += t[c];
        rema.emplace_back(exact - static_cast<double>(t[c]), c);
    }
    std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t i = 0; assigned < total && i < rema.size(); ++i) {
        const std::size_t c = rema[i].second;
        if (t[c] < k[c]) {
            ++t[c];
            ++assigned;
        }
    }
    return t;
}

LabeledDataset take_rows(const LabeledDataset& src, const std::vector<long>& rows) {
    LabeledDataset out;
    out.num_classes = src.num_classes;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), src.features.cols());
    out.labels.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = src.features.row(rows[i]);
        out.labels(static_cast<Eigen::Index>(i)) = src.labels(rows[i]);
    }
    return out;
}

std::vector<long> power_law_sizes(int n_clients, double exponent, long budget,
                                  int min_samples) {
    std::vector<double> raw(static_cast<std::size_t>(n_clients));
    double sum = 0.0;
    for (int i = 0; i < n_clients; ++i) {
        raw[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i + 1), -exponent);
        sum += raw[static_cast<std::size_t>(i)];
    }
    std::vector<long> sizes(static_cast<std::size_t>(n_clients));
    for (int i = 0; i < n_clients; ++i) {
        const long s = std::lround(static_cast<double>(budget) *
                                   raw[static_cast<std::size_t>(i)] / sum);
        sizes[static_cast<std::size_t>(i)] = std::max<long>(min_samples, s);
    }
    return sizes;
}

}  // namespace

void append_samples(LabeledDataset& base, const LabeledDataset& extra) {
    if (extra.size() == 0) return;
    if (base.size() == 0) {
        base = extra;
        return;
    }
    const Eigen::Index old_n = base.size();
    base.features.conservativeResize(old_n + extra.size(), Eigen::NoChange);
    base.features.bottomRows(extra.size()) = extra.features;
    base.labels.conservativeResize(old_n + extra.size());
    base.labels.tail(extra.size()) = extra.labels;
}

LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IoError("idx: cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("idx: cannot open " + labels_path);

    if (read_be32(img, images_path) != kImageMagic)
        throw IoError("idx: bad image magic in " + images_path);
    const std::uint32_t n = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);

    if (read_be32(lab, labels_path) != kLabelMagic)
        throw IoError("idx: bad label magic in " + labels_path);
    const std::uint32_t nl = read_be32(lab, labels_path);
    if (n != nl)
        throw IoError("idx: image count " + std::to_string(n) +
                      " != label count in " + labels_path);

    const std::size_t dim = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> pixel(dim);
    LabeledDataset out;
    out.features.resize(n, static_cast<Eigen::Index>(dim));
    out.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        img.read(reinterpret_cast<char*>(pixel.data()),
                 static_cast<std::streamsize>(dim));
        if (!img) throw IoError("idx: truncated image record in " + images_path);
        for (std::size_t j = 0; j < dim; ++j)
            out.features(i, static_cast<Eigen::Index>(j)) = pixel[j] / 255.0;
        char y;
        lab.read(&y, 1);
        if (!lab) throw IoError("idx: truncated label record in " + labels_path);
        out.labels(i) = static_cast<unsigned char>(y);
    }
    out.num_classes = out.labels.size() > 0 ? out.labels.maxCoeff() + 1 : 0;
    return out;
}

void write_idx(const LabeledDataset& data, const std::string& images_path,
               const std::string& labels_path) {
    const Eigen::Index n = data.size();
    const Eigen::Index dim = data.features.cols();
    // square raster when possible, otherwise a 1 x dim row
    std::uint32_t rows = 1, cols = static_cast<std::uint32_t>(dim);
    const auto root = static_cast<std::uint32_t>(std::lround(std::sqrt(double(dim))));
    if (root > 0 && static_cast<Eigen::Index>(root) * root == dim) rows = cols = root;

    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw IoError("idx: cannot write " + images_path);
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("idx: cannot write " + labels_path);
    write_be32(img, kImageMagic);
    write_be32(img, static_cast<std::uint32_t>(n));
    write_be32(img, rows);
    write_be32(img, cols);
    write_be32(lab, kLabelMagic);
    write_be32(lab, static_cast<std::uint32_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            const double v = std::clamp(data.features(i, j), 0.0, 1.0);
            const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
            img.write(reinterpret_cast<const char*>(&byte), 1);
        }
        const auto y = static_cast<unsigned char>(data.labels(i));
        lab.write(reinterpret_cast<const char*>(&y), 1);
    }
    if (!img || !lab) throw IoError("idx: write failure");
}

std::vector<ClientData> generate_synthetic(double alpha, double beta,
                                           int n_clients, int input_dim,
                                           int num_classes, const SizeLaw& sizes,
                                           std::uint64_t seed,
                                           double test_fraction) {
    if (n_clients < 1) throw ConfigError("synthetic: n_clients must be >= 1");
    rng::Engine eng(rng::derive(seed, "synthetic"));
    const std::vector<long> train_sizes =
        power_law_sizes(n_clients, sizes.exponent,
                        static_cast<long>(sizes.base_size) * n_clients,
                        sizes.min_samples);

    Eigen::VectorXd feature_sd(input_dim);
    for (int j = 0; j < input_dim; ++j)
        feature_sd(j) = std::pow(static_cast<double>(j + 1), -0.6);  // var j^-1.2

    std::vector<ClientData> out(static_cast<std::size_t>(n_clients));
    for (int k = 0; k < n_clients; ++k) {
        const double u_k = alpha * eng.normal();
        const double b_mean = beta * eng.normal();
        Matrix w(num_classes, input_dim);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u_k + eng.normal();
        Eigen::VectorXd bias(num_classes);
        for (int c = 0; c < num_classes; ++c) bias(c) = alpha * eng.normal();
        Eigen::VectorXd v_k(input_dim);
        for (int j = 0; j < input_dim; ++j) v_k(j) = b_mean + eng.normal();

        const long n_train = train_sizes[static_cast<std::size_t>(k)];
        const long n_test = std::max<long>(
            1, std::lround(n_train * test_fraction / (1.0 - test_fraction)));
        const long n = n_train + n_test;
        LabeledDataset all;
        all.num_classes = num_classes;
        all.features.resize(n, input_dim);
        all.labels.resize(n);
        for (long s = 0; s < n; ++s) {
            for (int j = 0; j < input_dim; ++j)
                all.features(s, j) = v_k(j) + feature_sd(j) * eng.normal();
            Eigen::VectorXd logits = w * all.features.row(s).transpose() + bias;
            Eigen::Index arg = 0;
            logits.maxCoeff(&arg);
            all.labels(s) = static_cast<int>(arg);
        }
        ClientData& cd = out[static_cast<std::size_t>(k)];
        cd.client_id = k;
        std::vector<long> head(static_cast<std::size_t>(n_train));
        std::iota(head.begin(), head.end(), 0);
        std::vector<long> tail(static_cast<std::size_t>(n_test));
        std::iota(tail.begin(), tail.end(), n_train);
        cd.train = take_rows(all, head);
        cd.test = take_rows(all, tail);
    }
    return out;
}

std::vector<ClientData> generate_two_population(int n_clients, int num_classes,
                                                int input_dim, double mix_sigma,
                                                const SizeLaw& sizes,
                                                std::uint64_t seed,
                                                double test_fraction) {
    if (n_clients < 2) throw ConfigError("two_population: need >= 2 clients");
    rng::Engine eng(rng::derive(seed, "two-population"));

    Matrix prototypes(num_classes, input_dim);
    for (Eigen::Index i = 0; i < prototypes.size(); ++i)
        prototypes.data()[i] = 0.75 * eng.normal();

    const std::vector<long> train_sizes =
        power_law_sizes(n_clients, sizes.exponent,
                        static_cast<long>(sizes.base_size) * n_clients,
                        sizes.min_samples);

    std::vector<ClientData> out(static_cast<std::size_t>(n_clients));
    for (int k = 0; k < n_clients; ++k) {
        const bool permuted = k >= n_clients / 2;

        // skewed per-client class mixture (all classes present in expectation)
        Eigen::VectorXd weights(num_classes);
        for (int c = 0; c < num_classes; ++c)
            weights(c) = std::exp(mix_sigma * eng.normal());
        weights /= weights.sum();

        const long n_train = train_sizes[static_cast<std::size_t>(k)];
        const long n_test = std::max<long>(
            1, std::lround(n_train * test_fraction / (1.0 - test_fraction)));

        auto make_split = [&](long count) {
            LabeledDataset ds;
            ds.num_classes = num_classes;
            ds.features.resize(count, input_dim);
            ds.labels.resize(count);
            for (long s = 0; s < count; ++s) {
                const double u = eng.uniform();
                int c = num_classes - 1;
                double cum = 0.0;
                for (int w = 0; w < num_classes; ++w) {
                    cum += weights(w);
                    if (u < cum) {
                        c = w;
                        break;
                    }
                }
                for (int j = 0; j < input_dim; ++j)
                    ds.features(s, j) = prototypes(c, j) + 1.25 * eng.normal();
                ds.labels(s) = permuted ? (num_classes - 1 - c) : c;
            }
            return ds;
        };
        ClientData& cd = out[static_cast<std::size_t>(k)];
        cd.client_id = k;
        cd.train = make_split(n_train);
        cd.test = make_split(n_test);
    }
    return out;
}

std::pair<PartitionManifest, std::vector<ClientData>> partition_noniid(
    const LabeledDataset& source, int n_clients, int classes_per_client,
    double power_exponent, double test_fraction, std::uint64_t seed,
    long train_budget, int min_samples) {
    if (source.num_classes < 1) throw ConfigError("partition: source has no classes");
    if (classes_per_client < 1 || classes_per_client > source.num_classes)
        throw ConfigError("partition: classes_per_client out of range");
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw ConfigError("partition: test_fraction must be in [0, 1)");

    rng::Engine eng(rng::derive(seed, "partition"));
    const int c = source.num_classes;
    std::vector<std::vector<long>> pools(static_cast<std::size_t>(c));
    for (Eigen::Index i = 0; i < source.size(); ++i)
        pools[static_cast<std::size_t>(source.labels(i))].push_back(i);
    for (auto& pool : pools) rng::shuffle(pool, eng);
    std::vector<std::size_t> cursor(static_cast<std::size_t>(c), 0);

    if (train_budget <= 0)
        train_budget = static_cast<long>(
            std::floor(static_cast<double>(source.size()) * (1.0 - test_fraction)));
    const std::vector<long> train_sizes =
        power_law_sizes(n_clients, power_exponent, train_budget, min_samples);

    PartitionManifest manifest;
    manifest.seed = seed;
    manifest.classes_per_client = classes_per_client;
    manifest.power_exponent = power_exponent;
    manifest.test_fraction = test_fraction;
    manifest.train_budget = train_budget;
    manifest.train_indices.resize(static_cast<std::size_t>(n_clients));
    manifest.test_indices.resize(static_cast<std::size_t>(n_clients));

    for (int i = 0; i < n_clients; ++i) {
        const long n_train = train_sizes[static_cast<std::size_t>(i)];
        const long n_test =
            test_fraction > 0.0
                ? std::max<long>(1, std::lround(n_train * test_fraction /
                                                (1.0 - test_fraction)))
                : 0;
        const long total = n_train + n_test;

        // classes_per_client distinct labels, drawn with probability
        // proportional to the remaining pool sizes
        std::vector<int> chosen;
        std::vector<char> used(static_cast<std::size_t>(c), 0);
        for (int pick = 0; pick < classes_per_client; ++pick) {
            long avail = 0;
            for (int l = 0; l < c; ++l)
                if (!used[static_cast<std::size_t>(l)])
                    avail += static_cast<long>(pools[static_cast<std::size_t>(l)].size() -
                                               cursor[static_cast<std::size_t>(l)]);
            if (avail <= 0)
                throw ConfigError("partition: all class pools exhausted at client " +
                                  std::to_string(i));
            long draw = static_cast<long>(eng.below(static_cast<std::uint64_t>(avail)));
            int label = -1;
            for (int l = 0; l < c; ++l) {
                if (used[static_cast<std::size_t>(l)]) continue;
                const long left =
                    static_cast<long>(pools[static_cast<std::size_t>(l)].size() -
                                      cursor[static_cast<std::size_t>(l)]);
                if (draw < left) {
                    label = l;
                    break;
                }
                draw -= left;
            }
            used[static_cast<std::size_t>(label)] = 1;
            chosen.push_back(label);
        }

        // per-class take: total split as evenly as possible over the labels
        std::vector<long> take(chosen.size(),
                               total / static_cast<long>(chosen.size()));
        for (long r = 0; r < total % static_cast<long>(chosen.size()); ++r)
            ++take[static_cast<std::size_t>(r)];

        std::vector<long> class_rows_flat;
        std::vector<std::vector<long>> class_rows;
        for (std::size_t ci = 0; ci < chosen.size(); ++ci) {
            const auto label = static_cast<std::size_t>(chosen[ci]);
            const long left = static_cast<long>(pools[label].size() - cursor[label]);
            if (take[ci] > left)
                throw ConfigError("partition: class " + std::to_string(chosen[ci]) +
                                  " ran out of samples at client " + std::to_string(i));
            std::vector<long> rows(pools[label].begin() +
                                       static_cast<long>(cursor[label]),
                                   pools[label].begin() +
                                       static_cast<long>(cursor[label]) + take[ci]);
            cursor[label] += static_cast<std::size_t>(take[ci]);
            class_rows.push_back(std::move(rows));
        }

        // stratified test split: per-class test counts by largest remainder
        const std::vector<long> test_take = apportion(take, n_test);
        auto& train_idx = manifest.train_indices[static_cast<std::size_t>(i)];
        auto& test_idx = manifest.test_indices[static_cast<std::size_t>(i)];
        for (std::size_t ci = 0; ci < class_rows.size(); ++ci) {
            const auto& rows = class_rows[ci];
            const long t = test_take[ci];
            test_idx.insert(test_idx.end(), rows.begin(), rows.begin() + t);
            train_idx.insert(train_idx.end(), rows.begin() + t, rows.end());
        }
    }
    return {manifest, materialize(source, manifest)};
}

std::vector<ClientData> materialize(const LabeledDataset& source,
                                    const PartitionManifest& manifest) {
    std::vector<ClientData> out(manifest.train_indices.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].client_id = static_cast<int>(i);
        out[i].train = take_rows(source, manifest.train_indices[i]);
        out[i].test = take_rows(source, manifest.test_indices[i]);
        out[i].train.num_classes = source.num_classes;
        out[i].test.num_classes = source.num_classes;
    }
    return out;
}

void PartitionManifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("manifest: cannot write " + path);
    out << "# cfl partition manifest v1\n";
    out << "seed " << seed << "\n";
    out << "classes_per_client " << classes_per_client << "\n";
    out << "power_exponent " << power_exponent << "\n";
    out << "test_fraction " << test_fraction << "\n";
    out << "train_budget " << train_budget << "\n";
    for (std::size_t i = 0; i < train_indices.size(); ++i) {
        out << "client " << i << "\n";
        out << "train";
        for (long v : train_indices[i]) out << ' ' << v;
        out << "\ntest";
        for (long v : test_indices[i]) out << ' ' << v;
        out << "\n";
    }
    if (!out) throw IoError("manifest: write failure for " + path);
}

PartitionManifest PartitionManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("manifest: cannot open " + path);
    PartitionManifest m;
    std::string line;
    std::vector<long>* target = nullptr;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "seed") ss >> m.seed;
        else if (key == "classes_per_client") ss >> m.classes_per_client;
        else if (key == "power_exponent") ss >> m.power_exponent;
        else if (key == "test_fraction") ss >> m.test_fraction;
        else if (key == "train_budget") ss >> m.train_budget;
        else if (key == "client") {
            m.train_indices.emplace_back();
            m.test_indices.emplace_back();
        } else if (key == "train" || key == "test") {
            if (m.train_indices.empty())
                throw IoError("manifest: index list before any client in " + path);
            target = key == "train" ? &m.train_indices.back() : &m.test_indices.back();
            long v;
            while (ss >> v) target->push_back(v);
        } else {
            throw IoError("manifest: unknown line '" + key + "' in " + path);
        }
    }
    return m;
}

LabelHistogram label_histogram(const LabeledDataset& train, int num_classes) {
    LabelHistogram h = LabelHistogram::Zero(num_classes);
    for (Eigen::Index i = 0; i < train.size(); ++i) ++h(train.labels(i));
    return h;
}

double shift_distance(const LabelHistogram& old_counts,
                      const LabelHistogram& new_counts) {
    if (old_counts.size() != new_counts.size())
        throw NumericError("shift_distance: histogram size mismatch");
    const double n_old = old_counts.sum();
    const double n_new = new_counts.sum();
    if (n_old == 0.0 || n_new == 0.0) return 0.0;
    double cdf_gap = 0.0, w1 = 0.0;
    for (Eigen::Index c = 0; c + 1 < old_counts.size(); ++c) {
        cdf_gap += old_counts(c) / n_old - new_counts(c) / n_new;
        w1 += std::abs(cdf_gap);
    }
    return n_old * w1;
}

double threshold_tau(long n_i, int label_size) {
    if (label_size < 1) throw ConfigError("threshold_tau: label_size must be >= 1");
    return 0.2 * static_cast<double>(n_i) / static_cast<double>(label_size);
}

ShiftRecord shift_swap_all(std::vector<ClientData>& clients, double probability,
                           rng::Engine& eng) {
    if (clients.size() < 2) throw ConfigError("swap_all: need >= 2 clients");
    ShiftRecord rec;
    if (eng.uniform() >= probability) return rec;
    const auto n = static_cast<std::uint64_t>(clients.size());
    const auto a = static_cast<int>(eng.below(n));
    auto b = static_cast<int>(eng.below(n - 1));
    if (b >= a) ++b;
    auto& ca = clients[static_cast<std::size_t>(a)];
    auto& cb = clients[static_cast<std::size_t>(b)];
    std::swap(ca.train, cb.train);
    std::swap(ca.test, cb.test);
    std::swap(ca.held_back, cb.held_back);
    std::swap(ca.held_chunk_sizes, cb.held_chunk_sizes);
    rec.mutated = true;
    rec.client_a = std::min(a, b);
    rec.client_b = std::max(a, b);
    return rec;
}

namespace {

// label presence over train + test
std::vector<char> label_presence(const ClientData& cd, int num_classes) {
    std::vector<char> present(static_cast<std::size_t>(num_classes), 0);
    for (Eigen::Index i = 0; i < cd.train.size(); ++i)
        present[static_cast<std::size_t>(cd.train.labels(i))] = 1;
    for (Eigen::Index i = 0; i < cd.test.size(); ++i)
        present[static_cast<std::size_t>(cd.test.labels(i))] = 1;
    return present;
}

// Moves every row with the given label out of `ds`, returning the moved rows.
LabeledDataset extract_label(LabeledDataset& ds, int label) {
    std::vector<long> keep, move;
    for (Eigen::Index i = 0; i < ds.size(); ++i)
        (ds.labels(i) == label ? move : keep).push_back(i);
    LabeledDataset moved = take_rows(ds, move);
    ds = take_rows(ds, keep);
    return moved;
}

}  // namespace

ShiftRecord shift_swap_part(std::vector<ClientData>& clients, double probability,
                            rng::Engine& eng) {
    if (clients.size() < 2) throw ConfigError("swap_part: need >= 2 clients");
    ShiftRecord rec;
    if (eng.uniform() >= probability) return rec;
    const auto n = static_cast<std::uint64_t>(clients.size());
    const auto a = static_cast<int>(eng.below(n));
    auto b = static_cast<int>(eng.below(n - 1));
    if (b >= a) ++b;
    auto& ca = clients[static_cast<std::size_t>(a)];
    auto& cb = clients[static_cast<std::size_t>(b)];
    const int num_classes = std::max(ca.train.num_classes, cb.train.num_classes);
    const auto pa = label_presence(ca, num_classes);
    const auto pb = label_presence(cb, num_classes);
    std::vector<int> only_a, only_b;
    for (int l = 0; l < num_classes; ++l) {
        if (pa[static_cast<std::size_t>(l)] && !pb[static_cast<std::size_t>(l)])
            only_a.push_back(l);
        if (pb[static_cast<std::size_t>(l)] && !pa[static_cast<std::size_t>(l)])
            only_b.push_back(l);
    }
    rec.client_a = std::min(a, b);
    rec.client_b = std::max(a, b);
    if (only_a.empty() || only_b.empty()) return rec;  // no unique pair: no-op
    const int la = only_a[eng.below(only_a.size())];
    const int lb = only_b[eng.below(only_b.size())];

    LabeledDataset a_train = extract_label(ca.train, la);
    LabeledDataset a_test = extract_label(ca.test, la);
    LabeledDataset b_train = extract_label(cb.train, lb);
    LabeledDataset b_test = extract_label(cb.test, lb);
    append_samples(cb.train, a_train);
    append_samples(cb.test, a_test);
    append_samples(ca.train, b_train);
    append_samples(ca.test, b_test);
    rec.mutated = true;
    rec.label_a = la;
    rec.label_b = lb;
    return rec;
}

void prepare_incremental(std::vector<ClientData>& clients,
                         double release_fraction) {
    if (release_fraction <= 0.0 || release_fraction > 1.0)
        throw ConfigError("incremental: release_fraction must be in (0, 1]");
    for (auto& cd : clients) {
        const int num_classes = cd.train.num_classes;
        const long n = cd.train.size();
        if (n == 0) continue;
        const int chunks = std::max(
            0, static_cast<int>(std::ceil((1.0 - release_fraction) / release_fraction -
                                          1e-12)));
        if (chunks == 0) continue;

        std::vector<std::vector<long>> by_label(static_cast<std::size_t>(num_classes));
        for (Eigen::Index i = 0; i < n; ++i)
            by_label[static_cast<std::size_t>(cd.train.labels(i))].push_back(i);

        // per-label rows split over (initial + chunks) parts; each chunk gets
        // round(release_fraction * count), the initial part takes the rest, so
        // label counts divisible by the part count split exactly evenly
        const int parts = chunks + 1;
        std::vector<std::vector<long>> part_rows(static_cast<std::size_t>(parts));
        for (auto& rows : by_label) {
            if (rows.empty()) continue;
            const long total = static_cast<long>(rows.size());
            std::size_t pos = 0;
            for (int p = parts - 1; p >= 1; --p) {
                long cnt = std::lround(release_fraction * static_cast<double>(total));
                cnt = std::min<long>(cnt, total - static_cast<long>(pos));
                while (cnt-- > 0) part_rows[static_cast<std::size_t>(p)].push_back(rows[pos++]);
            }
            while (pos < rows.size()) part_rows[0].push_back(rows[pos++]);
        }

        LabeledDataset initial = take_rows(cd.train, part_rows[0]);
        LabeledDataset held;
        held.num_classes = num_classes;
        cd.held_chunk_sizes.clear();
        for (int p = 1; p < parts; ++p) {
            LabeledDataset chunk = take_rows(cd.train, part_rows[static_cast<std::size_t>(p)]);
            cd.held_chunk_sizes.push_back(static_cast<int>(chunk.size()));
            append_samples(held, chunk);
        }
        cd.train = std::move(initial);
        cd.held_back = std::move(held);
    }
}

ShiftRecord shift_incremental(std::vector<ClientData>& clients, int round,
                              double release_fraction, int period) {
    (void)release_fraction;
    ShiftRecord rec;
    if (period <= 0 || round <= 0 || round % period != 0) return rec;
    for (auto& cd : clients) {
        if (cd.held_chunk_sizes.empty()) continue;
        const int take = cd.held_chunk_sizes.front();
        cd.held_chunk_sizes.erase(cd.held_chunk_sizes.begin());
        std::vector<long> head(static_cast<std::size_t>(take));
        std::iota(head.begin(), head.end(), 0);
        std::vector<long> rest(static_cast<std::size_t>(cd.held_back.size() - take));
        std::iota(rest.begin(), rest.end(), take);
        LabeledDataset chunk = take_rows(cd.held_back, head);
        cd.held_back = take_rows(cd.held_back, rest);
        append_samples(cd.train, chunk);
        rec.mutated = true;
    }
    return rec;
}

}  // namespace cfl
