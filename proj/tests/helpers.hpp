#pragma once

// Shared scaffolding for the test suites: throwaway directories, small schema
// and matrix builders, and portable random draws that do not depend on
// standard-library distribution internals.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "driftboost/driftboost.hpp"

namespace testutil {

inline std::filesystem::path fresh_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    auto dir = std::filesystem::temp_directory_path() /
               ("driftboost-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir);
    return dir;
}

struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) : path(fresh_dir(tag)) {}
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double gaussian(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// n in [lo, hi] without std::uniform_int_distribution (implementation-defined
// sequences would make failures non-reproducible across toolchains).
inline std::int64_t rand_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline driftboost::FeatureSchema num_schema(int n_features, const std::string& prefix = "f") {
    driftboost::FeatureSchema schema;
    for (int i = 0; i < n_features; ++i)
        schema.columns.push_back({prefix + std::to_string(i), driftboost::Role::NUM});
    schema.label = "y";
    schema.positive_label = "1";
    return schema;
}

inline driftboost::FeatureMatrix make_matrix(std::size_t rows, std::size_t cols,
                                             std::vector<double> values) {
    driftboost::FeatureMatrix m;
    m.row_count = rows;
    m.feature_count = cols;
    m.values = std::move(values);
    for (std::size_t f = 0; f < cols; ++f) m.feature_names.push_back("f" + std::to_string(f));
    return m;
}

inline driftboost::FeatureMatrix random_matrix(std::mt19937_64& rng, std::size_t rows,
                                               std::size_t cols) {
    std::vector<double> values(rows * cols);
    for (double& v : values) v = gaussian(rng);
    return make_matrix(rows, cols, std::move(values));
}

// Labels from a random linear concept over the first `signal` columns plus
// logistic noise; guaranteed to contain both classes (resamples one row if
// needed).
inline std::vector<int> linear_labels(std::mt19937_64& rng, const driftboost::FeatureMatrix& m,
                                      std::size_t signal, double scale = 3.0) {
    std::vector<double> w(signal);
    for (double& v : w) v = gaussian(rng);
    std::vector<int> labels(m.row_count);
    for (std::size_t r = 0; r < m.row_count; ++r) {
        double z = 0;
        for (std::size_t f = 0; f < signal && f < m.feature_count; ++f) z += w[f] * m.at(r, f);
        labels[r] = uniform01(rng) < driftboost::sigmoid(scale * z) ? 1 : 0;
    }
    bool has_pos = false, has_neg = false;
    for (int y : labels) (y != 0 ? has_pos : has_neg) = true;
    if (!has_pos) labels[0] = 1;
    if (!has_neg) labels[0] = 0;
    return labels;
}

inline driftboost::Batch batch_from_matrix(const driftboost::FeatureMatrix& m,
                                           const std::vector<int>& labels, int index) {
    driftboost::Batch b;
    b.index = index;
    b.rows.resize(m.row_count);
    for (std::size_t r = 0; r < m.row_count; ++r) {
        b.rows[r].reserve(m.feature_count);
        for (std::size_t f = 0; f < m.feature_count; ++f)
            b.rows[r].push_back(driftboost::format_double(m.at(r, f)));
    }
    b.labels = labels;
    return b;
}

inline bool same_tree(const driftboost::Tree& a, const driftboost::Tree& b) {
    if (a.nodes.size() != b.nodes.size()) return false;
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
        const auto& x = a.nodes[i];
        const auto& y = b.nodes[i];
        if (x.feature != y.feature || x.threshold != y.threshold || x.left != y.left ||
            x.right != y.right || x.weight != y.weight || x.gain != y.gain)
            return false;
    }
    return true;
}

inline bool same_model(const driftboost::GbdtModel& a, const driftboost::GbdtModel& b) {
    if (a.trees.size() != b.trees.size()) return false;
    for (std::size_t t = 0; t < a.trees.size(); ++t)
        if (a.trees[t].shrinkage != b.trees[t].shrinkage ||
            !same_tree(a.trees[t].tree, b.trees[t].tree))
            return false;
    return a.importances == b.importances && a.bin_mapper.edges == b.bin_mapper.edges;
}

}  // namespace testutil
