#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "driftboost/encode.hpp"
#include "driftboost/metrics.hpp"
#include "driftboost/util.hpp"

namespace driftboost {

struct TrainParams {
    double learning_rate = 0.1;   // per-tree shrinkage
    int num_iterations_max = 100;
    int early_stopping_rounds = 20;  // 0 disables
    double reg_alpha = 0.0;
    double reg_lambda = 1.0;
    double min_split_gain = 0.0;
    int max_depth = 6;
    double min_child_hessian = 1e-3;
    int max_bins = 255;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0 && learning_rate <= 1.0))
            throw DataError("learning_rate must be in (0, 1]");
        if (num_iterations_max < 0) throw DataError("num_iterations_max must be >= 0");
        if (early_stopping_rounds < 0) throw DataError("early_stopping_rounds must be >= 0");
        if (reg_alpha < 0.0) throw DataError("reg_alpha must be >= 0");
        if (reg_lambda < 0.0) throw DataError("reg_lambda must be >= 0");
        if (min_split_gain < 0.0) throw DataError("min_split_gain must be >= 0");
        if (max_depth < 1) throw DataError("max_depth must be >= 1");
        if (min_child_hessian < 0.0) throw DataError("min_child_hessian must be >= 0");
        if (max_bins < 2 || max_bins > 255) throw DataError("max_bins must be in [2, 255]");
    }
};

inline constexpr double kHessianFloor = 1e-16;

inline std::pair<double, double> logistic_grad_hess(double margin, int label) {
    double p = sigmoid(margin);
    double grad = p - static_cast<double>(label);
    double hess = std::max(p * (1.0 - p), kHessianFloor);
    return {grad, hess};
}

inline double soft_threshold(double g, double alpha) {
    if (g > alpha) return g - alpha;
    if (g < -alpha) return g + alpha;
    return 0.0;
}

inline double leaf_weight(double g, double h, double reg_lambda, double reg_alpha) {
    double t = soft_threshold(g, reg_alpha);
    if (t == 0.0) return 0.0;
    return -t / (h + reg_lambda);
}

namespace detail {
inline double leaf_score(double g, double h, double reg_lambda, double reg_alpha) {
    double t = soft_threshold(g, reg_alpha);
    if (t == 0.0) return 0.0;
    return t * t / (h + reg_lambda);
}
}  // namespace detail

inline double split_gain(double gl, double hl, double gr, double hr, double reg_lambda,
                         double reg_alpha) {
    return 0.5 * (detail::leaf_score(gl, hl, reg_lambda, reg_alpha) +
                  detail::leaf_score(gr, hr, reg_lambda, reg_alpha) -
                  detail::leaf_score(gl + gr, hl + hr, reg_lambda, reg_alpha));
}

// Per feature: strictly increasing upper edges from quantiles of the fit data.
// bin id = number of edges strictly below the value, so values in
// (edge[b-1], edge[b]] land in bin b.
struct BinMapper {
    std::vector<std::vector<double>> edges;

    std::size_t feature_count() const { return edges.size(); }
    int bin_count(std::size_t f) const { return static_cast<int>(edges[f].size()) + 1; }

    int bin_of(std::size_t f, double value) const {
        const auto& e = edges[f];
        return static_cast<int>(std::lower_bound(e.begin(), e.end(), value) - e.begin());
    }
};

inline BinMapper fit_bins(const FeatureMatrix& matrix, int max_bins) {
    if (matrix.row_count < 1) throw DataError("cannot fit bins on empty data");
    if (max_bins < 2 || max_bins > 255) throw DataError("max_bins must be in [2, 255]");
    BinMapper mapper;
    mapper.edges.resize(matrix.feature_count);
    std::vector<double> vals;
    for (std::size_t f = 0; f < matrix.feature_count; ++f) {
        vals.clear();
        vals.reserve(matrix.row_count);
        for (std::size_t r = 0; r < matrix.row_count; ++r) vals.push_back(matrix.at(r, f));
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        const std::size_t m = vals.size();
        auto& edges = mapper.edges[f];
        if (m <= 1) continue;
        if (m <= static_cast<std::size_t>(max_bins)) {
            for (std::size_t i = 0; i + 1 < m; ++i) {
                double e = (vals[i] + vals[i + 1]) / 2.0;
                if (edges.empty() || e > edges.back()) edges.push_back(e);
            }
        } else {
            const std::size_t bins = static_cast<std::size_t>(max_bins);
            for (std::size_t k = 1; k < bins; ++k) {
                std::size_t idx = k * m / bins;  // quantile position over distinct values
                double e = (vals[idx - 1] + vals[idx]) / 2.0;
                if (edges.empty() || e > edges.back()) edges.push_back(e);
            }
        }
    }
    return mapper;
}

// Column-major bin ids; bin counts never exceed 255 so one byte per cell.
struct BinnedMatrix {
    std::size_t row_count = 0;
    std::size_t feature_count = 0;
    std::vector<std::uint8_t> bins;
    std::vector<int> bin_counts;

    std::uint8_t at(std::size_t r, std::size_t f) const { return bins[f * row_count + r]; }
};

inline BinnedMatrix bin_matrix(const BinMapper& mapper, const FeatureMatrix& matrix) {
    if (matrix.feature_count != mapper.feature_count())
        throw DataError("feature count does not match bin mapper");
    BinnedMatrix out;
    out.row_count = matrix.row_count;
    out.feature_count = matrix.feature_count;
    out.bins.resize(out.row_count * out.feature_count);
    out.bin_counts.resize(out.feature_count);
    for (std::size_t f = 0; f < out.feature_count; ++f) {
        out.bin_counts[f] = mapper.bin_count(f);
        std::uint8_t* col = out.bins.data() + f * out.row_count;
        for (std::size_t r = 0; r < out.row_count; ++r)
            col[r] = static_cast<std::uint8_t>(mapper.bin_of(f, matrix.at(r, f)));
    }
    return out;
}

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    int threshold = 0;  // bin <= threshold routes left
    int left = -1;
    int right = -1;
    double weight = 0.0;  // leaf margin contribution
    double gain = 0.0;    // accepted split gain

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    bool single_leaf() const { return nodes.size() == 1; }

    double score(const BinnedMatrix& data, std::size_t row) const {
        int n = 0;
        while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
            const TreeNode& node = nodes[static_cast<std::size_t>(n)];
            n = data.at(row, static_cast<std::size_t>(node.feature)) <= node.threshold
                    ? node.left
                    : node.right;
        }
        return nodes[static_cast<std::size_t>(n)].weight;
    }
};

namespace detail {

struct SplitCand {
    double gain = -std::numeric_limits<double>::infinity();
    int feature = std::numeric_limits<int>::max();
    int threshold = std::numeric_limits<int>::max();
    double gl = 0, hl = 0, gr = 0, hr = 0;

    bool valid() const { return feature != std::numeric_limits<int>::max(); }
};

// Strict ordering: higher gain, then lower feature index, then lower
// threshold. Makes the parallel reduction order-independent.
inline bool better(const SplitCand& a, const SplitCand& b) {
    if (a.gain != b.gain) return a.gain > b.gain;
    if (a.feature != b.feature) return a.feature < b.feature;
    return a.threshold < b.threshold;
}

struct TreeBuildContext {
    const BinnedMatrix& data;
    const std::vector<double>& grads;
    const std::vector<double>& hess;
    const TrainParams& params;
    int num_threads;
    std::vector<std::size_t> row_index;
    std::vector<TreeNode> nodes;
    std::vector<double> row_output;  // leaf weight per training row

    SplitCand best_split_in_range(std::size_t lo, std::size_t hi, double g_total, double h_total,
                                  std::size_t f_begin, std::size_t f_end) const {
        SplitCand best;
        std::vector<double> hg, hh;
        for (std::size_t f = f_begin; f < f_end; ++f) {
            int nbins = data.bin_counts[f];
            if (nbins < 2) continue;
            hg.assign(static_cast<std::size_t>(nbins), 0.0);
            hh.assign(static_cast<std::size_t>(nbins), 0.0);
            const std::uint8_t* col = data.bins.data() + f * data.row_count;
            for (std::size_t i = lo; i < hi; ++i) {
                std::size_t r = row_index[i];
                hg[col[r]] += grads[r];
                hh[col[r]] += hess[r];
            }
            double gl = 0.0, hl = 0.0;
            for (int t = 0; t + 1 < nbins; ++t) {
                gl += hg[static_cast<std::size_t>(t)];
                hl += hh[static_cast<std::size_t>(t)];
                double gr = g_total - gl;
                double hr = h_total - hl;
                if (hl < params.min_child_hessian || hr < params.min_child_hessian) continue;
                double gain = split_gain(gl, hl, gr, hr, params.reg_lambda, params.reg_alpha);
                if (gain <= 0.0 || gain < params.min_split_gain) continue;
                SplitCand cand{gain, static_cast<int>(f), t, gl, hl, gr, hr};
                if (better(cand, best)) best = cand;
            }
        }
        return best;
    }

    SplitCand find_best_split(std::size_t lo, std::size_t hi, double g_total, double h_total) {
        if (num_threads <= 1 || data.feature_count < 2)
            return best_split_in_range(lo, hi, g_total, h_total, 0, data.feature_count);
        std::size_t workers =
            std::min<std::size_t>(static_cast<std::size_t>(num_threads), data.feature_count);
        std::vector<SplitCand> results(workers);
        std::vector<std::thread> threads;
        threads.reserve(workers);
        std::size_t chunk = (data.feature_count + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            std::size_t f_begin = w * chunk;
            std::size_t f_end = std::min(f_begin + chunk, data.feature_count);
            threads.emplace_back([this, lo, hi, g_total, h_total, f_begin, f_end, w, &results] {
                results[w] = best_split_in_range(lo, hi, g_total, h_total, f_begin, f_end);
            });
        }
        for (auto& t : threads) t.join();
        SplitCand best;
        for (const auto& cand : results)
            if (cand.valid() && better(cand, best)) best = cand;
        return best;
    }

    int build_node(std::size_t lo, std::size_t hi, int depth, double g_total, double h_total) {
        int id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        SplitCand split;
        if (depth < params.max_depth && hi - lo >= 2)
            split = find_best_split(lo, hi, g_total, h_total);
        if (!split.valid()) {
            double w = leaf_weight(g_total, h_total, params.reg_lambda, params.reg_alpha);
            nodes[static_cast<std::size_t>(id)].weight = w;
            for (std::size_t i = lo; i < hi; ++i) row_output[row_index[i]] = w;
            return id;
        }
        const std::uint8_t* col =
            data.bins.data() + static_cast<std::size_t>(split.feature) * data.row_count;
        auto mid_it = std::stable_partition(
            row_index.begin() + static_cast<std::ptrdiff_t>(lo),
            row_index.begin() + static_cast<std::ptrdiff_t>(hi),
            [&](std::size_t r) { return col[r] <= split.threshold; });
        std::size_t mid = static_cast<std::size_t>(mid_it - row_index.begin());
        nodes[static_cast<std::size_t>(id)].feature = split.feature;
        nodes[static_cast<std::size_t>(id)].threshold = split.threshold;
        nodes[static_cast<std::size_t>(id)].gain = split.gain;
        int left = build_node(lo, mid, depth + 1, split.gl, split.hl);
        int right = build_node(mid, hi, depth + 1, split.gr, split.hr);
        nodes[static_cast<std::size_t>(id)].left = left;
        nodes[static_cast<std::size_t>(id)].right = right;
        return id;
    }
};

}  // namespace detail

struct TreeBuildResult {
    Tree tree;
    std::vector<double> feature_gains;  // accumulated accepted-split gain per feature
    std::vector<double> row_output;     // tree output per training row
};

// Greedy depth-wise growth: per node, the max-gain (feature, bin threshold)
// split subject to min_split_gain and min_child_hessian on both children.
inline TreeBuildResult build_tree(const BinnedMatrix& data, const std::vector<double>& grads,
                                  const std::vector<double>& hess, const TrainParams& params,
                                  int num_threads = 1) {
    if (data.row_count == 0) throw DataError("cannot build tree on empty data");
    if (grads.size() != data.row_count || hess.size() != data.row_count)
        throw DataError("grads/hess length does not match row count");

    detail::TreeBuildContext ctx{data, grads, hess, params, num_threads, {}, {}, {}};
    ctx.row_index.resize(data.row_count);
    for (std::size_t i = 0; i < data.row_count; ++i) ctx.row_index[i] = i;
    ctx.row_output.assign(data.row_count, 0.0);

    double g_total = 0.0, h_total = 0.0;
    for (std::size_t r = 0; r < data.row_count; ++r) {
        g_total += grads[r];
        h_total += hess[r];
    }
    ctx.build_node(0, data.row_count, 0, g_total, h_total);

    TreeBuildResult result;
    result.tree.nodes = std::move(ctx.nodes);
    result.row_output = std::move(ctx.row_output);
    result.feature_gains.assign(data.feature_count, 0.0);
    for (const auto& node : result.tree.nodes)
        if (!node.is_leaf()) result.feature_gains[static_cast<std::size_t>(node.feature)] += node.gain;
    return result;
}

struct ScoredTree {
    Tree tree;
    double shrinkage = 0.0;
};

struct GbdtModel {
    BinMapper bin_mapper;
    std::vector<ScoredTree> trees;
    std::vector<double> importances;
    std::vector<std::string> feature_names;
    TrainParams params;

    std::size_t feature_count() const { return feature_names.size(); }
};

struct Validation {
    const FeatureMatrix* matrix = nullptr;
    const std::vector<int>* labels = nullptr;
    const std::vector<double>* init_margins = nullptr;  // null means zeros

    bool present() const { return matrix != nullptr; }
};

struct TrainStats {
    int rounds_built = 0;
    int best_round = -1;  // -1 when early stopping was off
    double max_round_seconds = 0.0;
    bool stopped_early = false;
    bool hit_deadline = false;
    bool stopped_no_split = false;
};

using Deadline = std::optional<std::chrono::steady_clock::time_point>;

inline std::vector<double> predict_margin(const GbdtModel& model, const FeatureMatrix& matrix) {
    if (matrix.feature_count != model.feature_count())
        throw DataError("feature count mismatch: model has " +
                        std::to_string(model.feature_count()) + ", input has " +
                        std::to_string(matrix.feature_count));
    std::vector<double> margins(matrix.row_count, 0.0);
    if (model.trees.empty()) return margins;
    BinnedMatrix binned = bin_matrix(model.bin_mapper, matrix);
    for (const auto& st : model.trees)
        for (std::size_t r = 0; r < binned.row_count; ++r)
            margins[r] += st.shrinkage * st.tree.score(binned, r);
    return margins;
}

inline std::vector<double> predict_proba(const GbdtModel& model, const FeatureMatrix& matrix) {
    std::vector<double> out = predict_margin(model, matrix);
    for (double& v : out) v = sigmoid(v);
    return out;
}

namespace detail {

// Core boosting loop. Margins evolve in place; trees append to the model.
// Early stopping tracks validation AUC on raw margins (AUC is rank-based, so
// the sigmoid is unnecessary) and truncates to the best round.
inline void boost_loop(GbdtModel& model, const BinnedMatrix& binned,
                       const std::vector<int>& labels, std::vector<double>& margins,
                       const TrainParams& params, const Validation& valid,
                       const BinnedMatrix* valid_binned, std::vector<double> valid_margins,
                       int num_threads, const Deadline& deadline, TrainStats* stats_out) {
    TrainStats stats;
    const bool early_stop = valid.present() && params.early_stopping_rounds > 0;
    if (early_stop) {
        bool has_pos = false, has_neg = false;
        for (int y : *valid.labels) (y != 0 ? has_pos : has_neg) = true;
        if (!has_pos || !has_neg) throw DataError("degenerate validation: single-class labels");
    }

    const std::size_t n = binned.row_count;
    std::vector<double> grads(n), hess(n);
    const std::size_t base_trees = model.trees.size();
    double best_auc = -1.0;
    int best_round = -1;
    int rounds_done = 0;

    for (int round = 0; round < params.num_iterations_max; ++round) {
        if (deadline && std::chrono::steady_clock::now() >= *deadline) {
            stats.hit_deadline = true;
            break;
        }
        auto round_start = std::chrono::steady_clock::now();
        for (std::size_t r = 0; r < n; ++r) {
            auto [g, h] = logistic_grad_hess(margins[r], labels[r]);
            grads[r] = g;
            hess[r] = h;
        }
        TreeBuildResult built = build_tree(binned, grads, hess, params, num_threads);
        if (built.tree.single_leaf()) {
            // no split cleared the gain gate; further rounds would only repeat it
            stats.stopped_no_split = true;
            break;
        }
        model.trees.push_back({std::move(built.tree), params.learning_rate});
        for (std::size_t r = 0; r < n; ++r)
            margins[r] += params.learning_rate * built.row_output[r];
        ++rounds_done;

        bool out_of_patience = false;
        if (early_stop) {
            const Tree& tree = model.trees.back().tree;
            for (std::size_t r = 0; r < valid_binned->row_count; ++r)
                valid_margins[r] += params.learning_rate * tree.score(*valid_binned, r);
            double score = auc(valid_margins, *valid.labels);
            if (score > best_auc) {
                best_auc = score;
                best_round = rounds_done;
            } else if (rounds_done - best_round >= params.early_stopping_rounds) {
                out_of_patience = true;
            }
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - round_start)
                          .count();
        stats.max_round_seconds = std::max(stats.max_round_seconds, secs);
        if (out_of_patience) {
            stats.stopped_early = true;
            break;
        }
    }

    if (early_stop && best_round >= 0)
        model.trees.resize(base_trees + static_cast<std::size_t>(best_round));
    stats.rounds_built = static_cast<int>(model.trees.size() - base_trees);
    stats.best_round = early_stop ? best_round : -1;

    // Importances re-derive from the stored trees by an index-order walk, so
    // recompute them the same way here to keep the equality exact.
    model.importances.assign(model.feature_count(), 0.0);
    for (const auto& st : model.trees)
        for (const auto& node : st.tree.nodes)
            if (!node.is_leaf())
                model.importances[static_cast<std::size_t>(node.feature)] += node.gain;
    if (stats_out) *stats_out = stats;
}

}  // namespace detail

inline GbdtModel train(const FeatureMatrix& matrix, const std::vector<int>& labels,
                       const std::vector<double>& init_margins, const TrainParams& params,
                       const Validation& valid = {}, int num_threads = 1,
                       const Deadline& deadline = {}, TrainStats* stats = nullptr) {
    params.validate();
    if (matrix.row_count == 0) throw DataError("cannot train on empty data");
    if (labels.size() != matrix.row_count) throw DataError("labels length mismatch");
    if (init_margins.size() != matrix.row_count) throw DataError("init_margins length mismatch");

    GbdtModel model;
    model.params = params;
    model.feature_names = matrix.feature_names;
    model.bin_mapper = fit_bins(matrix, params.max_bins);

    BinnedMatrix binned = bin_matrix(model.bin_mapper, matrix);
    std::vector<double> margins = init_margins;

    BinnedMatrix valid_binned;
    std::vector<double> valid_margins;
    if (valid.present()) {
        valid_binned = bin_matrix(model.bin_mapper, *valid.matrix);
        valid_margins = valid.init_margins ? *valid.init_margins
                                           : std::vector<double>(valid.matrix->row_count, 0.0);
    }
    detail::boost_loop(model, binned, labels, margins, params, valid,
                       valid.present() ? &valid_binned : nullptr, std::move(valid_margins),
                       num_threads, deadline, stats);
    return model;
}

inline GbdtModel continue_training(const GbdtModel& model, const FeatureMatrix& matrix,
                                   const std::vector<int>& labels, const TrainParams& params,
                                   const Validation& valid = {}, int num_threads = 1,
                                   const Deadline& deadline = {}, TrainStats* stats = nullptr) {
    params.validate();
    if (matrix.feature_count != model.feature_count())
        throw DataError("feature count mismatch: model has " +
                        std::to_string(model.feature_count()) + ", input has " +
                        std::to_string(matrix.feature_count));
    if (matrix.row_count == 0) throw DataError("cannot train on empty data");
    if (labels.size() != matrix.row_count) throw DataError("labels length mismatch");

    GbdtModel out = model;
    out.params = params;
    std::vector<double> margins = predict_margin(model, matrix);
    BinnedMatrix binned = bin_matrix(out.bin_mapper, matrix);

    BinnedMatrix valid_binned;
    std::vector<double> valid_margins;
    if (valid.present()) {
        valid_binned = bin_matrix(out.bin_mapper, *valid.matrix);
        valid_margins = valid.init_margins ? *valid.init_margins
                                           : predict_margin(model, *valid.matrix);
    }
    detail::boost_loop(out, binned, labels, margins, params, valid,
                       valid.present() ? &valid_binned : nullptr, std::move(valid_margins),
                       num_threads, deadline, stats);
    return out;
}

// Margin carryover for incremental continuation: the current model's raw
// scores on the new data become the next training call's starting margins.
inline std::vector<double> carry_margins(const GbdtModel& model, const FeatureMatrix& matrix) {
    return predict_margin(model, matrix);
}

}  // namespace driftboost
