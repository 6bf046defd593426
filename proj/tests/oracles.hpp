#pragma once

// Independent reference implementations used to check the fast paths. Each is
// written directly from the defining math (all-pairs counting, exhaustive
// enumeration, finite differences) and deliberately shares no code with the
// library internals it validates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace oracle {

// P(score_pos > score_neg) + 0.5 P(tie) by brute-force pair counting.
inline double auc_all_pairs(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 0) continue;
        ++n_pos;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] != 0) continue;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    for (int y : labels) n_neg += y == 0 ? 1 : 0;
    return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct RootSplit {
    bool found = false;
    std::size_t feature = 0;
    std::size_t cut = 0;  // split after the cut-th distinct value (0-based)
    double gain = 0.0;
    // Best gain among all OTHER candidate (feature, cut) pairs; tells the
    // caller whether the optimum is numerically isolated.
    bool has_runner_up = false;
    double runner_up_gain = 0.0;
};

// Exhaustive root split over raw column values: every boundary between
// adjacent distinct values of every feature, scored with the regularized
// Newton objective. Ties resolve to the lowest feature, then lowest cut.
inline RootSplit best_root_split(const std::vector<std::vector<double>>& columns,
                                 const std::vector<double>& grads,
                                 const std::vector<double>& hess, double reg_alpha,
                                 double reg_lambda, double min_split_gain,
                                 double min_child_hessian) {
    auto shrink = [&](double g) {
        double a = std::abs(g) - reg_alpha;
        return a > 0 ? (g > 0 ? a : -a) : 0.0;
    };
    auto score = [&](double g, double h) {
        double t = shrink(g);
        return t * t / (h + reg_lambda);
    };

    const std::size_t n = grads.size();
    double g_total = 0, h_total = 0;
    for (std::size_t r = 0; r < n; ++r) {
        g_total += grads[r];
        h_total += hess[r];
    }

    RootSplit best;
    for (std::size_t f = 0; f < columns.size(); ++f) {
        std::vector<double> distinct = columns[f];
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        for (std::size_t cut = 0; cut + 1 < distinct.size(); ++cut) {
            double gl = 0, hl = 0;
            for (std::size_t r = 0; r < n; ++r)
                if (columns[f][r] <= distinct[cut]) {
                    gl += grads[r];
                    hl += hess[r];
                }
            double gr = g_total - gl, hr = h_total - hl;
            if (hl < min_child_hessian || hr < min_child_hessian) continue;
            double gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(g_total, h_total));
            if (!(gain > 0.0) || gain < min_split_gain) continue;
            if (!best.found || gain > best.gain) {
                if (best.found) {
                    best.has_runner_up = true;
                    best.runner_up_gain = best.gain;
                }
                best.found = true;
                best.feature = f;
                best.cut = cut;
                best.gain = gain;
            } else if (!best.has_runner_up || gain > best.runner_up_gain) {
                best.has_runner_up = true;
                best.runner_up_gain = gain;
            }
        }
    }
    return best;
}

// Logistic loss written for numerical stability; the derivative checks below
// difference it directly.
inline double logistic_loss(double margin, int label) {
    auto softplus = [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); };
    return label != 0 ? softplus(-margin) : softplus(margin);
}

inline double fd_gradient(double margin, int label, double h = 1e-5) {
    return (logistic_loss(margin + h, label) - logistic_loss(margin - h, label)) / (2.0 * h);
}

inline double fd_hessian(double margin, int label, double h = 1e-5) {
    return (logistic_loss(margin + h, label) - 2.0 * logistic_loss(margin, label) +
            logistic_loss(margin - h, label)) /
           (h * h);
}

// Distinct-value census used against the quantile binner: how many distinct
// values fall strictly below a proposed edge.
inline std::size_t distinct_below(std::vector<double> values, double edge) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::size_t k = 0;
    while (k < values.size() && values[k] < edge) ++k;
    return k;
}

}  // namespace oracle
