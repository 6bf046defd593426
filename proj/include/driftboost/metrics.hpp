#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "driftboost/util.hpp"

namespace driftboost {

// Mann-Whitney AUC with midrank tie handling, O(n log n).
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw DataError("scores/labels length mismatch");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += static_cast<std::size_t>(y != 0);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("AUC undefined: labels contain a single class");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        // ranks are 1-based; tied scores share the midrank
        double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] != 0) rank_sum_pos += midrank;
        i = j;
    }
    double np = static_cast<double>(n_pos);
    double nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

struct BatchScore {
    int batch_index = 0;
    double auc = 0.0;
    std::size_t rows = 0;
    std::string mode;
    double seconds = 0.0;
};

struct BatchReport {
    std::vector<BatchScore> batches;
    double average_auc = 0.0;
};

struct BatchOutcome {
    int batch_index = 0;
    std::vector<double> predictions;
    std::vector<int> labels;
    std::string mode;
    double seconds = 0.0;
};

inline BatchReport batch_report(const std::vector<BatchOutcome>& history) {
    if (history.empty()) throw DataError("no scored batches");
    BatchReport report;
    double sum = 0.0;
    for (const auto& h : history) {
        double score;
        try {
            score = auc(h.predictions, h.labels);
        } catch (const DataError& e) {
            throw DataError("batch " + std::to_string(h.batch_index) + ": " + e.what());
        }
        report.batches.push_back({h.batch_index, score, h.predictions.size(), h.mode, h.seconds});
        sum += score;
    }
    report.average_auc = sum / static_cast<double>(history.size());
    return report;
}

inline std::string report_to_tsv(const BatchReport& report) {
    std::string out = "batch\tauc\trows\tmode\tseconds\n";
    for (const auto& b : report.batches) {
        out += std::to_string(b.batch_index);
        out += '\t';
        out += format_double(b.auc);
        out += '\t';
        out += std::to_string(b.rows);
        out += '\t';
        out += b.mode;
        out += '\t';
        out += format_double(b.seconds);
        out += '\n';
    }
    out += "average\t" + format_double(report.average_auc) + "\n";
    return out;
}

}  // namespace driftboost
