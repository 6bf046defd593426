#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "driftboost/encode.hpp"
#include "driftboost/gbdt.hpp"
#include "driftboost/ingest.hpp"
#include "driftboost/util.hpp"

namespace driftboost {

// Batch-indexed learning-rate schedule: each processed batch t adds
// step_coeff * t, so p_t = p0 + step_coeff * t * (t + 1) / 2.
struct LrSchedule {
    double p0 = 0.1;
    double step_coeff = 0.01;
    double p = 0.1;
    int n = 0;
};

inline LrSchedule next_lr(LrSchedule s) {
    s.n += 1;
    s.p += s.step_coeff * static_cast<double>(s.n);
    return s;
}

enum class RetrainPolicy { ALWAYS, BUDGETED, NEVER };
enum class TrainMode { FULL, INCREMENTAL };

inline const char* retrain_policy_name(RetrainPolicy p) {
    switch (p) {
        case RetrainPolicy::ALWAYS: return "ALWAYS";
        case RetrainPolicy::BUDGETED: return "BUDGETED";
        case RetrainPolicy::NEVER: return "NEVER";
    }
    return "?";
}

inline std::optional<RetrainPolicy> parse_retrain_policy(std::string_view s) {
    if (s == "ALWAYS") return RetrainPolicy::ALWAYS;
    if (s == "BUDGETED") return RetrainPolicy::BUDGETED;
    if (s == "NEVER") return RetrainPolicy::NEVER;
    return std::nullopt;
}

struct WindowConfig {
    int window_batches = 3;
    double select_proportion = 0.7;
    int pretrain_rounds = 10;
    RetrainPolicy full_retrain = RetrainPolicy::BUDGETED;
    double valid_fraction = 0.2;
    std::size_t row_cap = 2000000;

    void validate() const {
        if (window_batches < 1) throw DataError("window_batches must be >= 1");
        if (!(select_proportion > 0.0 && select_proportion <= 1.0))
            throw DataError("select_proportion must be in (0, 1]");
        if (pretrain_rounds < 1) throw DataError("pretrain_rounds must be >= 1");
        if (!(valid_fraction >= 0.0 && valid_fraction < 1.0))
            throw DataError("valid_fraction must be in [0, 1)");
        if (row_cap == 0) throw DataError("row_cap must be > 0");
    }
};

// Training time is billed against the budget; prediction is mandatory at any
// budget level and is never billed, so the only possible overshoot is the
// boosting round that straddles the deadline.
struct BudgetClock {
    double budget_seconds = 0.0;
    double consumed_seconds = 0.0;
    int batches_remaining = 0;
    double max_round_seconds = 0.0;

    bool exhausted() const { return consumed_seconds >= budget_seconds; }
    double remaining_seconds() const { return std::max(0.0, budget_seconds - consumed_seconds); }
};

inline constexpr double kBudgetSafetyFactor = 1.5;

inline TrainMode decide_mode(const BudgetClock& clock, double last_full_cost,
                             RetrainPolicy policy, bool first_batch) {
    if (first_batch) return TrainMode::FULL;
    switch (policy) {
        case RetrainPolicy::ALWAYS: return TrainMode::FULL;
        case RetrainPolicy::NEVER: return TrainMode::INCREMENTAL;
        case RetrainPolicy::BUDGETED: {
            if (clock.batches_remaining < 1) throw DataError("no batches remaining");
            double share = clock.remaining_seconds() / static_cast<double>(clock.batches_remaining);
            return share >= kBudgetSafetyFactor * last_full_cost ? TrainMode::FULL
                                                                 : TrainMode::INCREMENTAL;
        }
    }
    throw InternalError("unreachable retrain policy");
}

// Pre-trains a small model on the encoded window and keeps the top ceil(q*F)
// features by gain importance (ties toward the lower index, zero-importance
// features admitted in index order only to reach the count).
inline std::vector<std::uint8_t> select_features(const FeatureMatrix& window_matrix,
                                                 const std::vector<int>& labels,
                                                 const TrainParams& pretrain_params, double q,
                                                 int num_threads = 1, const Deadline& deadline = {}) {
    if (!(q > 0.0 && q <= 1.0)) throw DataError("select proportion must be in (0, 1]");
    bool has_pos = false, has_neg = false;
    for (int y : labels) (y != 0 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw DataError("degenerate labels: single class in window");

    const std::size_t f_count = window_matrix.feature_count;
    std::size_t keep = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(f_count) - 1e-12));
    keep = std::max<std::size_t>(1, std::min(keep, f_count));

    std::vector<std::uint8_t> mask(f_count, 0);
    if (keep == f_count) {
        std::fill(mask.begin(), mask.end(), 1);
        return mask;
    }

    GbdtModel pre = train(window_matrix, labels, std::vector<double>(window_matrix.row_count, 0.0),
                          pretrain_params, {}, num_threads, deadline);
    std::vector<std::size_t> order(f_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pre.importances[a] > pre.importances[b];
    });
    for (std::size_t i = 0; i < keep; ++i) mask[order[i]] = 1;
    return mask;
}

struct PipelineConfig {
    WindowConfig window;
    TrainParams train;
    double p0 = 0.1;
    double step_coeff = 0.01;
    std::uint64_t seed = 0;
    int num_threads = 1;

    void validate() const {
        window.validate();
        train.validate();
        if (!(p0 > 0.0 && p0 <= 1.0)) throw DataError("p0 must be in (0, 1]");
        if (step_coeff < 0.0) throw DataError("step_coeff must be >= 0");
        if (num_threads < 1) throw DataError("num_threads must be >= 1");
    }
};

struct PipelineState {
    FeatureSchema schema;
    PipelineConfig config;
    std::vector<Batch> window;          // raw labeled batches, oldest first
    std::vector<Batch> filled_window;   // capped + missing-filled view of window
    WindowStats stats;
    std::optional<EncoderState> encoders;
    std::optional<GbdtModel> model;
    std::vector<std::uint8_t> selected;
    LrSchedule schedule;
    BudgetClock clock;
    double last_full_cost = 0.0;
};

inline PipelineState init_pipeline(const FeatureSchema& schema, const PipelineConfig& config,
                                   double budget_seconds, int total_batches) {
    schema.validate();
    config.validate();
    if (!(budget_seconds > 0)) throw DataError("budget_seconds must be > 0");
    if (total_batches < 1) throw DataError("total_batches must be >= 1");
    PipelineState state;
    state.schema = schema;
    state.config = config;
    state.schedule = LrSchedule{config.p0, config.step_coeff, config.p0, 0};
    state.clock = BudgetClock{budget_seconds, 0.0, total_batches, 0.0};
    return state;
}

// Appends the labeled batch, evicts beyond K, and re-fits window statistics
// and encoders on the capped, missing-filled window.
inline void update_window(PipelineState& state, const Batch& batch) {
    if (!batch.labels) throw DataError("window batches must be labeled");
    if (!state.window.empty() && batch.index <= state.window.back().index)
        throw DataError("out-of-order batch index " + std::to_string(batch.index) +
                        " (window ends at " + std::to_string(state.window.back().index) + ")");
    state.window.push_back(batch);
    while (state.window.size() > static_cast<std::size_t>(state.config.window.window_batches))
        state.window.erase(state.window.begin());

    state.filled_window = subsample_rows(state.window, state.config.window.row_cap,
                                         mix_seed(state.config.seed, "subsample",
                                                  static_cast<std::uint64_t>(batch.index)));
    state.stats = compute_window_stats(state.filled_window, state.schema);
    for (auto& b : state.filled_window) b = fill_missing(b, state.schema, state.stats);
    state.encoders = fit_encoders(state.filled_window, state.schema);
}

struct BatchResult {
    std::vector<double> predictions;
    std::string mode;  // FULL | INCREMENTAL | SKIPPED | NONE
    double seconds = 0.0;  // learning time billed against the budget
};

namespace detail {

inline FeatureMatrix slice_rows(const FeatureMatrix& m, std::size_t lo, std::size_t hi) {
    FeatureMatrix out;
    out.feature_names = m.feature_names;
    out.feature_count = m.feature_count;
    out.row_count = hi - lo;
    out.values.assign(m.values.begin() + static_cast<std::ptrdiff_t>(lo * m.feature_count),
                      m.values.begin() + static_cast<std::ptrdiff_t>(hi * m.feature_count));
    return out;
}

inline void append_rows(FeatureMatrix& dst, const FeatureMatrix& src) {
    if (dst.feature_count == 0 && dst.row_count == 0) {
        dst = src;
        return;
    }
    if (dst.feature_count != src.feature_count) throw InternalError("matrix width mismatch");
    dst.values.insert(dst.values.end(), src.values.begin(), src.values.end());
    dst.row_count += src.row_count;
}

}  // namespace detail

// Test-then-train: score the incoming batch with the current model, then (when
// labels are present and budget remains) slide the window and learn.
inline BatchResult process_batch(PipelineState& state, const Batch& batch) {
    BatchResult result;
    result.mode = "NONE";

    // PREDICT - always, even with the budget gone.
    if (state.encoders && state.model) {
        Batch filled = fill_missing(batch, state.schema, state.stats);
        FeatureMatrix m = transform_batch(filled, *state.encoders, state.schema);
        result.predictions = predict_proba(*state.model, select_columns(m, state.selected));
    } else {
        result.predictions.assign(batch.row_count(), 0.5);
    }

    // LEARN
    if (batch.labels) {
        if (state.clock.exhausted()) {
            result.mode = "SKIPPED";
        } else {
            const auto learn_start = std::chrono::steady_clock::now();
            const Deadline deadline =
                learn_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                  std::chrono::duration<double>(state.clock.remaining_seconds()));

            update_window(state, batch);
            state.schedule = next_lr(state.schedule);
            const TrainMode mode = decide_mode(state.clock, state.last_full_cost,
                                               state.config.window.full_retrain, !state.model);

            TrainParams params = state.config.train;
            params.learning_rate = std::min(state.schedule.p, 1.0);

            TrainStats train_stats;
            if (mode == TrainMode::FULL) {
                FeatureMatrix window_matrix;
                std::vector<int> window_labels;
                for (const auto& b : state.filled_window) {
                    detail::append_rows(window_matrix,
                                        transform_batch(b, *state.encoders, state.schema));
                    window_labels.insert(window_labels.end(), b.labels->begin(), b.labels->end());
                }

                TrainParams pretrain;
                pretrain.num_iterations_max = state.config.window.pretrain_rounds;
                pretrain.early_stopping_rounds = 0;
                pretrain.seed = state.config.train.seed;
                state.selected = select_features(window_matrix, window_labels, pretrain,
                                                 state.config.window.select_proportion,
                                                 state.config.num_threads, deadline);

                FeatureMatrix masked = select_columns(window_matrix, state.selected);
                std::size_t newest_rows = state.filled_window.back().row_count();
                std::size_t valid_count = static_cast<std::size_t>(
                    static_cast<double>(newest_rows) * state.config.window.valid_fraction);
                std::size_t total = masked.row_count;
                if (valid_count >= total) valid_count = 0;

                FeatureMatrix train_m = detail::slice_rows(masked, 0, total - valid_count);
                std::vector<int> train_y(window_labels.begin(),
                                         window_labels.end() - static_cast<std::ptrdiff_t>(valid_count));
                FeatureMatrix valid_m;
                std::vector<int> valid_y;
                Validation valid;
                std::vector<double> valid_zeros;
                if (valid_count > 0) {
                    valid_m = detail::slice_rows(masked, total - valid_count, total);
                    valid_y.assign(window_labels.end() - static_cast<std::ptrdiff_t>(valid_count),
                                   window_labels.end());
                    bool has_pos = false, has_neg = false;
                    for (int y : valid_y) (y != 0 ? has_pos : has_neg) = true;
                    if (has_pos && has_neg) {
                        valid_zeros.assign(valid_m.row_count, 0.0);
                        valid = Validation{&valid_m, &valid_y, &valid_zeros};
                    }
                }
                bool train_has_pos = false, train_has_neg = false;
                for (int y : train_y) (y != 0 ? train_has_pos : train_has_neg) = true;
                if (!train_has_pos || !train_has_neg)
                    throw DataError("degenerate labels: single class in window");

                state.model = train(train_m, train_y,
                                    std::vector<double>(train_m.row_count, 0.0), params, valid,
                                    state.config.num_threads, deadline, &train_stats);
                result.mode = "FULL";
            } else {
                const Batch& newest = state.filled_window.back();
                FeatureMatrix m = transform_batch(newest, *state.encoders, state.schema);
                FeatureMatrix masked = select_columns(m, state.selected);
                std::size_t total = masked.row_count;
                std::size_t valid_count = static_cast<std::size_t>(
                    static_cast<double>(total) * state.config.window.valid_fraction);
                if (valid_count >= total) valid_count = 0;

                FeatureMatrix train_m = detail::slice_rows(masked, 0, total - valid_count);
                std::vector<int> train_y(newest.labels->begin(),
                                         newest.labels->end() - static_cast<std::ptrdiff_t>(valid_count));
                FeatureMatrix valid_m;
                std::vector<int> valid_y;
                Validation valid;
                if (valid_count > 0) {
                    valid_m = detail::slice_rows(masked, total - valid_count, total);
                    valid_y.assign(newest.labels->end() - static_cast<std::ptrdiff_t>(valid_count),
                                   newest.labels->end());
                    bool has_pos = false, has_neg = false;
                    for (int y : valid_y) (y != 0 ? has_pos : has_neg) = true;
                    if (has_pos && has_neg) valid = Validation{&valid_m, &valid_y, nullptr};
                }
                bool train_has_pos = false, train_has_neg = false;
                for (int y : train_y) (y != 0 ? train_has_pos : train_has_neg) = true;
                if (train_has_pos && train_has_neg) {
                    state.model = continue_training(*state.model, train_m, train_y, params, valid,
                                                    state.config.num_threads, deadline, &train_stats);
                }
                result.mode = "INCREMENTAL";
            }

            double learn_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                              learn_start)
                                    .count();
            state.clock.consumed_seconds += learn_secs;
            state.clock.max_round_seconds =
                std::max(state.clock.max_round_seconds, train_stats.max_round_seconds);
            if (mode == TrainMode::FULL) state.last_full_cost = learn_secs;
            result.seconds = learn_secs;
        }
    }

    state.clock.batches_remaining = std::max(0, state.clock.batches_remaining - 1);
    return result;
}

}  // namespace driftboost
