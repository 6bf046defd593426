#pragma once

#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "driftboost/encode.hpp"
#include "driftboost/gbdt.hpp"
#include "driftboost/ingest.hpp"
#include "driftboost/metrics.hpp"
#include "driftboost/model_io.hpp"
#include "driftboost/pipeline.hpp"
#include "driftboost/synth.hpp"
#include "driftboost/util.hpp"

namespace driftboost {

struct RunConfig {
    std::string manifest_path;
    std::string report_path;
    std::string model_out;  // empty: no model file
    PipelineConfig pipeline;
};

struct SimulateResult {
    BatchReport report;
    std::optional<ModelBundle> bundle;
    BudgetClock clock;
    double last_full_cost = 0.0;
};

// Test-then-train over the manifest's batches in order. Labeled batches are
// scored into the report; unlabeled ones are only predicted.
inline SimulateResult run_simulation(const DatasetManifest& manifest,
                                     const PipelineConfig& config) {
    manifest.validate();
    PipelineState state = init_pipeline(manifest.schema, config, manifest.budget_seconds,
                                        static_cast<int>(manifest.batch_paths.size()));
    std::vector<BatchOutcome> outcomes;
    for (std::size_t i = 0; i < manifest.batch_paths.size(); ++i) {
        Batch batch = load_batch(manifest.batch_paths[i], manifest.schema, static_cast<int>(i + 1));
        BatchResult r = process_batch(state, batch);
        if (batch.labels)
            outcomes.push_back({batch.index, std::move(r.predictions), *batch.labels,
                                std::move(r.mode), r.seconds});
    }

    SimulateResult out;
    out.report = batch_report(outcomes);
    out.clock = state.clock;
    out.last_full_cost = state.last_full_cost;
    if (state.model)
        out.bundle = ModelBundle{state.schema, state.stats, *state.encoders, state.selected,
                                 *state.model};
    return out;
}

inline SimulateResult run_simulation(const RunConfig& config) {
    DatasetManifest manifest = load_manifest(config.manifest_path);
    SimulateResult result = run_simulation(manifest, config.pipeline);

    std::ofstream report(config.report_path, std::ios::binary);
    if (!report) throw DataError("cannot write report: " + config.report_path);
    report << report_to_tsv(result.report);
    if (!report) throw DataError("cannot write report: " + config.report_path);

    if (!config.model_out.empty()) {
        if (!result.bundle) throw DataError("no model was trained; nothing to save");
        save_model(*result.bundle, config.model_out);
    }
    return result;
}

namespace detail {

inline void add_simulate_flags(CLI::App& cmd, RunConfig& cfg) {
    cmd.add_option("--manifest", cfg.manifest_path, "Dataset manifest file")->required();
    cmd.add_option("--out", cfg.report_path, "Report TSV output path")->required();
    cmd.add_option("--model-out", cfg.model_out, "Write the final model here");

    WindowConfig& w = cfg.pipeline.window;
    cmd.add_option("--window", w.window_batches, "Sliding window size in batches");
    cmd.add_option("--select-q", w.select_proportion, "Proportion of features kept by selection");
    cmd.add_option("--pretrain-rounds", w.pretrain_rounds, "Boosting rounds for the selection model");
    cmd.add_option_function<std::string>(
           "--full-retrain",
           [&w](const std::string& s) {
               auto p = parse_retrain_policy(s);
               if (!p) throw CLI::ValidationError("--full-retrain",
                                                  "must be ALWAYS, BUDGETED or NEVER");
               w.full_retrain = *p;
           },
           "Retrain policy: ALWAYS, BUDGETED or NEVER")
        ->type_name("POLICY");
    cmd.add_option("--valid-fraction", w.valid_fraction,
                   "Tail fraction of the newest batch held out for early stopping");
    cmd.add_option("--row-cap", w.row_cap, "Row cap per training window");

    cmd.add_option("--p0", cfg.pipeline.p0, "Learning rate before the first batch");
    cmd.add_option("--step-coeff", cfg.pipeline.step_coeff, "Per-batch learning rate increment");
    cmd.add_option("--seed", cfg.pipeline.seed, "Master seed");
    cmd.add_option("--threads", cfg.pipeline.num_threads, "Worker threads for training");

    TrainParams& t = cfg.pipeline.train;
    cmd.add_option("--learning-rate", t.learning_rate,
                   "Base shrinkage (the batch schedule overrides it during simulation)");
    cmd.add_option("--num-iterations", t.num_iterations_max, "Max boosting rounds per training");
    cmd.add_option("--early-stopping-rounds", t.early_stopping_rounds,
                   "Patience in rounds; 0 disables early stopping");
    cmd.add_option("--reg-alpha", t.reg_alpha, "L1 regularization on leaf outputs");
    cmd.add_option("--reg-lambda", t.reg_lambda, "L2 regularization on leaf outputs");
    cmd.add_option("--min-split-gain", t.min_split_gain, "Minimum gain to accept a split");
    cmd.add_option("--max-depth", t.max_depth, "Maximum tree depth");
    cmd.add_option("--min-child-hessian", t.min_child_hessian,
                   "Minimum hessian sum on each side of a split");
    cmd.add_option("--max-bins", t.max_bins, "Histogram bins per feature (2..255)");
}

inline void add_gen_drift_flags(CLI::App& cmd, DriftSpec& spec, std::string& out_dir,
                                double& budget_seconds) {
    cmd.add_option("--out-dir", out_dir, "Directory for batch files and manifest")->required();
    cmd.add_option("--batches", spec.batches, "Number of batches");
    cmd.add_option("--rows", spec.rows_per_batch, "Rows per batch");
    cmd.add_option("--cat", spec.n_cat, "Categorical columns");
    cmd.add_option("--num", spec.n_num, "Numeric columns");
    cmd.add_option("--mvc", spec.n_mvc, "Multi-value categorical columns");
    cmd.add_option("--time", spec.n_time, "Timestamp columns");
    cmd.add_option("--drift-at", spec.drift_at,
                   "First batch under the drifted concept (> batches: never)");
    cmd.add_option_function<std::string>(
           "--drift-kind",
           [&spec](const std::string& s) {
               auto k = parse_drift_kind(s);
               if (!k) throw CLI::ValidationError("--drift-kind", "must be FLIP, ROTATE or SHIFT");
               spec.drift_kind = *k;
           },
           "Drift kind: FLIP, ROTATE or SHIFT")
        ->type_name("KIND");
    cmd.add_option("--seed", spec.seed, "Generator seed");
    cmd.add_option("--budget-seconds", budget_seconds, "Budget recorded in the manifest");
}

}  // namespace detail

// Shared entry point for the binary and the in-process CLI tests.
inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"driftboost: budgeted gradient boosting over drifting batch streams"};
    app.require_subcommand(1);

    RunConfig run_cfg;
    CLI::App* simulate = app.add_subcommand(
        "simulate", "Stream a manifest through test-then-train and write a report");
    detail::add_simulate_flags(*simulate, run_cfg);

    DriftSpec spec;
    std::string gen_out_dir;
    double gen_budget = 3600.0;
    CLI::App* gen = app.add_subcommand("gen-drift", "Generate a synthetic drifting stream");
    detail::add_gen_drift_flags(*gen, spec, gen_out_dir, gen_budget);

    std::string model_path, batch_path, pred_out;
    CLI::App* predict = app.add_subcommand("predict", "Score one batch with a saved model");
    predict->add_option("--model", model_path, "Model file")->required();
    predict->add_option("--batch", batch_path, "Batch TSV to score")->required();
    predict->add_option("--out", pred_out, "Output path, one probability per row")->required();

    // Out-of-range flag values are usage mistakes, not bad data.
    auto check_usage = [](auto&& validate) {
        try {
            validate();
        } catch (const DataError& e) {
            throw UsageError(e.what());
        }
    };

    try {
        app.parse(argc, argv);

        if (simulate->parsed()) {
            check_usage([&] { run_cfg.pipeline.validate(); });
            SimulateResult result = run_simulation(run_cfg);
            std::cout << "average_auc\t" << format_double(result.report.average_auc) << "\n";
        } else if (gen->parsed()) {
            check_usage([&] {
                spec.validate();
                if (!(gen_budget > 0)) throw DataError("budget_seconds must be > 0");
            });
            DatasetManifest manifest = gen_stream(spec, gen_out_dir, gen_budget);
            (void)manifest;
            std::cout << (std::filesystem::path(gen_out_dir) / "manifest.txt").string() << "\n";
        } else if (predict->parsed()) {
            ModelBundle bundle = load_model(model_path);
            Batch batch = load_batch(batch_path, bundle.schema, 1);
            std::vector<double> proba = predict_batch(bundle, batch);
            std::ofstream out(pred_out, std::ios::binary);
            if (!out) throw DataError("cannot write predictions: " + pred_out);
            for (double p : proba) out << format_double(p) << "\n";
            if (!out) throw DataError("cannot write predictions: " + pred_out);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace driftboost
