#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "driftboost/encode.hpp"
#include "driftboost/gbdt.hpp"
#include "driftboost/ingest.hpp"
#include "driftboost/util.hpp"

namespace driftboost {

inline constexpr std::string_view kModelMagic = "driftboost-model v1";

// Everything predict needs, detached from the streaming state: the schema to
// parse a batch, the window statistics to fill missing cells, the fitted
// encoders, the feature mask, and the boosted model itself.
struct ModelBundle {
    FeatureSchema schema;
    WindowStats stats;
    EncoderState encoders;
    std::vector<std::uint8_t> selected;
    GbdtModel model;
};

inline std::vector<double> predict_batch(const ModelBundle& bundle, const Batch& batch) {
    Batch filled = fill_missing(batch, bundle.schema, bundle.stats);
    FeatureMatrix m = transform_batch(filled, bundle.encoders, bundle.schema);
    return predict_proba(bundle.model, select_columns(m, bundle.selected));
}

namespace detail {

// Field values travel on TAB-separated lines, so the two line-breaking bytes
// and the separator itself are the only characters a value cannot hold. TSV
// input can never contain them; this guards programmatic callers.
inline void check_model_field(const std::string& s) {
    if (s.find_first_of("\t\n\r") != std::string::npos)
        throw DataError("model field contains tab or newline: " + s);
}

template <typename V>
inline std::vector<std::pair<std::string, V>> sorted_items(
    const std::unordered_map<std::string, V>& m) {
    std::vector<std::pair<std::string, V>> items(m.begin(), m.end());
    std::sort(items.begin(), items.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return items;
}

inline void write_token_map(
    std::ostream& os, std::string_view section, std::string_view entry,
    const std::unordered_map<std::string, std::unordered_map<std::string, std::int64_t>>& maps) {
    os << section << '\t' << maps.size() << '\n';
    for (const auto& [col, table] : sorted_items(maps)) {
        check_model_field(col);
        os << "map\t" << col << '\t' << table.size() << '\n';
        for (const auto& [token, value] : sorted_items(table)) {
            check_model_field(token);
            os << entry << '\t' << token << '\t' << value << '\n';
        }
    }
}

// Cursor over pre-split lines; every record is one line of TAB fields whose
// first field names the record.
struct ModelReader {
    std::vector<std::string> lines;
    std::size_t pos = 0;

    bool done() const { return pos >= lines.size(); }

    std::vector<std::string> expect(std::string_view tag, std::size_t min_fields) {
        if (done()) throw DataError("truncated model: expected '" + std::string(tag) + "' record");
        auto fields_view = split_view(lines[pos], '\t');
        std::vector<std::string> fields(fields_view.begin(), fields_view.end());
        if (fields.empty() || fields[0] != tag)
            throw DataError("malformed model at line " + std::to_string(pos + 1) + ": expected '" +
                            std::string(tag) + "'");
        if (fields.size() < min_fields)
            throw DataError("malformed model at line " + std::to_string(pos + 1) +
                            ": record too short");
        ++pos;
        return fields;
    }

    std::int64_t to_int(const std::string& s) const {
        std::int64_t v = 0;
        if (!try_parse_int(s, v))
            throw DataError("malformed model at line " + std::to_string(pos) + ": bad integer '" +
                            s + "'");
        return v;
    }

    double to_double(const std::string& s) const {
        double v = 0.0;
        if (!try_parse_double(s, v))
            throw DataError("malformed model at line " + std::to_string(pos) + ": bad number '" +
                            s + "'");
        return v;
    }
};

inline void read_token_map(
    ModelReader& r, std::string_view section, std::string_view entry,
    std::unordered_map<std::string, std::unordered_map<std::string, std::int64_t>>& out) {
    auto head = r.expect(section, 2);
    std::size_t n_cols = static_cast<std::size_t>(r.to_int(head[1]));
    for (std::size_t c = 0; c < n_cols; ++c) {
        auto m = r.expect("map", 3);
        auto& table = out[m[1]];
        std::size_t n_tok = static_cast<std::size_t>(r.to_int(m[2]));
        for (std::size_t t = 0; t < n_tok; ++t) {
            auto e = r.expect(entry, 3);
            table[e[1]] = r.to_int(e[2]);
        }
    }
}

}  // namespace detail

inline std::string model_to_string(const ModelBundle& bundle) {
    bundle.schema.validate();
    if (bundle.selected.size() != bundle.encoders.output_layout.size())
        throw DataError("feature mask does not match encoder layout");
    if (bundle.model.importances.size() != bundle.model.feature_count())
        throw InternalError("model importances out of sync");

    std::ostringstream os;
    os << kModelMagic << '\n';

    detail::check_model_field(bundle.schema.label);
    detail::check_model_field(bundle.schema.positive_label);
    os << "schema\t" << bundle.schema.label << '\t' << bundle.schema.positive_label << '\t'
       << bundle.schema.columns.size() << '\n';
    for (const auto& col : bundle.schema.columns) {
        detail::check_model_field(col.name);
        os << "col\t" << col.name << '\t' << role_name(col.role) << '\n';
    }

    os << "stats\t" << bundle.stats.num_median.size() << '\t'
       << (bundle.stats.time_min ? format_int(*bundle.stats.time_min) : "none") << '\n';
    for (const auto& [name, value] : bundle.stats.num_median) {
        detail::check_model_field(name);
        os << "med\t" << name << '\t' << format_double(value) << '\n';
    }

    detail::write_token_map(os, "ordinal", "tok", bundle.encoders.ordinal_maps);
    detail::write_token_map(os, "freq", "tok", bundle.encoders.freq_tables);
    detail::write_token_map(os, "mvc", "tok", bundle.encoders.mvc_freq);

    os << "selected\t" << bundle.selected.size() << '\t';
    for (std::uint8_t bit : bundle.selected) os << (bit ? '1' : '0');
    os << '\n';

    const TrainParams& p = bundle.model.params;
    os << "params\t" << format_double(p.learning_rate) << '\t' << p.num_iterations_max << '\t'
       << p.early_stopping_rounds << '\t' << format_double(p.reg_alpha) << '\t'
       << format_double(p.reg_lambda) << '\t' << format_double(p.min_split_gain) << '\t'
       << p.max_depth << '\t' << format_double(p.min_child_hessian) << '\t' << p.max_bins << '\t'
       << p.seed << '\n';

    os << "features\t" << bundle.model.feature_names.size();
    for (const auto& name : bundle.model.feature_names) {
        detail::check_model_field(name);
        os << '\t' << name;
    }
    os << '\n';

    os << "bins\t" << bundle.model.bin_mapper.edges.size() << '\n';
    for (const auto& edges : bundle.model.bin_mapper.edges) {
        os << "edges\t" << edges.size();
        for (double e : edges) os << '\t' << format_double(e);
        os << '\n';
    }

    os << "trees\t" << bundle.model.trees.size() << '\n';
    for (const auto& st : bundle.model.trees) {
        os << "tree\t" << format_double(st.shrinkage) << '\t' << st.tree.nodes.size() << '\n';
        for (const auto& node : st.tree.nodes)
            os << "node\t" << node.feature << '\t' << node.threshold << '\t' << node.left << '\t'
               << node.right << '\t' << format_double(node.weight) << '\t'
               << format_double(node.gain) << '\n';
    }

    os << "imp\t" << bundle.model.importances.size();
    for (double v : bundle.model.importances) os << '\t' << format_double(v);
    os << '\n';
    os << "end\n";
    return os.str();
}

inline void save_model(const ModelBundle& bundle, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file: " + path);
    out << model_to_string(bundle);
    if (!out) throw DataError("cannot write model file: " + path);
}

inline ModelBundle model_from_string(const std::string& text, const std::string& origin = "model") {
    detail::ModelReader r;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            if (start < text.size()) r.lines.push_back(text.substr(start));
            break;
        }
        std::string line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        r.lines.push_back(std::move(line));
        start = nl + 1;
    }
    if (r.lines.empty()) throw DataError("unreadable model: " + origin + " is empty");
    if (r.lines[0] != kModelMagic)
        throw DataError("unreadable model: " + origin + " does not start with '" +
                        std::string(kModelMagic) + "'");
    r.pos = 1;

    ModelBundle b;
    auto schema_rec = r.expect("schema", 4);
    b.schema.label = schema_rec[1];
    b.schema.positive_label = schema_rec[2];
    std::size_t n_cols = static_cast<std::size_t>(r.to_int(schema_rec[3]));
    for (std::size_t c = 0; c < n_cols; ++c) {
        auto col = r.expect("col", 3);
        auto role = parse_role(col[2]);
        if (!role) throw DataError("unreadable model: unknown role '" + col[2] + "'");
        b.schema.columns.push_back({col[1], *role});
    }
    b.schema.validate();

    auto stats_rec = r.expect("stats", 3);
    std::size_t n_med = static_cast<std::size_t>(r.to_int(stats_rec[1]));
    if (stats_rec[2] != "none") b.stats.time_min = r.to_int(stats_rec[2]);
    for (std::size_t i = 0; i < n_med; ++i) {
        auto med = r.expect("med", 3);
        b.stats.num_median[med[1]] = r.to_double(med[2]);
    }

    detail::read_token_map(r, "ordinal", "tok", b.encoders.ordinal_maps);
    detail::read_token_map(r, "freq", "tok", b.encoders.freq_tables);
    detail::read_token_map(r, "mvc", "tok", b.encoders.mvc_freq);
    b.encoders.output_layout = output_layout_for(b.schema);

    auto sel = r.expect("selected", 3);
    std::size_t n_feat = static_cast<std::size_t>(r.to_int(sel[1]));
    if (sel[2].size() != n_feat || n_feat != b.encoders.output_layout.size())
        throw DataError("unreadable model: feature mask does not match schema layout");
    b.selected.resize(n_feat);
    for (std::size_t f = 0; f < n_feat; ++f) {
        if (sel[2][f] != '0' && sel[2][f] != '1')
            throw DataError("unreadable model: feature mask must be 0/1");
        b.selected[f] = sel[2][f] == '1' ? 1 : 0;
    }

    auto par = r.expect("params", 11);
    TrainParams& p = b.model.params;
    p.learning_rate = r.to_double(par[1]);
    p.num_iterations_max = static_cast<int>(r.to_int(par[2]));
    p.early_stopping_rounds = static_cast<int>(r.to_int(par[3]));
    p.reg_alpha = r.to_double(par[4]);
    p.reg_lambda = r.to_double(par[5]);
    p.min_split_gain = r.to_double(par[6]);
    p.max_depth = static_cast<int>(r.to_int(par[7]));
    p.min_child_hessian = r.to_double(par[8]);
    p.max_bins = static_cast<int>(r.to_int(par[9]));
    p.seed = static_cast<std::uint64_t>(r.to_int(par[10]));

    auto feat = r.expect("features", 2);
    std::size_t n_model_feat = static_cast<std::size_t>(r.to_int(feat[1]));
    if (feat.size() != n_model_feat + 2)
        throw DataError("unreadable model: feature name count mismatch");
    b.model.feature_names.assign(feat.begin() + 2, feat.end());
    std::size_t n_selected = 0;
    for (std::uint8_t bit : b.selected) n_selected += bit;
    if (n_selected != n_model_feat)
        throw DataError("unreadable model: mask selects " + std::to_string(n_selected) +
                        " features but the model expects " + std::to_string(n_model_feat));

    auto bins_rec = r.expect("bins", 2);
    std::size_t n_bins = static_cast<std::size_t>(r.to_int(bins_rec[1]));
    if (n_bins != n_model_feat)
        throw DataError("unreadable model: bin mapper width does not match features");
    b.model.bin_mapper.edges.resize(n_bins);
    for (std::size_t f = 0; f < n_bins; ++f) {
        auto e = r.expect("edges", 2);
        std::size_t k = static_cast<std::size_t>(r.to_int(e[1]));
        if (e.size() != k + 2) throw DataError("unreadable model: edge count mismatch");
        b.model.bin_mapper.edges[f].reserve(k);
        for (std::size_t i = 0; i < k; ++i)
            b.model.bin_mapper.edges[f].push_back(r.to_double(e[i + 2]));
    }

    auto trees_rec = r.expect("trees", 2);
    std::size_t n_trees = static_cast<std::size_t>(r.to_int(trees_rec[1]));
    b.model.trees.resize(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
        auto th = r.expect("tree", 3);
        b.model.trees[t].shrinkage = r.to_double(th[1]);
        std::size_t n_nodes = static_cast<std::size_t>(r.to_int(th[2]));
        if (n_nodes == 0) throw DataError("unreadable model: empty tree");
        auto& nodes = b.model.trees[t].tree.nodes;
        nodes.resize(n_nodes);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            auto nd = r.expect("node", 7);
            TreeNode& node = nodes[i];
            node.feature = static_cast<int>(r.to_int(nd[1]));
            node.threshold = static_cast<int>(r.to_int(nd[2]));
            node.left = static_cast<int>(r.to_int(nd[3]));
            node.right = static_cast<int>(r.to_int(nd[4]));
            node.weight = r.to_double(nd[5]);
            node.gain = r.to_double(nd[6]);
            if (node.feature >= static_cast<int>(n_model_feat))
                throw DataError("unreadable model: node feature out of range");
            if (!node.is_leaf() &&
                (node.left < 0 || node.right < 0 || node.left >= static_cast<int>(n_nodes) ||
                 node.right >= static_cast<int>(n_nodes)))
                throw DataError("unreadable model: node child out of range");
        }
    }

    auto imp = r.expect("imp", 2);
    std::size_t n_imp = static_cast<std::size_t>(r.to_int(imp[1]));
    if (imp.size() != n_imp + 2 || n_imp != n_model_feat)
        throw DataError("unreadable model: importance count mismatch");
    b.model.importances.reserve(n_imp);
    for (std::size_t i = 0; i < n_imp; ++i) b.model.importances.push_back(r.to_double(imp[i + 2]));

    r.expect("end", 1);
    return b;
}

inline ModelBundle load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("unreadable model: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_string(ss.str(), path);
}

}  // namespace driftboost
