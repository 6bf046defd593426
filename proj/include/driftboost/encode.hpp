#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "driftboost/ingest.hpp"
#include "driftboost/util.hpp"

namespace driftboost {

enum class FeatureKind { ORDINAL, FREQUENCY, NUMERIC, TIME_EPOCH, TIME_HOUR, TIME_WDAY, MVC_COUNT, MVC_MAXFREQ };

struct DerivedFeature {
    std::size_t source_column;  // index into schema.columns
    std::string name;
    FeatureKind kind;
};

// The layout is a pure function of the schema, so encoded width never varies
// with window content.
inline std::vector<DerivedFeature> output_layout_for(const FeatureSchema& schema) {
    std::vector<DerivedFeature> layout;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        const auto& col = schema.columns[c];
        switch (col.role) {
            case Role::CAT:
                layout.push_back({c, col.name + ":ord", FeatureKind::ORDINAL});
                layout.push_back({c, col.name + ":freq", FeatureKind::FREQUENCY});
                break;
            case Role::NUM:
                layout.push_back({c, col.name, FeatureKind::NUMERIC});
                break;
            case Role::TIME:
                layout.push_back({c, col.name + ":epoch", FeatureKind::TIME_EPOCH});
                layout.push_back({c, col.name + ":hour", FeatureKind::TIME_HOUR});
                layout.push_back({c, col.name + ":wday", FeatureKind::TIME_WDAY});
                break;
            case Role::MVC:
                layout.push_back({c, col.name + ":count", FeatureKind::MVC_COUNT});
                layout.push_back({c, col.name + ":maxfreq", FeatureKind::MVC_MAXFREQ});
                break;
        }
    }
    return layout;
}

struct EncoderState {
    // per CAT column name: token -> id (1-based, first-seen order; 0 = unseen)
    std::unordered_map<std::string, std::unordered_map<std::string, std::int64_t>> ordinal_maps;
    // per CAT column name: token -> count in fit window
    std::unordered_map<std::string, std::unordered_map<std::string, std::int64_t>> freq_tables;
    // per MVC column name: token -> occurrence count over the fit window
    std::unordered_map<std::string, std::unordered_map<std::string, std::int64_t>> mvc_freq;
    std::vector<DerivedFeature> output_layout;
};

struct FeatureMatrix {
    std::vector<double> values;  // row-major
    std::vector<std::string> feature_names;
    std::size_t row_count = 0;
    std::size_t feature_count = 0;

    double at(std::size_t r, std::size_t f) const { return values[r * feature_count + f]; }
};

namespace detail {

inline void for_each_mvc_token(std::string_view cell, auto&& fn) {
    std::size_t start = 0;
    while (start <= cell.size()) {
        std::size_t pos = cell.find(',', start);
        std::string_view tok = pos == std::string_view::npos ? cell.substr(start)
                                                             : cell.substr(start, pos - start);
        if (!tok.empty()) fn(tok);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
}

}  // namespace detail

inline EncoderState fit_encoders(const std::vector<Batch>& window, const FeatureSchema& schema) {
    std::size_t total_rows = 0;
    for (const auto& b : window) total_rows += b.row_count();
    if (window.empty() || total_rows == 0) throw DataError("cannot fit encoders on an empty window");

    EncoderState state;
    state.output_layout = output_layout_for(schema);
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        const auto& col = schema.columns[c];
        if (col.role == Role::CAT) {
            auto& ord = state.ordinal_maps[col.name];
            auto& freq = state.freq_tables[col.name];
            std::int64_t next_id = 1;
            for (const auto& b : window) {
                for (const auto& row : b.rows) {
                    const std::string& tok = row[c];
                    auto [it, inserted] = ord.try_emplace(tok, next_id);
                    if (inserted) ++next_id;
                    ++freq[tok];
                }
            }
        } else if (col.role == Role::MVC) {
            auto& freq = state.mvc_freq[col.name];
            for (const auto& b : window)
                for (const auto& row : b.rows)
                    detail::for_each_mvc_token(row[c],
                                               [&](std::string_view tok) { ++freq[std::string(tok)]; });
        }
    }
    return state;
}

inline int hour_of_day_utc(std::int64_t epoch) {
    std::int64_t sec = epoch - floor_div(epoch, 86400) * 86400;
    return static_cast<int>(sec / 3600);
}

// Monday=0 .. Sunday=6; 1970-01-01 was a Thursday.
inline int weekday_utc(std::int64_t epoch) {
    std::int64_t days = floor_div(epoch, 86400);
    std::int64_t w = (days + 3) % 7;
    if (w < 0) w += 7;
    return static_cast<int>(w);
}

inline FeatureMatrix transform_batch(const Batch& batch, const EncoderState& state,
                                     const FeatureSchema& schema) {
    const auto& layout = state.output_layout;
    if (layout.empty()) throw DataError("encoder state has no layout");
    for (const auto& df : layout)
        if (df.source_column >= schema.columns.size())
            throw DataError("encoder layout does not match schema");

    FeatureMatrix m;
    m.row_count = batch.row_count();
    m.feature_count = layout.size();
    m.feature_names.reserve(layout.size());
    for (const auto& df : layout) m.feature_names.push_back(df.name);
    m.values.assign(m.row_count * m.feature_count, 0.0);

    for (std::size_t r = 0; r < batch.rows.size(); ++r) {
        const auto& row = batch.rows[r];
        if (row.size() != schema.columns.size()) throw DataError("row arity does not match schema");
        double* out = m.values.data() + r * m.feature_count;
        for (std::size_t f = 0; f < layout.size(); ++f) {
            const auto& df = layout[f];
            const std::string& cell = row[df.source_column];
            const std::string& col_name = schema.columns[df.source_column].name;
            switch (df.kind) {
                case FeatureKind::ORDINAL: {
                    const auto& ord = state.ordinal_maps.at(col_name);
                    auto it = ord.find(cell);
                    out[f] = it == ord.end() ? 0.0 : static_cast<double>(it->second);
                    break;
                }
                case FeatureKind::FREQUENCY: {
                    const auto& freq = state.freq_tables.at(col_name);
                    auto it = freq.find(cell);
                    out[f] = it == freq.end() ? 0.0 : static_cast<double>(it->second);
                    break;
                }
                case FeatureKind::NUMERIC: {
                    double v;
                    if (!try_parse_double(cell, v))
                        throw DataError("non-numeric cell '" + cell + "' in column '" + col_name + "'");
                    out[f] = v;
                    break;
                }
                case FeatureKind::TIME_EPOCH:
                case FeatureKind::TIME_HOUR:
                case FeatureKind::TIME_WDAY: {
                    std::int64_t t;
                    if (!try_parse_int(cell, t))
                        throw DataError("non-integer time cell '" + cell + "' in column '" + col_name + "'");
                    if (df.kind == FeatureKind::TIME_EPOCH)
                        out[f] = static_cast<double>(t);
                    else if (df.kind == FeatureKind::TIME_HOUR)
                        out[f] = hour_of_day_utc(t);
                    else
                        out[f] = weekday_utc(t);
                    break;
                }
                case FeatureKind::MVC_COUNT: {
                    std::int64_t n = 0;
                    detail::for_each_mvc_token(cell, [&](std::string_view) { ++n; });
                    out[f] = static_cast<double>(n);
                    break;
                }
                case FeatureKind::MVC_MAXFREQ: {
                    const auto& freq = state.mvc_freq.at(col_name);
                    std::int64_t best = 0;
                    detail::for_each_mvc_token(cell, [&](std::string_view tok) {
                        auto it = freq.find(std::string(tok));
                        if (it != freq.end() && it->second > best) best = it->second;
                    });
                    out[f] = static_cast<double>(best);
                    break;
                }
            }
        }
    }
    return m;
}

inline FeatureMatrix select_columns(const FeatureMatrix& m, const std::vector<std::uint8_t>& mask) {
    if (mask.size() != m.feature_count) throw DataError("feature mask size mismatch");
    FeatureMatrix out;
    out.row_count = m.row_count;
    std::vector<std::size_t> keep;
    for (std::size_t f = 0; f < mask.size(); ++f)
        if (mask[f]) {
            keep.push_back(f);
            out.feature_names.push_back(m.feature_names[f]);
        }
    out.feature_count = keep.size();
    out.values.resize(out.row_count * out.feature_count);
    for (std::size_t r = 0; r < m.row_count; ++r)
        for (std::size_t j = 0; j < keep.size(); ++j)
            out.values[r * out.feature_count + j] = m.at(r, keep[j]);
    return out;
}

}  // namespace driftboost
