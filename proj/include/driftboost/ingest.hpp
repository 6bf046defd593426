#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "driftboost/util.hpp"

namespace driftboost {

enum class Role { CAT, NUM, MVC, TIME };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::CAT: return "CAT";
        case Role::NUM: return "NUM";
        case Role::MVC: return "MVC";
        case Role::TIME: return "TIME";
    }
    return "?";
}

inline std::optional<Role> parse_role(std::string_view s) {
    if (s == "CAT") return Role::CAT;
    if (s == "NUM") return Role::NUM;
    if (s == "MVC") return Role::MVC;
    if (s == "TIME") return Role::TIME;
    return std::nullopt;
}

struct Column {
    std::string name;
    Role role;
};

struct FeatureSchema {
    std::vector<Column> columns;
    std::string label;
    std::string positive_label;

    void validate() const {
        if (columns.empty()) throw DataError("schema has no feature columns");
        std::vector<std::string> names;
        names.reserve(columns.size());
        for (const auto& c : columns) names.push_back(c.name);
        std::sort(names.begin(), names.end());
        if (std::adjacent_find(names.begin(), names.end()) != names.end())
            throw DataError("duplicate column name in schema");
        for (const auto& c : columns)
            if (c.name == label)
                throw DataError("label column '" + label + "' also listed as feature");
        if (label.empty()) throw DataError("schema has no label column");
    }
};

// Missing cells are stored as empty strings; the TSV format uses the empty
// cell for missing, so raw text survives a load/write round trip unchanged.
inline constexpr const char* kMissingToken = "__MISSING__";

struct Batch {
    int index = 0;  // 1-based position in the stream
    std::vector<std::vector<std::string>> rows;  // cells in schema column order
    std::optional<std::vector<int>> labels;      // {0,1}, aligned with rows

    std::size_t row_count() const { return rows.size(); }

    void validate(const FeatureSchema& schema) const {
        if (labels && labels->size() != rows.size())
            throw DataError("labels length does not match row count");
        for (const auto& r : rows)
            if (r.size() != schema.columns.size())
                throw DataError("row arity does not match schema");
    }
};

struct DatasetManifest {
    FeatureSchema schema;
    std::vector<std::string> batch_paths;
    double budget_seconds = 0;

    void validate() const {
        schema.validate();
        if (batch_paths.empty()) throw DataError("manifest lists no batches");
        if (!(budget_seconds > 0)) throw DataError("budget_seconds must be > 0");
    }
};

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    DatasetManifest m;
    bool have_budget = false;
    std::string line;
    int lineno = 0;
    const auto base_dir = std::filesystem::path(path).parent_path();
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("malformed manifest line " + std::to_string(lineno) + ": " + line);
        std::string_view key(line.data(), eq);
        std::string_view val(line.data() + eq + 1, line.size() - eq - 1);
        if (key == "budget_seconds") {
            if (!try_parse_double(val, m.budget_seconds))
                throw DataError("bad budget_seconds: " + std::string(val));
            have_budget = true;
        } else if (key == "label") {
            m.schema.label = std::string(val);
        } else if (key == "positive_label") {
            m.schema.positive_label = std::string(val);
        } else if (key == "column") {
            auto colon = val.rfind(':');
            if (colon == std::string_view::npos)
                throw DataError("malformed column line " + std::to_string(lineno));
            auto role = parse_role(val.substr(colon + 1));
            if (!role)
                throw DataError("unknown role '" + std::string(val.substr(colon + 1)) +
                                "' for column '" + std::string(val.substr(0, colon)) + "'");
            m.schema.columns.push_back({std::string(val.substr(0, colon)), *role});
        } else if (key == "batch") {
            std::filesystem::path p(std::string{val});
            if (p.is_relative()) p = base_dir / p;
            m.batch_paths.push_back(p.string());
        } else {
            throw DataError("unknown manifest key '" + std::string(key) + "'");
        }
    }
    if (!have_budget) throw DataError("manifest missing budget_seconds");
    m.validate();
    return m;
}

inline void save_manifest(const DatasetManifest& m, const std::string& path,
                          const std::vector<std::string>& relative_batch_paths) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << "budget_seconds=" << format_double(m.budget_seconds) << "\n";
    out << "label=" << m.schema.label << "\n";
    out << "positive_label=" << m.schema.positive_label << "\n";
    for (const auto& c : m.schema.columns)
        out << "column=" << c.name << ":" << role_name(c.role) << "\n";
    for (const auto& p : relative_batch_paths) out << "batch=" << p << "\n";
    if (!out) throw DataError("write failed: " + path);
}

inline Batch load_batch(const std::string& path, const FeatureSchema& schema, int index) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open batch file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty batch file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto header = split_view(line, '\t');
    // Map each schema column to its position in the file; the label column is
    // optional, anything else unknown is a schema mismatch.
    std::vector<int> col_pos(schema.columns.size(), -1);
    int label_pos = -1;
    for (std::size_t h = 0; h < header.size(); ++h) {
        bool known = false;
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            if (header[h] == schema.columns[c].name) {
                if (col_pos[c] != -1)
                    throw DataError(path + ": duplicate column '" + std::string(header[h]) + "'");
                col_pos[c] = static_cast<int>(h);
                known = true;
                break;
            }
        }
        if (!known) {
            if (header[h] == schema.label) {
                if (label_pos != -1) throw DataError(path + ": duplicate label column");
                label_pos = static_cast<int>(h);
            } else {
                throw DataError(path + ": column '" + std::string(header[h]) +
                                "' not in schema");
            }
        }
    }
    for (std::size_t c = 0; c < schema.columns.size(); ++c)
        if (col_pos[c] == -1)
            throw DataError(path + ": missing column '" + schema.columns[c].name + "'");

    Batch batch;
    batch.index = index;
    if (label_pos != -1) batch.labels = std::vector<int>{};

    std::size_t rowno = 1;
    while (std::getline(in, line)) {
        ++rowno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto cells = split_view(line, '\t');
        if (cells.size() != header.size())
            throw DataError(path + ": row " + std::to_string(rowno) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()));
        std::vector<std::string> row(schema.columns.size());
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            std::string_view cell = cells[static_cast<std::size_t>(col_pos[c])];
            if (!cell.empty()) {
                if (schema.columns[c].role == Role::NUM) {
                    double v;
                    if (!try_parse_double(cell, v))
                        throw DataError(path + ": row " + std::to_string(rowno) +
                                        ", column '" + schema.columns[c].name +
                                        "': non-numeric value '" + std::string(cell) + "'");
                } else if (schema.columns[c].role == Role::TIME) {
                    std::int64_t v;
                    if (!try_parse_int(cell, v))
                        throw DataError(path + ": row " + std::to_string(rowno) +
                                        ", column '" + schema.columns[c].name +
                                        "': non-integer time '" + std::string(cell) + "'");
                }
            }
            row[c] = std::string(cell);
        }
        batch.rows.push_back(std::move(row));
        if (label_pos != -1)
            batch.labels->push_back(
                cells[static_cast<std::size_t>(label_pos)] == schema.positive_label ? 1 : 0);
    }
    return batch;
}

// Writes rows in schema column order, label last when present. Cells are raw
// text, so load_batch(write_batch(b)) reproduces b byte-exactly.
inline void write_batch(const Batch& batch, const FeatureSchema& schema,
                        const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write batch file: " + path);
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        if (c) out << '\t';
        out << schema.columns[c].name;
    }
    if (batch.labels) out << '\t' << schema.label;
    out << '\n';
    const std::string negative = schema.positive_label == "0" ? "1" : "0";
    for (std::size_t r = 0; r < batch.rows.size(); ++r) {
        for (std::size_t c = 0; c < batch.rows[r].size(); ++c) {
            if (c) out << '\t';
            out << batch.rows[r][c];
        }
        if (batch.labels)
            out << '\t' << ((*batch.labels)[r] ? schema.positive_label : negative);
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

struct WindowStats {
    std::map<std::string, double> num_median;  // per NUM column
    std::optional<std::int64_t> time_min;
};

inline double median_of(std::vector<double>& v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

inline WindowStats compute_window_stats(const std::vector<Batch>& window,
                                        const FeatureSchema& schema) {
    WindowStats stats;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        if (schema.columns[c].role == Role::NUM) {
            std::vector<double> vals;
            for (const auto& b : window)
                for (const auto& row : b.rows)
                    if (!row[c].empty()) {
                        double v;
                        if (!try_parse_double(row[c], v)) continue;
                        vals.push_back(v);
                    }
            stats.num_median[schema.columns[c].name] = median_of(vals);
        } else if (schema.columns[c].role == Role::TIME) {
            for (const auto& b : window)
                for (const auto& row : b.rows)
                    if (!row[c].empty()) {
                        std::int64_t v;
                        if (!try_parse_int(row[c], v)) continue;
                        if (!stats.time_min || v < *stats.time_min) stats.time_min = v;
                    }
        }
    }
    return stats;
}

inline Batch fill_missing(const Batch& batch, const FeatureSchema& schema,
                          const WindowStats& stats) {
    Batch out = batch;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        const auto& col = schema.columns[c];
        std::string fill;
        switch (col.role) {
            case Role::NUM: {
                auto it = stats.num_median.find(col.name);
                fill = format_double(it == stats.num_median.end() ? 0.0 : it->second);
                break;
            }
            case Role::CAT:
            case Role::MVC:
                fill = kMissingToken;
                break;
            case Role::TIME:
                fill = format_int(stats.time_min.value_or(0));
                break;
        }
        for (auto& row : out.rows)
            if (row[c].empty()) row[c] = fill;
    }
    return out;
}

// Proportional stratified row cap across the window. Quotas are per-batch
// ceilings; the excess is trimmed one row at a time starting from the oldest
// batch, so the newest batch is trimmed last. Row order within a batch is kept.
inline std::vector<Batch> subsample_rows(const std::vector<Batch>& batches,
                                         std::size_t cap, std::uint64_t seed) {
    if (cap == 0) throw DataError("row cap must be > 0");
    std::size_t total = 0;
    for (const auto& b : batches) total += b.row_count();
    if (total <= cap) return batches;

    std::vector<std::size_t> quota(batches.size());
    std::size_t quota_sum = 0;
    for (std::size_t i = 0; i < batches.size(); ++i) {
        quota[i] = static_cast<std::size_t>(
            std::ceil(static_cast<double>(cap) * static_cast<double>(batches[i].row_count()) /
                      static_cast<double>(total)));
        quota[i] = std::min(quota[i], batches[i].row_count());
        quota_sum += quota[i];
    }
    std::size_t excess = quota_sum > cap ? quota_sum - cap : 0;
    for (std::size_t i = 0; i < batches.size() && excess > 0; ++i) {
        if (quota[i] > 0) {
            --quota[i];
            --excess;
        }
    }

    std::vector<Batch> out;
    out.reserve(batches.size());
    for (std::size_t i = 0; i < batches.size(); ++i) {
        const Batch& b = batches[i];
        std::size_t keep = quota[i];
        Batch sampled;
        sampled.index = b.index;
        if (b.labels) sampled.labels = std::vector<int>{};
        if (keep >= b.row_count()) {
            sampled = b;
        } else {
            std::mt19937_64 rng(mix_seed(seed, "subsample", static_cast<std::uint64_t>(b.index)));
            std::vector<std::size_t> idx(b.row_count());
            for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j;
            // Fisher-Yates prefix; avoids std::shuffle so output is stable
            // across standard libraries.
            for (std::size_t j = 0; j < keep; ++j) {
                std::size_t k = j + static_cast<std::size_t>(rng() % (idx.size() - j));
                std::swap(idx[j], idx[k]);
            }
            idx.resize(keep);
            std::sort(idx.begin(), idx.end());
            for (std::size_t j : idx) {
                sampled.rows.push_back(b.rows[j]);
                if (b.labels) sampled.labels->push_back((*b.labels)[j]);
            }
        }
        out.push_back(std::move(sampled));
    }
    return out;
}

}  // namespace driftboost
