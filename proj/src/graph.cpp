#include "fairgkd/graph.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace fairgkd {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<std::string> split_fields(const std::string& line, bool comma) {
    std::vector<std::string> out;
    if (comma) {
        std::string field;
        std::stringstream ss(line);
        while (std::getline(ss, field, ',')) {
            // trim
            size_t b = field.find_first_not_of(" \t\r");
            size_t e = field.find_last_not_of(" \t\r");
            out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
        }
        if (!line.empty() && line.back() == ',') out.push_back("");
    } else {
        std::stringstream ss(line);
        std::string field;
        while (ss >> field) out.push_back(field);
    }
    return out;
}

double parse_number(const std::string& s, const std::string& file, size_t line_no) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw DataError(file + ":" + std::to_string(line_no) + ": not a number: '" + s + "'");
    return v;
}

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

} // namespace

// -------------------------------- Graph --------------------------------------

const SensitiveAttr& Graph::sensitive_by_name(const std::string& name) const {
    for (const auto& s : sensitive)
        if (s.name == name) return s;
    throw DataError("unknown sensitive attribute '" + name + "'");
}

bool Graph::has_sensitive(const std::string& name) const {
    for (const auto& s : sensitive)
        if (s.name == name) return true;
    return false;
}

int Graph::attribute_index(const std::string& name) const {
    for (size_t j = 0; j < attribute_names.size(); ++j)
        if (attribute_names[j] == name) return static_cast<int>(j);
    return -1;
}

void Graph::validate() const {
    if (!adjacency) throw DataError("graph: missing adjacency");
    if (adjacency->rows != num_nodes || adjacency->cols != num_nodes)
        throw DataError("graph: adjacency shape mismatch");
    if (!adjacency->is_symmetric()) throw DataError("graph: adjacency is not symmetric");
    for (int i = 0; i < num_nodes; ++i)
        for (int k = adjacency->row_ptr[i]; k < adjacency->row_ptr[i + 1]; ++k)
            if (adjacency->col_idx[k] == i)
                throw DataError("graph: self-loop stored at node " + std::to_string(i));
    if (attributes.rows() != num_nodes) throw DataError("graph: attribute row count mismatch");
    if (static_cast<int>(attribute_names.size()) != attributes.cols())
        throw DataError("graph: attribute name count mismatch");
    if (static_cast<int>(labels.size()) != num_nodes) throw DataError("graph: label length mismatch");
    for (int8_t y : labels)
        if (y != 0 && y != 1 && y != kUnknownLabel) throw DataError("graph: non-binary label");
    for (const auto& s : sensitive) {
        if (static_cast<int>(s.values.size()) != num_nodes)
            throw DataError("graph: sensitive vector length mismatch for '" + s.name + "'");
        for (int8_t v : s.values)
            if (v != 0 && v != 1) throw DataError("graph: non-binary sensitive value in '" + s.name + "'");
    }
    std::vector<char> seen(static_cast<size_t>(num_nodes), 0);
    size_t total = 0;
    for (const auto* split : {&splits.train, &splits.val, &splits.test}) {
        total += split->size();
        for (int idx : *split) {
            if (idx < 0 || idx >= num_nodes) throw DataError("graph: split index out of range");
            if (seen[static_cast<size_t>(idx)]++) throw DataError("graph: splits are not disjoint");
        }
    }
    if (total > static_cast<size_t>(num_nodes)) throw DataError("graph: splits exceed node count");
}

// -------------------------------- Views --------------------------------------

std::string to_string(ViewKind k) {
    switch (k) {
        case ViewKind::Full: return "full";
        case ViewKind::NodesOnly: return "nodes-only";
        case ViewKind::TopologyOnly: return "topology-only";
    }
    return "?";
}

ViewKind view_kind_from_string(const std::string& s) {
    if (s == "full") return ViewKind::Full;
    if (s == "nodes-only") return ViewKind::NodesOnly;
    if (s == "topology-only") return ViewKind::TopologyOnly;
    throw UsageError("unknown view kind '" + s + "' (expected full, nodes-only or topology-only)");
}

GraphView make_view(const Graph& g, ViewKind kind, const std::string& sensitive_column) {
    if (!sensitive_column.empty()) {
        bool found = false;
        for (const auto& n : g.attribute_names) found = found || n == sensitive_column;
        if (!found) throw DataError("make_view: unknown column '" + sensitive_column + "'");
    }
    return GraphView{kind, &g, sensitive_column};
}

namespace {

Tensor strip_column(const Tensor& attrs, const std::vector<std::string>& names,
                    const std::string& column) {
    if (column.empty()) return attrs.detached_copy();
    int drop = -1;
    for (size_t j = 0; j < names.size(); ++j)
        if (names[j] == column) drop = static_cast<int>(j);
    if (drop < 0) throw DataError("view: unknown column '" + column + "'");
    Tensor out(attrs.rows(), attrs.cols() - 1);
    for (int i = 0; i < attrs.rows(); ++i) {
        int jj = 0;
        for (int j = 0; j < attrs.cols(); ++j)
            if (j != drop) out(i, jj++) = attrs(i, j);
    }
    return out;
}

} // namespace

ViewData materialize(const GraphView& view) {
    if (view.source == nullptr) throw ContractError("materialize: view has no source graph");
    const Graph& g = *view.source;
    ViewData data;
    data.kind = view.kind;
    switch (view.kind) {
        case ViewKind::NodesOnly: {
            auto eye = std::make_shared<CsrMatrix>(CsrMatrix::identity(g.num_nodes));
            data.adj_raw = eye;
            data.adj_norm = eye; // normalizing the identity is the identity
            data.attrs = strip_column(g.attributes, g.attribute_names, view.sensitive_column);
            break;
        }
        case ViewKind::TopologyOnly: {
            data.adj_raw = g.adjacency;
            data.adj_norm = std::make_shared<CsrMatrix>(normalize_adjacency(g));
            data.attrs = Tensor::ones(g.num_nodes, g.attr_dim());
            break;
        }
        case ViewKind::Full: {
            data.adj_raw = g.adjacency;
            data.adj_norm = std::make_shared<CsrMatrix>(normalize_adjacency(g));
            data.attrs = strip_column(g.attributes, g.attribute_names, view.sensitive_column);
            break;
        }
    }
    return data;
}

CsrMatrix normalize_adjacency(const CsrMatrix& adjacency) {
    if (adjacency.rows != adjacency.cols) throw ContractError("normalize_adjacency: matrix not square");
    const int n = adjacency.rows;
    // degree with self-loop
    std::vector<double> inv_sqrt(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double deg = 1.0;
        for (int k = adjacency.row_ptr[i]; k < adjacency.row_ptr[i + 1]; ++k) {
            if (adjacency.col_idx[k] == i) continue; // formula adds the self-loop itself
            deg += adjacency.values[k];
        }
        inv_sqrt[static_cast<size_t>(i)] = 1.0 / std::sqrt(deg);
    }
    CsrMatrix out;
    out.rows = out.cols = n;
    out.row_ptr.assign(static_cast<size_t>(n) + 1, 0);
    out.col_idx.reserve(adjacency.col_idx.size() + static_cast<size_t>(n));
    out.values.reserve(adjacency.col_idx.size() + static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        bool diag_written = false;
        for (int k = adjacency.row_ptr[i]; k < adjacency.row_ptr[i + 1]; ++k) {
            const int j = adjacency.col_idx[k];
            if (j == i) continue;
            if (!diag_written && j > i) {
                out.col_idx.push_back(i);
                out.values.push_back(inv_sqrt[i] * inv_sqrt[i]);
                diag_written = true;
            }
            out.col_idx.push_back(j);
            out.values.push_back(adjacency.values[k] * inv_sqrt[i] * inv_sqrt[j]);
        }
        if (!diag_written) {
            out.col_idx.push_back(i);
            out.values.push_back(inv_sqrt[i] * inv_sqrt[i]);
        }
        out.row_ptr[static_cast<size_t>(i) + 1] = static_cast<int>(out.col_idx.size());
    }
    return out;
}

CsrMatrix normalize_adjacency(const Graph& g) {
    return normalize_adjacency(*g.adjacency);
}

// ------------------------------ DatasetMeta ----------------------------------

void DatasetMeta::validate() const {
    if (label_column.empty()) throw UsageError("dataset meta: label_column is required");
    if (train_ratio < 0 || val_ratio < 0 || test_ratio < 0)
        throw UsageError("dataset meta: negative split ratio");
    if (train_ratio + val_ratio + test_ratio > 1.0 + 1e-12)
        throw UsageError("dataset meta: split ratios exceed 1");
}

DatasetMeta DatasetMeta::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open meta file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("meta file " + path + ": " + e.what());
    }
    static const std::set<std::string> known = {
        "name",         "label_column", "label_unknown_value", "id_column",
        "sensitive_columns", "drop_columns", "train_ratio",    "val_ratio",
        "test_ratio",   "split_seed",   "standardize"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.contains(it.key()))
            throw UsageError("meta file " + path + ": unknown key '" + it.key() + "'");
    DatasetMeta m;
    m.name = j.value("name", m.name);
    m.label_column = j.value("label_column", m.label_column);
    m.label_unknown_value = j.value("label_unknown_value", m.label_unknown_value);
    m.id_column = j.value("id_column", m.id_column);
    if (j.contains("sensitive_columns"))
        for (const auto& s : j.at("sensitive_columns")) {
            SensitiveSpec spec;
            if (s.is_string()) {
                spec.column = s.get<std::string>();
            } else {
                for (auto it = s.begin(); it != s.end(); ++it)
                    if (it.key() != "column" && it.key() != "threshold")
                        throw UsageError("meta file: unknown sensitive key '" + it.key() + "'");
                spec.column = s.at("column").get<std::string>();
                if (s.contains("threshold")) spec.threshold = s.at("threshold").get<double>();
            }
            m.sensitive_columns.push_back(std::move(spec));
        }
    if (j.contains("drop_columns"))
        for (const auto& d : j.at("drop_columns")) m.drop_columns.push_back(d.get<std::string>());
    m.train_ratio = j.value("train_ratio", m.train_ratio);
    m.val_ratio = j.value("val_ratio", m.val_ratio);
    m.test_ratio = j.value("test_ratio", m.test_ratio);
    m.split_seed = j.value("split_seed", m.split_seed);
    m.standardize = j.value("standardize", m.standardize);
    m.validate();
    return m;
}

std::string DatasetMeta::to_json_string() const {
    ordered_json j;
    j["name"] = name;
    j["label_column"] = label_column;
    j["label_unknown_value"] = label_unknown_value;
    if (!id_column.empty()) j["id_column"] = id_column;
    j["sensitive_columns"] = ordered_json::array();
    for (const auto& s : sensitive_columns) {
        ordered_json spec;
        spec["column"] = s.column;
        if (s.threshold) spec["threshold"] = *s.threshold;
        j["sensitive_columns"].push_back(spec);
    }
    j["drop_columns"] = drop_columns;
    j["train_ratio"] = train_ratio;
    j["val_ratio"] = val_ratio;
    j["test_ratio"] = test_ratio;
    j["split_seed"] = split_seed;
    j["standardize"] = standardize;
    return j.dump(2) + "\n";
}

// ------------------------------ load_dataset ---------------------------------

SplitSets draw_splits(const std::vector<int8_t>& labels, double train_ratio, double val_ratio,
                      double test_ratio, uint64_t seed) {
    std::vector<int> labeled;
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != kUnknownLabel) labeled.push_back(static_cast<int>(i));
    Rng rng(seed);
    for (size_t i = labeled.size(); i > 1; --i) {
        const size_t j = rng.below(i);
        std::swap(labeled[i - 1], labeled[j]);
    }
    const size_t total = labeled.size();
    const size_t n_train = static_cast<size_t>(std::floor(total * train_ratio));
    const size_t n_val = static_cast<size_t>(std::floor(total * val_ratio));
    size_t n_test;
    if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) < 1e-9)
        n_test = total - n_train - n_val;
    else
        n_test = std::min(total - n_train - n_val,
                          static_cast<size_t>(std::floor(total * test_ratio)));
    SplitSets s;
    s.train.assign(labeled.begin(), labeled.begin() + n_train);
    s.val.assign(labeled.begin() + n_train, labeled.begin() + n_train + n_val);
    s.test.assign(labeled.begin() + n_train + n_val, labeled.begin() + n_train + n_val + n_test);
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

namespace {

void standardize_columns(Tensor& attrs) {
    const int n = attrs.rows(), d = attrs.cols();
    if (n == 0) return;
    for (int j = 0; j < d; ++j) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += attrs(i, j);
        mean /= n;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            const double c = attrs(i, j) - mean;
            var += c * c;
        }
        const double sd = std::sqrt(var / n);
        if (sd < 1e-12) {
            for (int i = 0; i < n; ++i) attrs(i, j) = 0.0;
        } else {
            for (int i = 0; i < n; ++i) attrs(i, j) = (attrs(i, j) - mean) / sd;
        }
    }
}

} // namespace

Graph load_dataset(const std::string& edge_file, const std::string& attribute_file,
                   const DatasetMeta& meta) {
    meta.validate();

    // ---- attribute file ----
    std::ifstream attr_in(attribute_file);
    if (!attr_in) throw DataError("cannot open attribute file " + attribute_file);
    std::string line;
    size_t line_no = 0;
    if (!std::getline(attr_in, line)) throw DataError(attribute_file + ": empty file");
    ++line_no;
    const bool comma = line.find(',') != std::string::npos;
    const std::vector<std::string> header = split_fields(line, comma);
    if (header.empty()) throw DataError(attribute_file + ": empty header");

    auto column_index = [&](const std::string& name) -> int {
        for (size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<int>(j);
        return -1;
    };
    const int label_col = column_index(meta.label_column);
    if (label_col < 0)
        throw DataError(attribute_file + ": missing label column '" + meta.label_column + "'");
    const int id_col = meta.id_column.empty() ? -1 : column_index(meta.id_column);
    if (!meta.id_column.empty() && id_col < 0)
        throw DataError(attribute_file + ": missing id column '" + meta.id_column + "'");
    for (const auto& s : meta.sensitive_columns)
        if (column_index(s.column) < 0)
            throw DataError(attribute_file + ": missing sensitive column '" + s.column + "'");
    std::vector<char> dropped(header.size(), 0);
    for (const auto& d : meta.drop_columns) {
        const int c = column_index(d);
        if (c < 0) throw DataError(attribute_file + ": missing drop column '" + d + "'");
        dropped[static_cast<size_t>(c)] = 1;
    }

    std::vector<std::vector<double>> rows;
    std::vector<long> original_ids;
    std::unordered_map<long, int> id_to_row;
    while (std::getline(attr_in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split_fields(line, comma);
        if (fields.size() != header.size())
            throw DataError(attribute_file + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        std::vector<double> row(fields.size());
        for (size_t j = 0; j < fields.size(); ++j)
            row[j] = parse_number(fields[j], attribute_file, line_no);
        const long oid = id_col >= 0 ? static_cast<long>(row[static_cast<size_t>(id_col)])
                                     : static_cast<long>(rows.size());
        if (!id_to_row.emplace(oid, static_cast<int>(rows.size())).second)
            throw DataError(attribute_file + ":" + std::to_string(line_no) +
                            ": duplicate node row for id " + std::to_string(oid));
        original_ids.push_back(oid);
        rows.push_back(std::move(row));
    }
    const int n = static_cast<int>(rows.size());
    if (n == 0) throw DataError(attribute_file + ": no node rows");

    // labels
    std::vector<int8_t> labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double v = rows[static_cast<size_t>(i)][static_cast<size_t>(label_col)];
        if (v == meta.label_unknown_value) {
            labels[static_cast<size_t>(i)] = kUnknownLabel;
        } else if (is_binary(v)) {
            labels[static_cast<size_t>(i)] = static_cast<int8_t>(v);
        } else {
            throw DataError(attribute_file + ": non-binary label value " + std::to_string(v) +
                            " at node row " + std::to_string(i + 1));
        }
    }

    // feature columns: everything except label, id and dropped columns
    std::vector<int> feature_cols;
    std::vector<std::string> feature_names;
    for (size_t j = 0; j < header.size(); ++j) {
        if (static_cast<int>(j) == label_col || static_cast<int>(j) == id_col || dropped[j]) continue;
        feature_cols.push_back(static_cast<int>(j));
        feature_names.push_back(header[j]);
    }
    Tensor attrs(n, static_cast<int>(feature_cols.size()));
    for (int i = 0; i < n; ++i)
        for (size_t j = 0; j < feature_cols.size(); ++j)
            attrs(i, static_cast<int>(j)) =
                rows[static_cast<size_t>(i)][static_cast<size_t>(feature_cols[j])];

    // sensitive attributes (raw binary values, kept apart from standardization)
    std::vector<SensitiveAttr> sensitive;
    for (const auto& spec : meta.sensitive_columns) {
        SensitiveAttr sa;
        sa.name = spec.column;
        sa.values.resize(static_cast<size_t>(n));
        const int src = column_index(spec.column);
        for (int i = 0; i < n; ++i) {
            double v = rows[static_cast<size_t>(i)][static_cast<size_t>(src)];
            if (spec.threshold) v = v >= *spec.threshold ? 1.0 : 0.0;
            if (!is_binary(v))
                throw DataError(attribute_file + ": non-binary sensitive value " + std::to_string(v) +
                                " in column '" + spec.column + "' at node row " + std::to_string(i + 1));
            sa.values[static_cast<size_t>(i)] = static_cast<int8_t>(v);
        }
        for (size_t j = 0; j < feature_names.size(); ++j)
            if (feature_names[j] == spec.column) sa.column = static_cast<int>(j);
        sensitive.push_back(std::move(sa));
    }

    if (meta.standardize) standardize_columns(attrs);

    // ---- edge file ----
    std::ifstream edge_in(edge_file);
    if (!edge_in) throw DataError("cannot open edge file " + edge_file);
    std::set<std::pair<int, int>> edges;
    line_no = 0;
    while (std::getline(edge_in, line)) {
        ++line_no;
        size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        std::string cleaned = line;
        std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
        std::stringstream ss(cleaned);
        long ua = 0, ub = 0;
        if (!(ss >> ua >> ub))
            throw DataError(edge_file + ":" + std::to_string(line_no) + ": malformed edge line '" +
                            line + "'");
        std::string extra;
        if (ss >> extra)
            throw DataError(edge_file + ":" + std::to_string(line_no) + ": trailing data '" + extra +
                            "'");
        const auto ia = id_to_row.find(ua);
        const auto ib = id_to_row.find(ub);
        if (ia == id_to_row.end())
            throw DataError(edge_file + ":" + std::to_string(line_no) + ": dangling node id " +
                            std::to_string(ua));
        if (ib == id_to_row.end())
            throw DataError(edge_file + ":" + std::to_string(line_no) + ": dangling node id " +
                            std::to_string(ub));
        int u = ia->second, v = ib->second;
        if (u == v) continue; // self-loops are dropped; normalization re-adds them
        if (u > v) std::swap(u, v);
        edges.emplace(u, v);
    }

    std::vector<std::tuple<int, int, double>> triples;
    triples.reserve(edges.size() * 2);
    for (const auto& [u, v] : edges) {
        triples.emplace_back(u, v, 1.0);
        triples.emplace_back(v, u, 1.0);
    }

    Graph g;
    g.num_nodes = n;
    g.num_edges = static_cast<long>(edges.size());
    g.adjacency = std::make_shared<CsrMatrix>(CsrMatrix::from_triples(n, n, std::move(triples)));
    g.attributes = std::move(attrs);
    g.attribute_names = std::move(feature_names);
    g.sensitive = std::move(sensitive);
    g.labels = std::move(labels);
    g.original_ids = std::move(original_ids);
    g.splits = draw_splits(g.labels, meta.train_ratio, meta.val_ratio, meta.test_ratio,
                           meta.split_seed);
    g.validate();
    return g;
}

// --------------------------- synthetic generator -----------------------------

SynthParams SynthParams::biased(int num_nodes, int attr_dim, double homophily, double correlation,
                                double mean_degree) {
    SynthParams p;
    p.num_nodes = num_nodes;
    p.attr_dim = attr_dim;
    p.homophily = homophily;
    p.correlation = correlation;
    const double pair_prob = mean_degree / std::max(1, num_nodes - 1);
    p.intra_edge_prob = 2.0 * homophily * pair_prob;
    p.inter_edge_prob = 2.0 * (1.0 - homophily) * pair_prob;
    return p;
}

void SynthParams::validate() const {
    if (num_nodes < 4) throw DataError("synthetic: need at least 4 nodes");
    if (attr_dim < 3) throw DataError("synthetic: need at least 3 attribute columns");
    if (homophily < 0.5 || homophily >= 1.0)
        throw DataError("synthetic: homophily must lie in [0.5, 1)");
    if (correlation < 0.0 || correlation > 1.0)
        throw DataError("synthetic: correlation must lie in [0, 1]");
    if (leak_columns < 0 || leak_columns > attr_dim - 2)
        throw DataError("synthetic: leak_columns must leave at least one signal column");
    if (intra_edge_prob < 0.0 || intra_edge_prob > 1.0 || inter_edge_prob < 0.0 ||
        inter_edge_prob > 1.0)
        throw DataError("synthetic: invalid edge probability");
    if (neighbor_mixing < 0.0 || neighbor_mixing > 1.0)
        throw DataError("synthetic: neighbor_mixing must lie in [0, 1]");
    if (train_ratio < 0 || val_ratio < 0 || test_ratio < 0 ||
        train_ratio + val_ratio + test_ratio > 1.0 + 1e-12)
        throw DataError("synthetic: invalid split ratios");
}

Graph generate_synthetic(const SynthParams& params, uint64_t seed) {
    params.validate();
    const int n = params.num_nodes;
    const int d = params.attr_dim;
    Rng rng(seed);

    // group assignment: first half 0, second half 1 (equal expected degrees)
    std::vector<int8_t> group(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) group[static_cast<size_t>(i)] = i < n / 2 ? 0 : 1;

    // edges
    std::vector<std::tuple<int, int, double>> triples;
    long edge_count = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double p = group[static_cast<size_t>(i)] == group[static_cast<size_t>(j)]
                                 ? params.intra_edge_prob
                                 : params.inter_edge_prob;
            if (rng.bernoulli(p)) {
                triples.emplace_back(i, j, 1.0);
                triples.emplace_back(j, i, 1.0);
                ++edge_count;
            }
        }
    }
    auto adjacency = std::make_shared<CsrMatrix>(CsrMatrix::from_triples(n, n, std::move(triples)));

    // attributes: column 0 is the sensitive attribute itself, the next
    // leak_columns leak it at the requested correlation, the rest are signal
    const int first_signal = 1 + params.leak_columns;
    const int signal_cols = d - first_signal;
    const double rho = params.correlation;
    const double noise = std::sqrt(1.0 - rho * rho);
    Tensor attrs(n, d);
    for (int i = 0; i < n; ++i) {
        const double gsign = group[static_cast<size_t>(i)] == 1 ? 1.0 : -1.0;
        attrs(i, 0) = static_cast<double>(group[static_cast<size_t>(i)]);
        for (int j = 1; j < first_signal; ++j) attrs(i, j) = rho * gsign + noise * rng.normal();
        for (int j = first_signal; j < d; ++j) attrs(i, j) = rng.normal();
    }

    // per-node label signal, then graph smoothing so topology carries utility
    std::vector<double> z(static_cast<size_t>(n), 0.0);
    const double inv_sqrt_cols = 1.0 / std::sqrt(static_cast<double>(signal_cols));
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = first_signal; j < d; ++j) acc += attrs(i, j);
        z[static_cast<size_t>(i)] = acc * inv_sqrt_cols;
    }
    std::vector<double> smoothed(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        int deg = 0;
        for (int k = adjacency->row_ptr[i]; k < adjacency->row_ptr[i + 1]; ++k) {
            acc += z[static_cast<size_t>(adjacency->col_idx[k])];
            ++deg;
        }
        const double neigh = deg > 0 ? acc / deg : z[static_cast<size_t>(i)];
        smoothed[static_cast<size_t>(i)] =
            (1.0 - params.neighbor_mixing) * z[static_cast<size_t>(i)] +
            params.neighbor_mixing * neigh;
    }

    std::vector<int8_t> labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double gsign = group[static_cast<size_t>(i)] == 1 ? 1.0 : -1.0;
        const double score = params.signal_strength * smoothed[static_cast<size_t>(i)] +
                             params.group_offset * gsign;
        const double p = 1.0 / (1.0 + std::exp(-score));
        labels[static_cast<size_t>(i)] = rng.bernoulli(p) ? 1 : 0;
    }

    Graph g;
    g.num_nodes = n;
    g.num_edges = edge_count;
    g.adjacency = std::move(adjacency);
    g.attributes = std::move(attrs);
    g.attribute_names.push_back("sens");
    for (int j = 1; j < d; ++j) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "x%02d", j);
        g.attribute_names.push_back(buf);
    }
    g.sensitive.push_back(SensitiveAttr{"sens", group, 0});
    g.labels = std::move(labels);
    g.original_ids.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) g.original_ids[static_cast<size_t>(i)] = i;
    g.splits = draw_splits(g.labels, params.train_ratio, params.val_ratio, params.test_ratio,
                           derive_seed(seed, "splits"));
    g.validate();
    return g;
}

DatasetMeta synthetic_meta(const SynthParams& params, uint64_t seed) {
    DatasetMeta m;
    m.name = "synthetic";
    m.label_column = "label";
    m.sensitive_columns.push_back({"sens", std::nullopt});
    m.train_ratio = params.train_ratio;
    m.val_ratio = params.val_ratio;
    m.test_ratio = params.test_ratio;
    m.split_seed = derive_seed(seed, "splits");
    m.standardize = false;
    return m;
}

void write_dataset(const Graph& g, const std::string& edge_file, const std::string& attribute_file,
                   const std::string& meta_file, const DatasetMeta& meta) {
    std::ofstream edges(edge_file);
    if (!edges) throw DataError("cannot write edge file " + edge_file);
    for (int i = 0; i < g.num_nodes; ++i)
        for (int k = g.adjacency->row_ptr[i]; k < g.adjacency->row_ptr[i + 1]; ++k)
            if (g.adjacency->col_idx[k] > i) edges << i << " " << g.adjacency->col_idx[k] << "\n";
    if (!edges) throw DataError("write failed for " + edge_file);

    std::ofstream attrs(attribute_file);
    if (!attrs) throw DataError("cannot write attribute file " + attribute_file);
    attrs << meta.label_column;
    for (const auto& name : g.attribute_names) attrs << "," << name;
    attrs << "\n";
    char buf[32];
    for (int i = 0; i < g.num_nodes; ++i) {
        attrs << static_cast<int>(g.labels[static_cast<size_t>(i)]);
        for (int j = 0; j < g.attr_dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", g.attributes(i, j));
            attrs << "," << buf;
        }
        attrs << "\n";
    }
    if (!attrs) throw DataError("write failed for " + attribute_file);

    std::ofstream mf(meta_file);
    if (!mf) throw DataError("cannot write meta file " + meta_file);
    mf << meta.to_json_string();
    if (!mf) throw DataError("write failed for " + meta_file);
}

} // namespace fairgkd
