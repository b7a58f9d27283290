#pragma once

#include "fairgkd/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fairgkd {

constexpr int8_t kUnknownLabel = -1;

struct SplitSets {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};

/// A named binary per-node attribute used for group fairness evaluation.
/// `column` is the index of the matching feature column in Graph::attributes,
/// or -1 when the attribute is not part of the feature matrix.
struct SensitiveAttr {
    std::string name;
    std::vector<int8_t> values;
    int column = -1;
};

// ----------------------------------------------------------------------------
// Immutable attributed graph: symmetric zero-diagonal adjacency, dense node
// attributes, named binary sensitive attributes, binary labels with an
// explicit unknown marker, and disjoint train/val/test splits.
// ----------------------------------------------------------------------------
struct Graph {
    int num_nodes = 0;
    long num_edges = 0; // undirected edge count
    CsrPtr adjacency;
    Tensor attributes; // n x d
    std::vector<std::string> attribute_names;
    std::vector<SensitiveAttr> sensitive;
    std::vector<int8_t> labels;
    SplitSets splits;
    /// Original ids from the source files, index = re-indexed node id.
    std::vector<long> original_ids;

    int attr_dim() const { return attributes.cols(); }
    const SensitiveAttr& sensitive_by_name(const std::string& name) const;
    bool has_sensitive(const std::string& name) const;
    /// Index of a named feature column, or -1.
    int attribute_index(const std::string& name) const;
    /// Throws DataError if any structural invariant is violated.
    void validate() const;
};

enum class ViewKind { Full, NodesOnly, TopologyOnly };

std::string to_string(ViewKind k);
ViewKind view_kind_from_string(const std::string& s);

/// Descriptor of a partial-data view. NodesOnly strips the designated
/// sensitive column and replaces adjacency with the identity; TopologyOnly
/// keeps the adjacency and uses an all-one attribute matrix at the full
/// width; Full keeps the adjacency and strips the designated column. An
/// empty column name designates nothing (runs configured to keep the
/// sensitive attribute designate none).
struct GraphView {
    ViewKind kind = ViewKind::Full;
    const Graph* source = nullptr;
    std::string sensitive_column;
};

/// Materialized view: what models actually consume. adj_norm is the
/// symmetrically normalized adjacency with self-loops; adj_raw the stored one.
struct ViewData {
    ViewKind kind = ViewKind::Full;
    CsrPtr adj_raw;
    CsrPtr adj_norm;
    Tensor attrs;
};

GraphView make_view(const Graph& g, ViewKind kind, const std::string& sensitive_column);
ViewData materialize(const GraphView& view);

/// Symmetric normalization with self-loops. Isolated nodes map to a 1 on the
/// diagonal.
CsrMatrix normalize_adjacency(const CsrMatrix& adjacency);
CsrMatrix normalize_adjacency(const Graph& g);

// ----------------------------------------------------------------------------
// Dataset ingestion.
//
// Edge file: one edge per line, two integer node ids separated by whitespace
// or a comma; '#' starts a comment. Attribute file: delimited text with a
// header row naming every column; one row per node.
// ----------------------------------------------------------------------------
struct DatasetMeta {
    std::string name = "dataset";
    std::string label_column;
    double label_unknown_value = -1.0;
    /// Optional id column mapping rows to the ids used in the edge file.
    /// Without it, row order defines node ids and edges must use 0..n-1.
    std::string id_column;
    struct SensitiveSpec {
        std::string column;
        /// When set, value >= threshold binarizes to 1 (e.g. age at 25).
        std::optional<double> threshold;
    };
    std::vector<SensitiveSpec> sensitive_columns;
    std::vector<std::string> drop_columns;
    double train_ratio = 0.5;
    double val_ratio = 0.25;
    double test_ratio = 0.25;
    uint64_t split_seed = 1;
    bool standardize = true;

    void validate() const;
    static DatasetMeta from_json_file(const std::string& path);
    std::string to_json_string() const;
};

Graph load_dataset(const std::string& edge_file, const std::string& attribute_file,
                   const DatasetMeta& meta);

/// Seeded shuffle split over labeled nodes; used by both the loader and the
/// synthetic generator so the two paths agree.
SplitSets draw_splits(const std::vector<int8_t>& labels, double train_ratio, double val_ratio,
                      double test_ratio, uint64_t seed);

// ----------------------------------------------------------------------------
// Synthetic biased-graph generator.
//
// Two equally sized sensitive groups. Edges follow a two-block model whose
// intra/inter probabilities are derived from the homophily level h, so the
// expected intra-group edge fraction tracks h. A block of attribute columns
// leaks the group at correlation rho, the remaining columns carry label
// signal, and labels get a group-dependent offset: an unconstrained
// classifier picks the leak up and shows a positive demographic parity gap.
// ----------------------------------------------------------------------------
struct SynthParams {
    int num_nodes = 2000;
    int attr_dim = 16;          // includes the sensitive column itself
    double homophily = 0.9;     // h in [0.5, 1)
    double correlation = 0.6;   // rho in [0, 1]
    int leak_columns = 4;       // attribute columns correlated with the group
    double signal_strength = 2.0;
    double group_offset = 1.0;
    double neighbor_mixing = 0.5; // share of label signal averaged over neighbors
    double intra_edge_prob = 0.0;
    double inter_edge_prob = 0.0;
    double train_ratio = 0.5;
    double val_ratio = 0.25;
    double test_ratio = 0.25;

    /// Fills intra/inter edge probabilities from (h, mean degree) so that the
    /// expected intra-group edge fraction is approximately h.
    static SynthParams biased(int num_nodes, int attr_dim, double homophily, double correlation,
                              double mean_degree = 10.0);
    void validate() const;
};

Graph generate_synthetic(const SynthParams& params, uint64_t seed);

/// Writes a graph in the two-file dataset format plus a matching meta
/// descriptor, so generated data round-trips through load_dataset.
void write_dataset(const Graph& g, const std::string& edge_file, const std::string& attribute_file,
                   const std::string& meta_file, const DatasetMeta& meta);

/// Meta descriptor matching what write_dataset emits for a synthetic graph.
DatasetMeta synthetic_meta(const SynthParams& params, uint64_t seed);

} // namespace fairgkd
