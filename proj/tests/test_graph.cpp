#include "doctest.h"

#include "fairgkd/graph.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>

using namespace fairgkd;
namespace fs = std::filesystem;

namespace {

Graph two_node_graph() {
    Graph g;
    g.num_nodes = 2;
    g.num_edges = 1;
    g.adjacency = std::make_shared<CsrMatrix>(
        CsrMatrix::from_triples(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}}));
    g.attributes = Tensor::from_rows({{1.0, 0.0}, {3.0, 1.0}});
    g.attribute_names = {"f0", "sens"};
    g.sensitive.push_back({"sens", {0, 1}, 1});
    g.labels = {0, 1};
    g.original_ids = {0, 1};
    return g;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("fairgkd_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path);
    out << contents;
}

double intra_fraction(const Graph& g) {
    const auto& sens = g.sensitive.front().values;
    long intra = 0, total = 0;
    for (int i = 0; i < g.num_nodes; ++i)
        for (int k = g.adjacency->row_ptr[i]; k < g.adjacency->row_ptr[i + 1]; ++k) {
            const int j = g.adjacency->col_idx[k];
            if (j <= i) continue;
            ++total;
            intra += sens[static_cast<size_t>(i)] == sens[static_cast<size_t>(j)];
        }
    return static_cast<double>(intra) / static_cast<double>(total);
}

} // namespace

TEST_SUITE_BEGIN("graph");

TEST_CASE("normalization: two nodes, one edge gives all entries 0.5") {
    const Graph g = two_node_graph();
    const CsrMatrix norm = normalize_adjacency(g);
    const Tensor dense = norm.to_dense();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(dense(i, j) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("normalization: empty edge set gives the identity") {
    Graph g;
    g.num_nodes = 4;
    g.adjacency = std::make_shared<CsrMatrix>(CsrMatrix::from_triples(4, 4, {}));
    const Tensor dense = normalize_adjacency(g).to_dense();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(dense(i, j) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("normalization: 3-node path hand values") {
    Graph g;
    g.num_nodes = 3;
    g.adjacency = std::make_shared<CsrMatrix>(
        CsrMatrix::from_triples(3, 3, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 1.0}, {2, 1, 1.0}}));
    const Tensor a = normalize_adjacency(g).to_dense();
    const double s = 1.0 / std::sqrt(6.0);
    CHECK(a(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(a(0, 1) == doctest::Approx(s).epsilon(1e-15));
    CHECK(a(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(a(1, 2) == doctest::Approx(s).epsilon(1e-15));
    CHECK(a(0, 2) == 0.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(a(i, j) == a(j, i));
}

TEST_CASE("views: nodes-only replaces adjacency with the identity") {
    const Graph g = two_node_graph();
    const ViewData v = materialize(make_view(g, ViewKind::NodesOnly, "sens"));
    const Tensor eye = v.adj_raw->to_dense();
    CHECK(eye(0, 0) == 1.0);
    CHECK(eye(0, 1) == 0.0);
    CHECK(eye(1, 1) == 1.0);
    CHECK(v.attrs.cols() == 1); // sensitive column stripped
    CHECK(v.attrs(1, 0) == 3.0);
}

TEST_CASE("views: topology-only is all-ones at the full width") {
    const Graph g = two_node_graph();
    const ViewData v = materialize(make_view(g, ViewKind::TopologyOnly, "sens"));
    CHECK(v.attrs.rows() == 2);
    CHECK(v.attrs.cols() == 2);
    for (long e = 0; e < v.attrs.size(); ++e) CHECK(v.attrs.data()[e] == 1.0);
    CHECK(v.adj_raw.get() == g.adjacency.get());
}

TEST_CASE("views: full strips the designated column, keeps it when none designated") {
    const Graph g = two_node_graph();
    CHECK(materialize(make_view(g, ViewKind::Full, "sens")).attrs.cols() == 1);
    CHECK(materialize(make_view(g, ViewKind::Full, "")).attrs.cols() == 2);
    CHECK_THROWS_AS(make_view(g, ViewKind::Full, "nope"), DataError);
}

TEST_CASE("views: materialization does not mutate the source graph") {
    const Graph g = two_node_graph();
    const uint64_t before = params_checksum(std::vector<Tensor>{g.attributes});
    const int nnz_before = g.adjacency->nnz();
    for (ViewKind kind : {ViewKind::Full, ViewKind::NodesOnly, ViewKind::TopologyOnly})
        (void)materialize(make_view(g, kind, "sens"));
    CHECK(params_checksum(std::vector<Tensor>{g.attributes}) == before);
    CHECK(g.adjacency->nnz() == nnz_before);
}

TEST_CASE("loader: smallest graph") {
    TempDir dir;
    write_file(dir.file("edges.txt"), "# comment\n0 1\n");
    write_file(dir.file("attrs.csv"), "label,sens,f0\n0,0,1.5\n1,1,-2.0\n");
    DatasetMeta meta;
    meta.label_column = "label";
    meta.sensitive_columns.push_back({"sens", std::nullopt});
    meta.standardize = false;
    meta.train_ratio = 0.5;
    meta.val_ratio = 0.0;
    meta.test_ratio = 0.5;
    const Graph g = load_dataset(dir.file("edges.txt"), dir.file("attrs.csv"), meta);
    CHECK(g.num_nodes == 2);
    CHECK(g.num_edges == 1);
    CHECK(g.attr_dim() == 2); // sens stays a feature column; label does not
    const Tensor dense = g.adjacency->to_dense();
    CHECK(dense(0, 1) == 1.0);
    CHECK(dense(1, 0) == 1.0);
    CHECK(dense(0, 0) == 0.0);
    CHECK(g.sensitive.front().column == 0);
}

TEST_CASE("loader: identical splits on repeated loads") {
    TempDir dir;
    std::string attrs = "label,sens,f0\n";
    std::string edges;
    for (int i = 0; i < 40; ++i) {
        attrs += std::to_string(i % 2) + "," + std::to_string((i / 2) % 2) + "," +
                 std::to_string(i * 0.1) + "\n";
        if (i > 0) edges += std::to_string(i - 1) + " " + std::to_string(i) + "\n";
    }
    write_file(dir.file("edges.txt"), edges);
    write_file(dir.file("attrs.csv"), attrs);
    DatasetMeta meta;
    meta.label_column = "label";
    meta.sensitive_columns.push_back({"sens", std::nullopt});
    meta.split_seed = 7;
    const Graph a = load_dataset(dir.file("edges.txt"), dir.file("attrs.csv"), meta);
    const Graph b = load_dataset(dir.file("edges.txt"), dir.file("attrs.csv"), meta);
    CHECK(a.splits.train == b.splits.train);
    CHECK(a.splits.val == b.splits.val);
    CHECK(a.splits.test == b.splits.test);
    CHECK(a.splits.train.size() + a.splits.val.size() + a.splits.test.size() <= 40);
    std::set<int> all(a.splits.train.begin(), a.splits.train.end());
    for (int v : a.splits.val) CHECK(all.insert(v).second);
    for (int v : a.splits.test) CHECK(all.insert(v).second);
}

TEST_CASE("loader: error paths carry context") {
    TempDir dir;
    write_file(dir.file("attrs.csv"), "label,sens,f0\n0,0,1.0\n1,1,2.0\n");
    DatasetMeta meta;
    meta.label_column = "label";
    meta.sensitive_columns.push_back({"sens", std::nullopt});

    SUBCASE("dangling node id") {
        write_file(dir.file("edges.txt"), "0 5\n");
        CHECK_THROWS_WITH_AS(load_dataset(dir.file("edges.txt"), dir.file("attrs.csv"), meta),
                             doctest::Contains("dangling node id 5"), DataError);
    }
    SUBCASE("malformed edge line") {
        write_file(dir.file("edges.txt"), "0 x\n");
        CHECK_THROWS_WITH_AS(load_dataset(dir.file("edges.txt"), dir.file("attrs.csv"), meta),
                             doctest::Contains(":1:"), DataError);
    }
    SUBCASE("non-binary sensitive value") {
        write_file(dir.file("edges.txt"), "0 1\n");
        write_file(dir.file("attrs.csv"), "label,sens,f0\n0,2,1.0\n1,1,2.0\n");
        CHECK_THROWS_WITH_AS(load_dataset(dir.file("edges.txt"), dir.file("attrs.csv"), meta),
                             doctest::Contains("non-binary sensitive"), DataError);
    }
    SUBCASE("non-binary label value") {
        write_file(dir.file("edges.txt"), "0 1\n");
        write_file(dir.file("attrs.csv"), "label,sens,f0\n3,0,1.0\n1,1,2.0\n");
        CHECK_THROWS_WITH_AS(load_dataset(dir.file("edges.txt"), dir.file("attrs.csv"), meta),
                             doctest::Contains("non-binary label"), DataError);
    }
    SUBCASE("missing named column") {
        write_file(dir.file("edges.txt"), "0 1\n");
        meta.sensitive_columns[0].column = "race";
        CHECK_THROWS_WITH_AS(load_dataset(dir.file("edges.txt"), dir.file("attrs.csv"), meta),
                             doctest::Contains("missing sensitive column 'race'"), DataError);
    }
    SUBCASE("duplicate node row") {
        write_file(dir.file("edges.txt"), "1 2\n");
        write_file(dir.file("attrs.csv"), "id,label,sens,f0\n1,0,0,1.0\n2,1,1,2.0\n1,0,0,3.0\n");
        meta.id_column = "id";
        CHECK_THROWS_WITH_AS(load_dataset(dir.file("edges.txt"), dir.file("attrs.csv"), meta),
                             doctest::Contains("duplicate node row"), DataError);
    }
}

TEST_CASE("loader: id column re-indexes to dense ids") {
    TempDir dir;
    write_file(dir.file("edges.txt"), "100 205\n205 307\n");
    write_file(dir.file("attrs.csv"),
               "user_id,label,sens,f0\n100,0,0,1.0\n205,1,1,2.0\n307,0,1,3.0\n");
    DatasetMeta meta;
    meta.label_column = "label";
    meta.id_column = "user_id";
    meta.sensitive_columns.push_back({"sens", std::nullopt});
    meta.standardize = false;
    const Graph g = load_dataset(dir.file("edges.txt"), dir.file("attrs.csv"), meta);
    CHECK(g.num_nodes == 3);
    CHECK(g.num_edges == 2);
    CHECK(g.original_ids == std::vector<long>{100, 205, 307});
    CHECK(g.attr_dim() == 2); // id column is not a feature
    const Tensor dense = g.adjacency->to_dense();
    CHECK(dense(0, 1) == 1.0);
    CHECK(dense(1, 2) == 1.0);
    CHECK(dense(0, 2) == 0.0);
}

TEST_CASE("loader: unknown labels are excluded from splits") {
    TempDir dir;
    write_file(dir.file("edges.txt"), "0 1\n1 2\n2 3\n");
    write_file(dir.file("attrs.csv"), "label,sens,f0\n0,0,1.0\n-1,1,2.0\n1,0,3.0\n-1,1,4.0\n");
    DatasetMeta meta;
    meta.label_column = "label";
    meta.sensitive_columns.push_back({"sens", std::nullopt});
    meta.train_ratio = 0.5;
    meta.val_ratio = 0.0;
    meta.test_ratio = 0.5;
    const Graph g = load_dataset(dir.file("edges.txt"), dir.file("attrs.csv"), meta);
    CHECK(g.labels[1] == kUnknownLabel);
    for (const auto* split : {&g.splits.train, &g.splits.val, &g.splits.test})
        for (int idx : *split) CHECK(g.labels[static_cast<size_t>(idx)] != kUnknownLabel);
}

TEST_CASE("loader: age-style threshold binarization") {
    TempDir dir;
    write_file(dir.file("edges.txt"), "0 1\n");
    write_file(dir.file("attrs.csv"), "label,age,f0\n0,31,1.0\n1,19,2.0\n");
    DatasetMeta meta;
    meta.label_column = "label";
    meta.sensitive_columns.push_back({"age", 25.0});
    meta.standardize = false;
    const Graph g = load_dataset(dir.file("edges.txt"), dir.file("attrs.csv"), meta);
    CHECK(g.sensitive_by_name("age").values == std::vector<int8_t>{1, 0});
    // the raw column keeps its original values as a feature
    CHECK(g.attributes(0, 0) == 31.0);
}

TEST_CASE("standardization centers and scales feature columns") {
    TempDir dir;
    write_file(dir.file("edges.txt"), "0 1\n");
    write_file(dir.file("attrs.csv"), "label,sens,f0\n0,0,10.0\n1,1,20.0\n");
    DatasetMeta meta;
    meta.label_column = "label";
    meta.sensitive_columns.push_back({"sens", std::nullopt});
    meta.standardize = true;
    const Graph g = load_dataset(dir.file("edges.txt"), dir.file("attrs.csv"), meta);
    const int col = g.attribute_index("f0");
    CHECK(g.attributes(0, col) == doctest::Approx(-1.0));
    CHECK(g.attributes(1, col) == doctest::Approx(1.0));
}

TEST_CASE("synthetic: strong homophily plants mostly intra-group edges") {
    const SynthParams params = SynthParams::biased(2000, 16, 0.9, 0.6);
    const Graph g = generate_synthetic(params, 1);
    CHECK(g.num_nodes == 2000);
    CHECK(intra_fraction(g) > 0.8);
}

TEST_CASE("synthetic: no homophily and no correlation is balanced") {
    const SynthParams params = SynthParams::biased(2000, 16, 0.5, 0.0);
    const Graph g = generate_synthetic(params, 3);
    CHECK(intra_fraction(g) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("synthetic: deterministic given the seed") {
    const SynthParams params = SynthParams::biased(500, 8, 0.8, 0.4);
    const Graph a = generate_synthetic(params, 42);
    const Graph b = generate_synthetic(params, 42);
    CHECK(a.adjacency->col_idx == b.adjacency->col_idx);
    CHECK(a.labels == b.labels);
    CHECK(params_checksum(std::vector<Tensor>{a.attributes}) ==
          params_checksum(std::vector<Tensor>{b.attributes}));
    const Graph c = generate_synthetic(params, 43);
    CHECK(a.adjacency->col_idx != c.adjacency->col_idx);
}

TEST_CASE("synthetic: intra-group fraction increases with homophily") {
    // statistical property over 10 seeds per homophily level
    double previous = -1.0;
    for (double h : {0.5, 0.7, 0.9}) {
        const SynthParams params = SynthParams::biased(600, 8, h, 0.3);
        double mean = 0.0;
        for (uint64_t seed = 0; seed < 10; ++seed)
            mean += intra_fraction(generate_synthetic(params, seed));
        mean /= 10.0;
        CHECK(mean > previous);
        previous = mean;
    }
}

TEST_CASE("synthetic: unconstrained group rates differ (planted bias)") {
    const SynthParams params = SynthParams::biased(2000, 16, 0.9, 0.6);
    const Graph g = generate_synthetic(params, 11);
    const auto& sens = g.sensitive.front().values;
    double positives[2] = {0.0, 0.0};
    long count[2] = {0, 0};
    for (int i = 0; i < g.num_nodes; ++i) {
        positives[sens[static_cast<size_t>(i)]] += g.labels[static_cast<size_t>(i)];
        ++count[sens[static_cast<size_t>(i)]];
    }
    const double gap = positives[1] / count[1] - positives[0] / count[0];
    CHECK(gap > 0.1); // group 1 carries the positive offset
}

TEST_CASE("synthetic: invalid parameters are rejected") {
    SynthParams params = SynthParams::biased(100, 8, 0.9, 0.5);
    params.intra_edge_prob = 1.5;
    CHECK_THROWS_AS(generate_synthetic(params, 0), DataError);
    params = SynthParams::biased(100, 8, 0.9, 0.5);
    params.homophily = 0.4;
    CHECK_THROWS_AS(generate_synthetic(params, 0), DataError);
    params = SynthParams::biased(100, 8, 0.9, 0.5);
    params.leak_columns = 8;
    CHECK_THROWS_AS(generate_synthetic(params, 0), DataError);
}

TEST_CASE("synthetic dataset round-trips through the loader") {
    TempDir dir;
    const SynthParams params = SynthParams::biased(200, 6, 0.8, 0.5);
    const Graph g = generate_synthetic(params, 9);
    const DatasetMeta meta = synthetic_meta(params, 9);
    write_dataset(g, dir.file("edges.txt"), dir.file("attrs.csv"), dir.file("meta.json"), meta);
    const Graph back = load_dataset(dir.file("edges.txt"), dir.file("attrs.csv"),
                                    DatasetMeta::from_json_file(dir.file("meta.json")));
    CHECK(back.num_nodes == g.num_nodes);
    CHECK(back.num_edges == g.num_edges);
    CHECK(back.adjacency->col_idx == g.adjacency->col_idx);
    CHECK(back.labels == g.labels);
    CHECK(back.splits.train == g.splits.train);
    CHECK(back.splits.test == g.splits.test);
    CHECK(params_checksum(std::vector<Tensor>{back.attributes}) ==
          params_checksum(std::vector<Tensor>{g.attributes}));
}

TEST_SUITE_END();
