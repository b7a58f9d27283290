#include "doctest.h"

#include "fairgkd/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace fairgkd;
namespace fs = std::filesystem;

namespace {

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.hidden = 8;
    cfg.epochs = 120;
    cfg.synth = SynthParams::biased(150, 8, 0.85, 0.6, 8.0);
    cfg.synth_per_seed = false;
    cfg.runs = 1;
    cfg.parallel = 1;
    return cfg;
}

Graph small_graph(uint64_t seed = 1) {
    return generate_synthetic(SynthParams::biased(150, 8, 0.85, 0.6, 8.0), seed);
}

double majority_rate(const Graph& g, const std::vector<int>& mask) {
    long pos = 0;
    for (int idx : mask) pos += g.labels[static_cast<size_t>(idx)] == 1;
    const double rate = static_cast<double>(pos) / static_cast<double>(mask.size());
    return 100.0 * std::max(rate, 1.0 - rate);
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("fairgkd_pipe_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("experts beat the constant-predictor floor and freeze afterwards") {
    const Graph g = small_graph();
    const TrainConfig cfg = small_config();
    const ExpertBundle bundle = train_experts(g, cfg, 1);
    // ln 2 is the uninformative-predictor train loss
    CHECK(bundle.attr_fit.rows.back().loss < std::log(2.0));
    CHECK(bundle.struct_fit.rows.back().loss < std::log(2.0));
    CHECK(bundle.attr_expert.frozen());
    CHECK(bundle.struct_expert.frozen());
    for (const Tensor& p : bundle.attr_expert.parameters()) CHECK_FALSE(p.requires_grad());
}

TEST_CASE("nodes-only expert is blind to edge additions") {
    Graph g = small_graph();
    const TrainConfig cfg = small_config();
    const ExpertBundle bundle = train_experts(g, cfg, 2);
    const std::string strip = resolve_strip_column(cfg, g);
    const Tensor before =
        bundle.attr_expert.representation(materialize(make_view(g, ViewKind::NodesOnly, strip)));
    // densify the graph with extra edges
    auto triples = std::vector<std::tuple<int, int, double>>();
    for (int i = 0; i < g.num_nodes; ++i)
        for (int k = g.adjacency->row_ptr[i]; k < g.adjacency->row_ptr[i + 1]; ++k)
            triples.emplace_back(i, g.adjacency->col_idx[k], 1.0);
    for (int i = 0; i + 19 < g.num_nodes; i += 10) {
        triples.emplace_back(i, i + 19, 1.0);
        triples.emplace_back(i + 19, i, 1.0);
    }
    g.adjacency = std::make_shared<CsrMatrix>(
        CsrMatrix::from_triples(g.num_nodes, g.num_nodes, std::move(triples)));
    const Tensor after =
        bundle.attr_expert.representation(materialize(make_view(g, ViewKind::NodesOnly, strip)));
    for (long e = 0; e < before.size(); ++e) CHECK(before.data()[e] == after.data()[e]);
}

TEST_CASE("reference training beats the majority class and is deterministic") {
    const Graph g = small_graph();
    const TrainConfig cfg = small_config();
    const ReferenceResult a = train_reference(g, cfg, 3);
    const ReferenceResult b = train_reference(g, cfg, 3);
    CHECK(params_checksum(a.model.parameters()) == params_checksum(b.model.parameters()));
    CHECK(a.model.frozen());
    const std::string strip = resolve_strip_column(cfg, g);
    const RunRecord rec = evaluate_multi_sensitive(a.model, g, {"sens"}, strip);
    CHECK(rec.acc > majority_rate(g, g.splits.test));
}

TEST_CASE("projector training: loss beats the uniform floor, cosine improves, inputs untouched") {
    const Graph g = small_graph();
    TrainConfig cfg = small_config();
    cfg.epochs = 200;
    const ExpertBundle experts = train_experts(g, cfg, 4);
    const ReferenceResult reference = train_reference(g, cfg, 4);
    const uint64_t attr_sum = params_checksum(experts.attr_expert.parameters());
    const uint64_t struct_sum = params_checksum(experts.struct_expert.parameters());
    const uint64_t ref_sum = params_checksum(reference.model.parameters());

    const ProjectorResult proj =
        train_projector(experts.attr_expert, experts.struct_expert, reference.model, g, cfg, 4);

    CHECK(params_checksum(experts.attr_expert.parameters()) == attr_sum);
    CHECK(params_checksum(experts.struct_expert.parameters()) == struct_sum);
    CHECK(params_checksum(reference.model.parameters()) == ref_sum);
    CHECK(proj.projector.frozen());

    // the uniform-similarity closed form is the trivial ceiling
    CHECK(proj.rows.back().loss < std::log(2.0 * g.num_nodes - 1.0));
    CHECK(proj.rows.back().mean_pos_cosine > proj.rows.front().mean_pos_cosine);
    CHECK(proj.rows.back().loss < proj.rows.front().loss);
}

TEST_CASE("unfrozen inputs to projector training are rejected") {
    const Graph g = small_graph();
    const TrainConfig cfg = small_config();
    Rng rng(5);
    AttributeExpert attr(g.attr_dim() - 1, cfg.hidden, rng);
    StructureExpert structure(g.attr_dim(), cfg.hidden, rng);
    StudentNet reference(cfg.backbone, g.attr_dim() - 1, cfg.hidden, rng);
    CHECK_THROWS_AS(train_projector(attr, structure, reference, g, cfg, 5), ContractError);
}

TEST_CASE("distillation holds the coefficient invariants every epoch") {
    const Graph g = small_graph();
    TrainConfig cfg = small_config();
    cfg.epochs = 80;
    const ExpertBundle experts = train_experts(g, cfg, 6);
    const ReferenceResult reference = train_reference(g, cfg, 6);
    const ProjectorResult proj =
        train_projector(experts.attr_expert, experts.struct_expert, reference.model, g, cfg, 6);
    const SyntheticTeacher teacher{experts.attr_expert, experts.struct_expert, proj.projector};

    const uint64_t teacher_sum = params_checksum(teacher.parameters());
    const DistillResult result = distill_student(teacher, g, cfg, 6);
    CHECK(params_checksum(teacher.parameters()) == teacher_sum); // stage isolation
    CHECK(static_cast<int>(result.rows.size()) == cfg.epochs);
    CHECK(result.rows[0].alpha == 0.5);
    CHECK(result.rows[0].beta == 0.5);
    for (const StudentRow& row : result.rows) {
        CHECK(row.alpha + row.beta == 1.0);
        CHECK(row.alpha >= 0.0);
        CHECK(row.alpha <= 1.0);
        CHECK(row.loss_soft > 0.0);
    }
}

TEST_CASE("balancer lr 0 pins alpha at 0.5 for the whole run") {
    const Graph g = small_graph();
    TrainConfig cfg = small_config();
    cfg.epochs = 40;
    cfg.balance_lr = 0.0;
    const ExpertBundle experts = train_experts(g, cfg, 7);
    const ReferenceResult reference = train_reference(g, cfg, 7);
    const ProjectorResult proj =
        train_projector(experts.attr_expert, experts.struct_expert, reference.model, g, cfg, 7);
    const SyntheticTeacher teacher{experts.attr_expert, experts.struct_expert, proj.projector};
    const DistillResult result = distill_student(teacher, g, cfg, 7);
    for (const StudentRow& row : result.rows) CHECK(row.alpha == 0.5);
}

TEST_CASE("forced beta 0 distillation is bit-identical to vanilla training") {
    const Graph g = small_graph();
    TrainConfig cfg = small_config();
    cfg.epochs = 60;
    const ExpertBundle experts = train_experts(g, cfg, 8);
    const ReferenceResult reference = train_reference(g, cfg, 8);
    const ProjectorResult proj =
        train_projector(experts.attr_expert, experts.struct_expert, reference.model, g, cfg, 8);
    const SyntheticTeacher teacher{experts.attr_expert, experts.struct_expert, proj.projector};

    TrainConfig degenerate = cfg;
    degenerate.fixed_alpha = 1.0;
    const DistillResult distilled = distill_student(teacher, g, degenerate, 8);

    // vanilla: the same architecture trained on the full view with BCE only
    const std::string strip = resolve_strip_column(cfg, g);
    const ViewData full = materialize(make_view(g, ViewKind::Full, strip));
    Rng rng(derive_seed(8, "student"));
    StudentNet vanilla(cfg.backbone, full.attrs.cols(), cfg.hidden, rng);
    fit_supervised([&] { return vanilla.forward(full).second; }, vanilla.parameters(), g, cfg,
                   "vanilla");
    CHECK(params_checksum(distilled.student.parameters()) ==
          params_checksum(vanilla.parameters()));
}

TEST_CASE("fixed 0.5/0.5 coefficients bypass the balancer") {
    const Graph g = small_graph();
    TrainConfig cfg = small_config();
    cfg.epochs = 30;
    cfg.fixed_alpha = 0.5;
    const ExpertBundle experts = train_experts(g, cfg, 9);
    const ReferenceResult reference = train_reference(g, cfg, 9);
    const ProjectorResult proj =
        train_projector(experts.attr_expert, experts.struct_expert, reference.model, g, cfg, 9);
    const SyntheticTeacher teacher{experts.attr_expert, experts.struct_expert, proj.projector};
    const DistillResult result = distill_student(teacher, g, cfg, 9);
    for (const StudentRow& row : result.rows) {
        CHECK(row.alpha == 0.5);
        CHECK(row.beta == 0.5);
    }
}

TEST_CASE("gin backbone runs the whole distillation") {
    const Graph g = small_graph();
    TrainConfig cfg = small_config();
    cfg.backbone = Backbone::Gin;
    cfg.epochs = 30;
    const ExpertBundle experts = train_experts(g, cfg, 12);
    const ReferenceResult reference = train_reference(g, cfg, 12);
    CHECK(reference.model.spec().backbone == Backbone::Gin);
    const ProjectorResult proj =
        train_projector(experts.attr_expert, experts.struct_expert, reference.model, g, cfg, 12);
    const SyntheticTeacher teacher{experts.attr_expert, experts.struct_expert, proj.projector};
    const DistillResult result = distill_student(teacher, g, cfg, 12);
    CHECK(result.student.spec().backbone == Backbone::Gin);
    for (const StudentRow& row : result.rows) {
        CHECK(std::isfinite(row.loss_hard));
        CHECK(std::isfinite(row.loss_soft));
    }
}

TEST_CASE("mse soft loss trains and logs positive soft values") {
    const Graph g = small_graph();
    TrainConfig cfg = small_config();
    cfg.epochs = 30;
    cfg.soft_loss = SoftLossKind::Mse;
    const ExpertBundle experts = train_experts(g, cfg, 10);
    const ReferenceResult reference = train_reference(g, cfg, 10);
    const ProjectorResult proj =
        train_projector(experts.attr_expert, experts.struct_expert, reference.model, g, cfg, 10);
    // the mse mode drives the projector too; its loss must actually descend
    CHECK(proj.rows.back().loss < proj.rows.front().loss);
    const SyntheticTeacher teacher{experts.attr_expert, experts.struct_expert, proj.projector};
    const DistillResult result = distill_student(teacher, g, cfg, 10);
    for (const StudentRow& row : result.rows) {
        CHECK(std::isfinite(row.loss_soft));
        CHECK(row.loss_soft > 0.0);
    }
}

TEST_CASE("with-sensitive runs keep the column; default runs strip it") {
    const Graph g = small_graph();
    TrainConfig cfg = small_config();
    CHECK(resolve_strip_column(cfg, g) == "sens");
    cfg.with_sensitive = true;
    CHECK(resolve_strip_column(cfg, g).empty());
    CHECK(materialize(make_view(g, ViewKind::Full, "")).attrs.cols() == g.attr_dim());
}

TEST_CASE("run_baseline aggregates per-seed records with the right strategy names") {
    const Graph g = small_graph();
    TrainConfig cfg = small_config();
    cfg.epochs = 50;
    cfg.runs = 2;
    const MetricsReport rep = run_baseline(g, ViewKind::NodesOnly, cfg);
    CHECK(rep.strategy == "nodes-only");
    CHECK(rep.runs.size() == 2);
    CHECK(rep.runs[0].seed == 0);
    CHECK(rep.runs[1].seed == 1);
    CHECK(rep.attributes == std::vector<std::string>{"sens"});
}

TEST_CASE("run_experiment: determinism and single-run zero std") {
    TrainConfig cfg = small_config();
    cfg.epochs = 40;
    const ExperimentResult a = run_experiment(cfg);
    const ExperimentResult b = run_experiment(cfg);
    CHECK(a.report.to_json_string() == b.report.to_json_string());
    CHECK(a.report.acc.stddev == 0.0);
    CHECK(a.report.runs.size() == 1);
}

TEST_CASE("run_experiment: parallel workers do not change the result") {
    TrainConfig cfg = small_config();
    cfg.epochs = 30;
    cfg.runs = 3;
    cfg.parallel = 1;
    const ExperimentResult serial = run_experiment(cfg);
    cfg.parallel = 3;
    const ExperimentResult parallel = run_experiment(cfg);
    CHECK(serial.report.to_json_string() == parallel.report.to_json_string());
}

TEST_CASE("run_experiment persists artifacts and the checkpoint reproduces the metrics") {
    TempDir dir;
    TrainConfig cfg = small_config();
    cfg.epochs = 40;
    cfg.out_dir = dir.path.string();
    const ExperimentResult result = run_experiment(cfg);
    CHECK(fs::exists(dir.path / "config.json"));
    CHECK(fs::exists(dir.path / "metrics.json"));
    CHECK(fs::exists(dir.path / "summary.csv"));
    const fs::path seed_dir = dir.path / "seed_0";
    for (const char* name :
         {"checkpoints/attr_expert.bin", "checkpoints/struct_expert.bin",
          "checkpoints/projector.bin", "checkpoints/reference.bin", "checkpoints/student.ckpt",
          "logs/attr_expert.csv", "logs/struct_expert.csv", "logs/reference.csv",
          "logs/projector.csv", "logs/student.csv", "embeddings/teacher.bin",
          "embeddings/student.bin", "manifest.json", "metrics.json"})
        CHECK(fs::exists(seed_dir / name));

    // teacher embedding dump has the expected shape
    const Tensor teacher_rep = load_tensor((seed_dir / "embeddings/teacher.bin").string());
    CHECK(teacher_rep.rows() == 150);
    CHECK(teacher_rep.cols() == cfg.hidden);

    // self-consistency: evaluating the stored checkpoint reproduces the report
    const Graph g = generate_synthetic(*cfg.synth, 0);
    const StudentNet student = StudentNet::load((seed_dir / "checkpoints/student.ckpt").string());
    const RunRecord rec = evaluate_multi_sensitive(student, g, {"sens"}, "sens");
    CHECK(rec.acc == result.report.runs[0].acc);
    CHECK(rec.f1 == result.report.runs[0].f1);
    CHECK(rec.fairness[0].dp == result.report.runs[0].fairness[0].dp);
    CHECK(rec.fairness[0].eo == result.report.runs[0].fairness[0].eo);

    // metric documents are byte-identical across re-runs into another location
    TempDir dir2;
    TrainConfig cfg2 = cfg;
    cfg2.out_dir = dir2.path.string();
    (void)run_experiment(cfg2);
    CHECK(slurp(dir.path / "metrics.json") == slurp(dir2.path / "metrics.json"));
    CHECK(slurp(dir.path / "summary.csv") == slurp(dir2.path / "summary.csv"));
    CHECK(slurp(dir.path / "seed_0/logs/student.csv") ==
          slurp(dir2.path / "seed_0/logs/student.csv"));
}

TEST_CASE("config json round-trip, unknown keys rejected, hash ignores out_dir") {
    TempDir dir;
    fs::create_directories(dir.path);
    TrainConfig cfg = small_config();
    cfg.out_dir = "somewhere";
    const std::string path = (dir.path / "config.json").string();
    {
        std::ofstream out(path);
        out << cfg.to_json_string(false);
    }
    const TrainConfig back = TrainConfig::from_json_file(path);
    CHECK(back.hidden == cfg.hidden);
    CHECK(back.epochs == cfg.epochs);
    CHECK(back.synth.has_value());
    CHECK(back.synth->homophily == cfg.synth->homophily);
    CHECK(back.config_hash() == cfg.config_hash());

    TrainConfig moved = cfg;
    moved.out_dir = "elsewhere";
    CHECK(moved.config_hash() == cfg.config_hash());
    TrainConfig altered = cfg;
    altered.tau = 0.9;
    CHECK(altered.config_hash() != cfg.config_hash());

    {
        std::ofstream out(path);
        out << "{\"hiden\": 16}";
    }
    CHECK_THROWS_AS(TrainConfig::from_json_file(path), UsageError);
}

TEST_CASE("a non-finite loss aborts with diagnostics") {
    const Graph g = small_graph();
    TrainConfig cfg = small_config();
    cfg.epochs = 5;
    Tensor w = Tensor::ones(g.num_nodes, 1).set_requires_grad(true);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(
        fit_supervised([&] { return scale(w, nan); }, {w}, g, cfg, "poisoned stage"),
        doctest::Contains("diverged"), TrainError);
}

TEST_SUITE_END();
