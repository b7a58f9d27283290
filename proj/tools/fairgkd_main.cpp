// fairgkd command line: dataset preparation, synthetic data generation,
// baseline runs, full distillation runs and checkpoint evaluation.

#include "CLI11.hpp"
#include "json.hpp"

#include "fairgkd/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace fairgkd;

namespace {

struct CliOptions {
    std::string config_path;
    std::string edge_file;
    std::string attribute_file;
    std::string meta_file;
    std::string out_dir;
    std::string strategy = "full";
    std::string backbone = "gcn";
    std::string soft_loss = "ntxent";
    std::string checkpoint;
    std::string seeds_list;
    uint64_t seed = 0;
    int runs = 1;
    int epochs = 1000;
    int hidden = 16;
    double tau = 0.5;
    double gamma = 0.1;
    double balance_lr = 1.0;
    double fixed_alpha = -1.0;
    int parallel = 0;
    bool with_sensitive = false;
    bool use_sim_head = false;
};

std::vector<uint64_t> parse_seed_list(const std::string& s) {
    std::vector<uint64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoull(item));
    }
    if (out.empty()) throw UsageError("--seeds: empty list");
    return out;
}

/// Flags > config file > defaults; the app tells us which flags were set.
TrainConfig build_config(const CLI::App& cmd, const CliOptions& opt) {
    TrainConfig cfg;
    if (!opt.config_path.empty()) cfg = TrainConfig::from_json_file(opt.config_path);
    auto set = [&](const std::string& flag) { return cmd.count(flag) > 0; };
    if (set("--edges")) cfg.edge_file = opt.edge_file;
    if (set("--attrs")) cfg.attribute_file = opt.attribute_file;
    if (set("--meta")) cfg.meta_file = opt.meta_file;
    if (set("--out")) cfg.out_dir = opt.out_dir;
    if (set("--backbone")) cfg.backbone = backbone_from_string(opt.backbone);
    if (set("--soft-loss")) cfg.soft_loss = soft_loss_from_string(opt.soft_loss);
    if (set("--seed")) cfg.seed = opt.seed;
    if (set("--seeds")) cfg.seeds = parse_seed_list(opt.seeds_list);
    if (set("--runs")) cfg.runs = opt.runs;
    if (set("--epochs")) cfg.epochs = opt.epochs;
    if (set("--hidden")) cfg.hidden = opt.hidden;
    if (set("--tau")) cfg.tau = opt.tau;
    if (set("--gamma")) cfg.gamma = opt.gamma;
    if (set("--balance-lr")) cfg.balance_lr = opt.balance_lr;
    if (set("--fixed-alpha")) cfg.fixed_alpha = opt.fixed_alpha;
    if (set("--parallel")) cfg.parallel = opt.parallel;
    if (set("--with-sensitive")) cfg.with_sensitive = opt.with_sensitive;
    if (set("--sim-head")) cfg.use_sim_head = opt.use_sim_head;

    // environment override for the output root
    if (const char* root = std::getenv("FAIRGKD_OUT")) {
        if (cfg.out_dir.empty())
            cfg.out_dir = root;
        else if (fs::path(cfg.out_dir).is_relative())
            cfg.out_dir = (fs::path(root) / cfg.out_dir).string();
    }
    cfg.validate();
    return cfg;
}

void add_common_flags(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--config", opt.config_path, "JSON config file; flags take precedence [tool]");
    cmd->add_option("--seed", opt.seed, "base RNG seed (default 0) [tool]");
    cmd->add_option("--seeds", opt.seeds_list, "explicit comma-separated seed list [tool]");
    cmd->add_option("--runs", opt.runs,
                    "number of seeded repetitions (default 1; the published protocol uses 10) "
                    "[method]");
    cmd->add_option("--out", opt.out_dir, "output directory; FAIRGKD_OUT overrides the root [tool]");
    cmd->add_option("--backbone", opt.backbone, "student backbone, gcn or gin (default gcn) [method]")
        ->check(CLI::IsMember({"gcn", "gin"}));
    cmd->add_option("--epochs", opt.epochs, "training epochs per stage (default 1000) [method]");
    cmd->add_option("--hidden", opt.hidden, "hidden width of every model (default 16) [method]");
    cmd->add_option("--tau", opt.tau, "contrastive temperature (default 0.5) [method]");
    cmd->add_option("--gamma", opt.gamma, "disadvantaged-loss exponent (default 0.1) [method]");
    cmd->add_option("--balance-lr", opt.balance_lr,
                    "coefficient schedule learning rate (default 1.0) [method]");
    cmd->add_option("--fixed-alpha", opt.fixed_alpha,
                    "fix the hard-loss coefficient instead of adapting it (beta = 1 - alpha) "
                    "[tool]");
    cmd->add_option("--soft-loss", opt.soft_loss,
                    "distillation soft loss, ntxent or mse (default ntxent) [method]")
        ->check(CLI::IsMember({"ntxent", "mse"}));
    cmd->add_flag("--with-sensitive", opt.with_sensitive,
                  "keep the sensitive column in model inputs (default off) [method]");
    cmd->add_flag("--sim-head", opt.use_sim_head,
                  "learnable linear head inside the contrastive similarity (default off) [tool]");
    cmd->add_option("--parallel", opt.parallel,
                    "worker threads across seeds, 0 = hardware (default 0) [tool]");
    cmd->add_option("--edges", opt.edge_file, "edge list file [tool]");
    cmd->add_option("--attrs", opt.attribute_file, "node attribute file [tool]");
    cmd->add_option("--meta", opt.meta_file, "dataset meta descriptor (JSON) [tool]");
}

void write_mapping(const Graph& g, const std::string& path) {
    std::string out = "# original_id new_id\n";
    for (int i = 0; i < g.num_nodes; ++i)
        out += std::to_string(g.original_ids[static_cast<size_t>(i)]) + " " + std::to_string(i) +
               "\n";
    atomic_write_file(path, out);
}

int cmd_prepare(const CLI::App& cmd, const CliOptions& opt) {
    TrainConfig cfg = build_config(cmd, opt);
    const Graph g = obtain_graph(cfg, cfg.seed);
    std::cout << "nodes: " << g.num_nodes << "\n";
    std::cout << "edges: " << g.num_edges << "\n";
    std::cout << "attributes: " << g.attr_dim() << "\n";
    long pos = 0, neg = 0, unknown = 0;
    for (int8_t y : g.labels) {
        if (y == 1)
            ++pos;
        else if (y == 0)
            ++neg;
        else
            ++unknown;
    }
    std::cout << "labels: " << pos << " positive, " << neg << " negative, " << unknown
              << " unknown\n";
    for (const auto& s : g.sensitive) {
        long ones = 0;
        for (int8_t v : s.values) ones += v;
        std::cout << "group sizes (" << s.name << "): " << (g.num_nodes - ones) << " / " << ones
                  << "\n";
    }
    std::cout << "splits: " << g.splits.train.size() << " train, " << g.splits.val.size()
              << " val, " << g.splits.test.size() << " test\n";
    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        write_mapping(g, cfg.out_dir + "/node_id_map.txt");
        std::cout << "node id map written to " << cfg.out_dir << "/node_id_map.txt\n";
    }
    return 0;
}

int cmd_synth(const CLI::App& cmd, const CliOptions& opt) {
    TrainConfig cfg = build_config(cmd, opt);
    if (cfg.out_dir.empty()) throw UsageError("synth: --out is required");
    const SynthParams params = cfg.synth ? *cfg.synth : SynthParams::biased(2000, 16, 0.9, 0.6);
    const Graph g = generate_synthetic(params, cfg.seed);
    fs::create_directories(cfg.out_dir);
    write_dataset(g, cfg.out_dir + "/edges.txt", cfg.out_dir + "/attributes.csv",
                  cfg.out_dir + "/meta.json", synthetic_meta(params, cfg.seed));
    std::cout << "synthetic dataset written to " << cfg.out_dir << " (" << g.num_nodes
              << " nodes, " << g.num_edges << " edges)\n";
    return 0;
}

int cmd_baseline(const CLI::App& cmd, const CliOptions& opt) {
    TrainConfig cfg = build_config(cmd, opt);
    const ViewKind strategy = view_kind_from_string(opt.strategy);
    const Graph g = obtain_graph(cfg, cfg.effective_seeds().front());
    const MetricsReport report = run_baseline(g, strategy, cfg);
    std::cout << report.to_json_string();
    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        const std::string base = cfg.out_dir + "/metrics_" + to_string(strategy);
        atomic_write_file(base + ".json", report.to_json_string());
        atomic_write_file(base + ".csv",
                          MetricsReport::summary_header() + "\n" + report.summary_row());
    }
    return 0;
}

int cmd_train(const CLI::App& cmd, const CliOptions& opt) {
    TrainConfig cfg = build_config(cmd, opt);
    const ExperimentResult result = run_experiment(cfg);
    std::cout << result.report.to_json_string();
    if (!result.out_dir.empty() && cfg.has_dataset_files() && !cfg.synth) {
        const Graph g = obtain_graph(cfg, cfg.seed);
        write_mapping(g, result.out_dir + "/node_id_map.txt");
    }
    return 0;
}

int cmd_evaluate(const CLI::App& cmd, const CliOptions& opt) {
    TrainConfig cfg = build_config(cmd, opt);
    if (opt.checkpoint.empty()) throw UsageError("evaluate: --checkpoint is required");
    const StudentNet model = StudentNet::load(opt.checkpoint);

    // the manifest next to a training checkpoint pins the view configuration
    std::string strip;
    bool have_strip = false;
    const fs::path manifest_path = fs::path(opt.checkpoint).parent_path().parent_path() /
                                   "manifest.json";
    if (fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        nlohmann::json m;
        in >> m;
        if (m.contains("strip_column")) {
            strip = m.at("strip_column").get<std::string>();
            have_strip = true;
        }
    }
    const uint64_t graph_seed = cfg.effective_seeds().front();
    const Graph g = obtain_graph(cfg, graph_seed);
    if (!have_strip) strip = resolve_strip_column(cfg, g);

    RunRecord rec = evaluate_multi_sensitive(model, g, resolve_eval_attributes(cfg, g), strip);
    rec.seed = graph_seed;
    rec.strategy = "evaluate";
    const MetricsReport report = aggregate_runs({rec}, "evaluate", cfg.config_hash());
    std::cout << report.to_json_string();
    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        atomic_write_file(cfg.out_dir + "/metrics_evaluate.json", report.to_json_string());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"FairGKD: fair graph neural networks via partial knowledge distillation"};
    app.require_subcommand(1);

    CliOptions opt;
    CLI::App* prepare = app.add_subcommand("prepare", "validate a dataset and print its summary");
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic biased dataset");
    CLI::App* baseline = app.add_subcommand("baseline", "train and evaluate a partial-data baseline");
    CLI::App* train = app.add_subcommand("train", "run the full distillation experiment");
    CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a student checkpoint");
    for (CLI::App* cmd : {prepare, synth, baseline, train, evaluate}) add_common_flags(cmd, opt);
    baseline->add_option("--strategy", opt.strategy,
                         "training strategy: full, nodes-only or topology-only [method]")
        ->check(CLI::IsMember({"full", "nodes-only", "topology-only"}));
    evaluate->add_option("--checkpoint", opt.checkpoint, "student checkpoint to evaluate [tool]");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (prepare->parsed()) return cmd_prepare(*prepare, opt);
        if (synth->parsed()) return cmd_synth(*synth, opt);
        if (baseline->parsed()) return cmd_baseline(*baseline, opt);
        if (train->parsed()) return cmd_train(*train, opt);
        if (evaluate->parsed()) return cmd_evaluate(*evaluate, opt);
    } catch (const UsageError& e) {
        std::cerr << "error[usage]: " << e.what() << "\n";
        return 1;
    } catch (const TrainError& e) {
        std::cerr << "error[training]: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error[data]: " << e.what() << "\n";
        return 2;
    } catch (const MetricError& e) {
        std::cerr << "error[metric]: " << e.what() << "\n";
        return 2;
    } catch (const ContractError& e) {
        std::cerr << "error[contract]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
