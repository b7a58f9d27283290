#include "fairgkd/pipeline.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace fairgkd {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(SoftLossKind k) {
    return k == SoftLossKind::NtXent ? "ntxent" : "mse";
}

SoftLossKind soft_loss_from_string(const std::string& s) {
    if (s == "ntxent") return SoftLossKind::NtXent;
    if (s == "mse") return SoftLossKind::Mse;
    throw UsageError("unknown soft loss '" + s + "' (expected ntxent or mse)");
}

// ------------------------------ TrainConfig -----------------------------------

void TrainConfig::validate() const {
    if (hidden < 1) throw UsageError("config: hidden must be positive");
    if (epochs < 1) throw UsageError("config: epochs must be at least 1");
    if (!(tau > 0.0)) throw UsageError("config: tau must be positive");
    if (!(gamma > 0.0)) throw UsageError("config: gamma must be positive");
    if (balance_lr < 0.0 || balance_lr > 1.0)
        throw UsageError("config: balance_lr must lie in [0, 1]");
    if (!(adam_lr > 0.0)) throw UsageError("config: adam_lr must be positive");
    if (weight_decay < 0.0) throw UsageError("config: weight_decay must be nonnegative");
    if (runs < 1) throw UsageError("config: runs must be at least 1");
    if (parallel < 0) throw UsageError("config: parallel must be nonnegative");
    if (fixed_alpha && (*fixed_alpha < 0.0 || *fixed_alpha > 1.0))
        throw UsageError("config: fixed_alpha must lie in [0, 1]");
    if (synth) synth->validate();
}

std::vector<uint64_t> TrainConfig::effective_seeds() const {
    if (!seeds.empty()) return seeds;
    std::vector<uint64_t> out;
    out.reserve(static_cast<size_t>(runs));
    for (int i = 0; i < runs; ++i) out.push_back(seed + static_cast<uint64_t>(i));
    return out;
}

std::string TrainConfig::to_json_string(bool for_hash) const {
    ordered_json j;
    j["backbone"] = to_string(backbone);
    j["hidden"] = hidden;
    j["adam_lr"] = adam_lr;
    j["weight_decay"] = weight_decay;
    j["epochs"] = epochs;
    j["tau"] = tau;
    j["gamma"] = gamma;
    j["balance_lr"] = balance_lr;
    j["with_sensitive"] = with_sensitive;
    j["use_sim_head"] = use_sim_head;
    j["soft_loss"] = to_string(soft_loss);
    if (fixed_alpha) j["fixed_alpha"] = *fixed_alpha;
    j["seed"] = seed;
    j["runs"] = runs;
    if (!seeds.empty()) j["seeds"] = seeds;
    j["sensitive_attribute"] = sensitive_attribute;
    j["eval_attributes"] = eval_attributes;
    j["edge_file"] = edge_file;
    j["attribute_file"] = attribute_file;
    j["meta_file"] = meta_file;
    if (synth) {
        ordered_json s;
        s["num_nodes"] = synth->num_nodes;
        s["attr_dim"] = synth->attr_dim;
        s["homophily"] = synth->homophily;
        s["correlation"] = synth->correlation;
        s["leak_columns"] = synth->leak_columns;
        s["signal_strength"] = synth->signal_strength;
        s["group_offset"] = synth->group_offset;
        s["neighbor_mixing"] = synth->neighbor_mixing;
        s["intra_edge_prob"] = synth->intra_edge_prob;
        s["inter_edge_prob"] = synth->inter_edge_prob;
        s["train_ratio"] = synth->train_ratio;
        s["val_ratio"] = synth->val_ratio;
        s["test_ratio"] = synth->test_ratio;
        j["synth"] = s;
    }
    j["synth_per_seed"] = synth_per_seed;
    if (!for_hash) {
        j["out_dir"] = out_dir;
        j["parallel"] = parallel;
        j["config_hash"] = config_hash();
        j["version"] = std::string(kVersion);
    }
    return j.dump(2) + "\n";
}

std::string TrainConfig::config_hash() const {
    return hex64(fnv1a(to_json_string(true)));
}

namespace {

SynthParams synth_from_json(const json& s) {
    static const std::vector<std::string> known = {
        "num_nodes",      "attr_dim",        "homophily",     "correlation",
        "leak_columns",   "signal_strength", "group_offset",  "neighbor_mixing",
        "intra_edge_prob", "inter_edge_prob", "mean_degree",  "train_ratio",
        "val_ratio",      "test_ratio"};
    for (auto it = s.begin(); it != s.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw UsageError("config: unknown synth key '" + it.key() + "'");
    SynthParams p = SynthParams::biased(s.value("num_nodes", 2000), s.value("attr_dim", 16),
                                        s.value("homophily", 0.9), s.value("correlation", 0.6),
                                        s.value("mean_degree", 10.0));
    p.leak_columns = s.value("leak_columns", p.leak_columns);
    p.signal_strength = s.value("signal_strength", p.signal_strength);
    p.group_offset = s.value("group_offset", p.group_offset);
    p.neighbor_mixing = s.value("neighbor_mixing", p.neighbor_mixing);
    if (s.contains("intra_edge_prob")) p.intra_edge_prob = s.at("intra_edge_prob").get<double>();
    if (s.contains("inter_edge_prob")) p.inter_edge_prob = s.at("inter_edge_prob").get<double>();
    p.train_ratio = s.value("train_ratio", p.train_ratio);
    p.val_ratio = s.value("val_ratio", p.val_ratio);
    p.test_ratio = s.value("test_ratio", p.test_ratio);
    return p;
}

} // namespace

TrainConfig TrainConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw UsageError("config file " + path + ": " + e.what());
    }
    static const std::vector<std::string> known = {
        "backbone",   "hidden",        "adam_lr",       "weight_decay",   "epochs",
        "tau",        "gamma",         "balance_lr",    "with_sensitive", "use_sim_head",
        "soft_loss",  "fixed_alpha",   "seed",          "runs",           "seeds",
        "sensitive_attribute", "eval_attributes",       "edge_file",      "attribute_file",
        "meta_file",  "synth",         "synth_per_seed", "out_dir",       "parallel",
        "config_hash", "version"}; // informational echoes in snapshots
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw UsageError("config file " + path + ": unknown key '" + it.key() + "'");
    TrainConfig c;
    if (j.contains("backbone")) c.backbone = backbone_from_string(j.at("backbone").get<std::string>());
    c.hidden = j.value("hidden", c.hidden);
    c.adam_lr = j.value("adam_lr", c.adam_lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.tau = j.value("tau", c.tau);
    c.gamma = j.value("gamma", c.gamma);
    c.balance_lr = j.value("balance_lr", c.balance_lr);
    c.with_sensitive = j.value("with_sensitive", c.with_sensitive);
    c.use_sim_head = j.value("use_sim_head", c.use_sim_head);
    if (j.contains("soft_loss")) c.soft_loss = soft_loss_from_string(j.at("soft_loss").get<std::string>());
    if (j.contains("fixed_alpha") && !j.at("fixed_alpha").is_null())
        c.fixed_alpha = j.at("fixed_alpha").get<double>();
    c.seed = j.value("seed", c.seed);
    c.runs = j.value("runs", c.runs);
    if (j.contains("seeds"))
        for (const auto& s : j.at("seeds")) c.seeds.push_back(s.get<uint64_t>());
    c.sensitive_attribute = j.value("sensitive_attribute", c.sensitive_attribute);
    if (j.contains("eval_attributes"))
        for (const auto& a : j.at("eval_attributes")) c.eval_attributes.push_back(a.get<std::string>());
    c.edge_file = j.value("edge_file", c.edge_file);
    c.attribute_file = j.value("attribute_file", c.attribute_file);
    c.meta_file = j.value("meta_file", c.meta_file);
    if (j.contains("synth")) c.synth = synth_from_json(j.at("synth"));
    c.synth_per_seed = j.value("synth_per_seed", c.synth_per_seed);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.parallel = j.value("parallel", c.parallel);
    c.validate();
    return c;
}

std::string resolve_strip_column(const TrainConfig& cfg, const Graph& g) {
    if (cfg.with_sensitive) return "";
    if (g.sensitive.empty()) throw DataError("graph has no sensitive attributes");
    const std::string name =
        cfg.sensitive_attribute.empty() ? g.sensitive.front().name : cfg.sensitive_attribute;
    const SensitiveAttr& attr = g.sensitive_by_name(name);
    return attr.column >= 0 ? name : "";
}

std::vector<std::string> resolve_eval_attributes(const TrainConfig& cfg, const Graph& g) {
    if (!cfg.eval_attributes.empty()) {
        for (const auto& name : cfg.eval_attributes) g.sensitive_by_name(name);
        return cfg.eval_attributes;
    }
    std::vector<std::string> out;
    for (const auto& s : g.sensitive) out.push_back(s.name);
    return out;
}

// ------------------------------ fit_supervised --------------------------------

namespace {

std::vector<std::vector<double>> snapshot_params(const std::vector<Tensor>& params) {
    std::vector<std::vector<double>> snap;
    snap.reserve(params.size());
    for (const Tensor& p : params) snap.emplace_back(p.data().begin(), p.data().end());
    return snap;
}

void restore_params(std::vector<Tensor>& params, const std::vector<std::vector<double>>& snap) {
    for (size_t i = 0; i < params.size(); ++i) params[i].assign_values(snap[i]);
}

double validation_accuracy(const Tensor& logits, const Graph& g) {
    if (g.splits.val.empty()) return 0.0;
    return accuracy(StudentNet::predictions(logits), g.labels, g.splits.val);
}

} // namespace

FitResult fit_supervised(const std::function<Tensor()>& logits_fn, std::vector<Tensor> params,
                         const Graph& g, const TrainConfig& cfg, const std::string& stage) {
    if (g.splits.train.empty()) throw TrainError(stage + ": empty train split");
    Adam opt(params, {cfg.adam_lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    FitResult res;
    res.best_val_acc = -1.0;
    const bool select = !g.splits.val.empty();
    std::vector<std::vector<double>> best;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Tape tape;
        Tape::Scope scope(tape);
        opt.zero_grad();
        Tensor logits = logits_fn();
        Tensor loss = bce(sigmoid(logits), g.labels, g.splits.train);
        const double lv = loss.item();
        if (!std::isfinite(lv))
            throw TrainError(stage + ": training diverged at epoch " + std::to_string(epoch) +
                             " (loss " + std::to_string(lv) + ")");
        const double val = validation_accuracy(logits, g);
        if (select && val > res.best_val_acc) {
            res.best_val_acc = val;
            res.best_epoch = epoch;
            best = snapshot_params(params);
        }
        res.rows.push_back({epoch, lv, val});
        backward(loss);
        opt.step();
    }
    if (select) {
        restore_params(params, best);
    } else {
        res.best_epoch = cfg.epochs - 1;
        res.best_val_acc = 0.0;
    }
    return res;
}

// ------------------------------ expert stages ---------------------------------

ExpertBundle train_experts(const Graph& g, const TrainConfig& cfg, uint64_t seed) {
    const std::string strip = resolve_strip_column(cfg, g);
    const ViewData nodes_view = materialize(make_view(g, ViewKind::NodesOnly, strip));
    const ViewData topo_view = materialize(make_view(g, ViewKind::TopologyOnly, strip));

    ExpertBundle bundle;
    {
        Rng rng(derive_seed(seed, "attr_expert"));
        bundle.attr_expert = AttributeExpert(nodes_view.attrs.cols(), cfg.hidden, rng);
        Linear head(cfg.hidden, 1, rng); // temporary, discarded after training
        auto params = bundle.attr_expert.parameters();
        for (auto& p : head.parameters()) params.push_back(p);
        bundle.attr_fit = fit_supervised(
            [&] { return head.forward(relu(bundle.attr_expert.representation(nodes_view))); },
            params, g, cfg, "attribute expert");
    }
    {
        Rng rng(derive_seed(seed, "struct_expert"));
        bundle.struct_expert = StructureExpert(topo_view.attrs.cols(), cfg.hidden, rng);
        Linear head(cfg.hidden, 1, rng);
        auto params = bundle.struct_expert.parameters();
        for (auto& p : head.parameters()) params.push_back(p);
        bundle.struct_fit = fit_supervised(
            [&] { return head.forward(relu(bundle.struct_expert.representation(topo_view))); },
            params, g, cfg, "structure expert");
    }
    bundle.attr_expert.freeze();
    bundle.struct_expert.freeze();
    return bundle;
}

ReferenceResult train_reference(const Graph& g, const TrainConfig& cfg, uint64_t seed) {
    const std::string strip = resolve_strip_column(cfg, g);
    const ViewData full_view = materialize(make_view(g, ViewKind::Full, strip));
    Rng rng(derive_seed(seed, "reference"));
    ReferenceResult res{StudentNet(cfg.backbone, full_view.attrs.cols(), cfg.hidden, rng), {}};
    res.fit = fit_supervised([&] { return res.model.forward(full_view).second; },
                             res.model.parameters(), g, cfg, "reference");
    res.model.freeze();
    return res;
}

namespace {

double mean_row_cosine(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (int i = 0; i < a.rows(); ++i) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (int j = 0; j < a.cols(); ++j) {
            dot += a(i, j) * b(i, j);
            na += a(i, j) * a(i, j);
            nb += b(i, j) * b(i, j);
        }
        const double denom = std::sqrt(na) * std::sqrt(nb);
        acc += denom > 0.0 ? dot / denom : 0.0;
    }
    return acc / a.rows();
}

} // namespace

ProjectorResult train_projector(const AttributeExpert& attr_expert,
                                const StructureExpert& struct_expert, const StudentNet& reference,
                                const Graph& g, const TrainConfig& cfg, uint64_t seed) {
    if (!attr_expert.frozen() || !struct_expert.frozen() || !reference.frozen())
        throw ContractError("train_projector: experts and reference must be frozen");
    const std::string strip = resolve_strip_column(cfg, g);
    const ViewData nodes_view = materialize(make_view(g, ViewKind::NodesOnly, strip));
    const ViewData topo_view = materialize(make_view(g, ViewKind::TopologyOnly, strip));
    const ViewData full_view = materialize(make_view(g, ViewKind::Full, strip));

    // expert and reference representations are fixed for the whole stage
    Tensor attr_rep, struct_rep, ref_rep;
    {
        Tape::Scope pure(nullptr);
        attr_rep = attr_expert.representation(nodes_view).detached_copy();
        struct_rep = struct_expert.representation(topo_view).detached_copy();
        ref_rep = reference.representation(full_view).detached_copy();
    }

    Rng rng(derive_seed(seed, "projector"));
    ProjectorResult res{FusionProjector(cfg.hidden, cfg.hidden, rng), {}};
    ContrastiveConfig ccfg{cfg.tau, std::nullopt};
    auto params = res.projector.parameters();
    if (cfg.use_sim_head) {
        Rng head_rng(derive_seed(seed, "projector_sim_head"));
        ccfg.sim_head = Linear(cfg.hidden, cfg.hidden, head_rng);
        for (auto& p : ccfg.sim_head->parameters()) params.push_back(p);
    }
    Adam opt(params, {cfg.adam_lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Tape tape;
        Tape::Scope scope(tape);
        opt.zero_grad();
        Tensor fused = res.projector.fuse(attr_rep, struct_rep);
        // the mse mode replaces the contrastive objective wholesale; it is
        // the low-memory fallback for graphs where n^2 similarities do not fit
        Tensor loss = cfg.soft_loss == SoftLossKind::NtXent ? nt_xent(fused, ref_rep, ccfg)
                                                            : mse_loss(fused, ref_rep);
        const double lv = loss.item();
        if (!std::isfinite(lv))
            throw TrainError("projector: training diverged at epoch " + std::to_string(epoch));
        res.rows.push_back({epoch, lv, mean_row_cosine(fused, ref_rep)});
        backward(loss);
        opt.step();
    }
    res.projector.freeze();
    return res;
}

// ------------------------------ distillation ----------------------------------

DistillResult distill_student(const SyntheticTeacher& teacher, const Graph& g,
                              const TrainConfig& cfg, uint64_t seed) {
    const std::string strip = resolve_strip_column(cfg, g);
    const ViewData nodes_view = materialize(make_view(g, ViewKind::NodesOnly, strip));
    const ViewData topo_view = materialize(make_view(g, ViewKind::TopologyOnly, strip));
    const ViewData full_view = materialize(make_view(g, ViewKind::Full, strip));
    // default mode: the sensitive column must be gone from the student input
    if (!strip.empty() && full_view.attrs.cols() != g.attr_dim() - 1)
        throw ContractError("distill_student: sensitive column leaked into the student input");

    // teacher knowledge, computed once before the loop
    Tensor teacher_rep;
    {
        Tape::Scope pure(nullptr);
        teacher_rep = teacher.representation(nodes_view, topo_view).detached_copy();
    }

    Rng rng(derive_seed(seed, "student"));
    DistillResult res;
    res.student = StudentNet(cfg.backbone, full_view.attrs.cols(), cfg.hidden, rng);

    if (cfg.fixed_alpha && *cfg.fixed_alpha == 1.0) {
        // pure hard loss: identical to vanilla supervised training
        FitResult fit =
            fit_supervised([&] { return res.student.forward(full_view).second; },
                           res.student.parameters(), g, cfg, "student");
        res.best_epoch = fit.best_epoch;
        res.best_val_acc = fit.best_val_acc;
        for (const FitRow& r : fit.rows)
            res.rows.push_back({r.epoch, r.loss, 0.0, 1.0, 0.0, r.val_acc});
        return res;
    }

    ContrastiveConfig ccfg{cfg.tau, std::nullopt};
    auto params = res.student.parameters();
    if (cfg.use_sim_head) {
        Rng head_rng(derive_seed(seed, "student_sim_head"));
        ccfg.sim_head = Linear(cfg.hidden, cfg.hidden, head_rng);
        for (auto& p : ccfg.sim_head->parameters()) params.push_back(p);
    }
    Adam opt(params, {cfg.adam_lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    LossBalancer balancer(cfg.balance_lr, cfg.gamma);
    const bool select = !g.splits.val.empty();
    res.best_val_acc = -1.0;
    std::vector<std::vector<double>> best;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Tape tape;
        Tape::Scope scope(tape);
        opt.zero_grad();
        auto [rep, logits] = res.student.forward(full_view);
        Tensor loss_hard = bce(sigmoid(logits), g.labels, g.splits.train);
        Tensor loss_soft = cfg.soft_loss == SoftLossKind::NtXent
                               ? nt_xent(rep, teacher_rep, ccfg)
                               : mse_loss(rep, teacher_rep);
        const double hard = loss_hard.item();
        const double soft = loss_soft.item();
        if (!std::isfinite(hard) || !std::isfinite(soft))
            throw TrainError("student: training diverged at epoch " + std::to_string(epoch));
        double alpha, beta;
        if (cfg.fixed_alpha) {
            alpha = *cfg.fixed_alpha;
            beta = 1.0 - alpha;
        } else {
            std::tie(alpha, beta) = balancer.coefficients(epoch, hard, soft);
        }
        if (!(alpha >= 0.0 && alpha <= 1.0) || alpha + beta != 1.0)
            throw TrainError("student: coefficient invariant violated at epoch " +
                             std::to_string(epoch));
        const double val = validation_accuracy(logits, g);
        if (select && val > res.best_val_acc) {
            res.best_val_acc = val;
            res.best_epoch = epoch;
            best = snapshot_params(params);
        }
        res.rows.push_back({epoch, hard, soft, alpha, beta, val});
        Tensor total = combine_losses(loss_hard, loss_soft, alpha, beta);
        backward(total);
        opt.step();
    }
    if (select) {
        restore_params(params, best);
    } else {
        res.best_epoch = cfg.epochs - 1;
        res.best_val_acc = 0.0;
    }
    return res;
}

// ----------------------------- multi-seed runs --------------------------------

namespace {

void parallel_over_seeds(const std::vector<uint64_t>& seeds, int workers,
                         const std::function<void(size_t, uint64_t)>& body) {
    const size_t n = seeds.size();
    size_t threads = workers > 0 ? static_cast<size_t>(workers)
                                 : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (size_t i = 0; i < n; ++i) body(i, seeds[i]);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    body(i, seeds[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace

Graph obtain_graph(const TrainConfig& cfg, uint64_t seed) {
    if (cfg.synth) return generate_synthetic(*cfg.synth, seed);
    if (!cfg.has_dataset_files())
        throw UsageError("config names neither dataset files nor a synthetic recipe");
    if (cfg.meta_file.empty()) throw UsageError("config: meta_file is required with dataset files");
    return load_dataset(cfg.edge_file, cfg.attribute_file, DatasetMeta::from_json_file(cfg.meta_file));
}

MetricsReport run_baseline(const Graph& g, ViewKind strategy, const TrainConfig& cfg) {
    cfg.validate();
    const auto seeds = cfg.effective_seeds();
    std::vector<RunRecord> records(seeds.size());
    parallel_over_seeds(seeds, cfg.parallel, [&](size_t i, uint64_t seed) {
        Graph world;
        const Graph* graph = &g;
        if (cfg.synth && cfg.synth_per_seed) {
            world = generate_synthetic(*cfg.synth, seed);
            graph = &world;
        }
        const std::string strip = resolve_strip_column(cfg, *graph);
        const ViewData view = materialize(make_view(*graph, strategy, strip));
        Rng rng(derive_seed(seed, "student"));
        StudentNet net(cfg.backbone, view.attrs.cols(), cfg.hidden, rng);
        fit_supervised([&] { return net.forward(view).second; }, net.parameters(), *graph, cfg,
                       to_string(strategy) + " baseline");
        records[i] = evaluate_on_view(net, *graph, view, resolve_eval_attributes(cfg, *graph));
        records[i].seed = seed;
        records[i].strategy = to_string(strategy);
    });
    return aggregate_runs(records, to_string(strategy), cfg.config_hash());
}

// ----------------------------- artifact output --------------------------------

void atomic_write_file(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write " + tmp);
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw DataError("write failed for " + tmp);
    }
    fs::rename(tmp, path);
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fit_rows_csv(const std::vector<FitRow>& rows) {
    std::string out = "epoch,loss,val_acc\n";
    for (const auto& r : rows)
        out += std::to_string(r.epoch) + "," + format_double(r.loss) + "," +
               format_double(r.val_acc) + "\n";
    return out;
}

std::string projector_rows_csv(const std::vector<ProjectorRow>& rows) {
    std::string out = "epoch,loss,mean_pos_cosine\n";
    for (const auto& r : rows)
        out += std::to_string(r.epoch) + "," + format_double(r.loss) + "," +
               format_double(r.mean_pos_cosine) + "\n";
    return out;
}

std::string student_rows_csv(const std::vector<StudentRow>& rows) {
    std::string out = "epoch,loss_hard,loss_soft,alpha,beta,val_acc\n";
    for (const auto& r : rows)
        out += std::to_string(r.epoch) + "," + format_double(r.loss_hard) + "," +
               format_double(r.loss_soft) + "," + format_double(r.alpha) + "," +
               format_double(r.beta) + "," + format_double(r.val_acc) + "\n";
    return out;
}

void save_named_tensors(const std::string& path,
                        const std::vector<std::pair<std::string, Tensor>>& tensors) {
    std::ostringstream out(std::ios::binary);
    const char magic[4] = {'F', 'G', 'K', 'T'};
    out.write(magic, 4);
    const uint32_t count = static_cast<uint32_t>(tensors.size());
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const auto& [name, t] : tensors) {
        const uint32_t len = static_cast<uint32_t>(name.size());
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(name.data(), len);
        write_tensor(out, t);
    }
    atomic_write_file(path, out.str());
}

std::vector<std::pair<std::string, Tensor>> named_params(const std::string& prefix,
                                                         const std::vector<Tensor>& params) {
    std::vector<std::pair<std::string, Tensor>> out;
    for (size_t i = 0; i < params.size(); ++i)
        out.emplace_back(prefix + "." + std::to_string(i), params[i]);
    return out;
}

std::string tensor_bytes(const Tensor& t) {
    std::ostringstream out(std::ios::binary);
    write_tensor(out, t);
    return out.str();
}

struct SeedOutput {
    RunRecord record;
    int best_epoch = 0;
    double best_val_acc = 0.0;
};

SeedOutput run_one_seed(const TrainConfig& cfg, const Graph& g, uint64_t seed,
                        const std::string& seed_dir) {
    const ExpertBundle experts = train_experts(g, cfg, seed);
    const ReferenceResult reference = train_reference(g, cfg, seed);
    const ProjectorResult projector =
        train_projector(experts.attr_expert, experts.struct_expert, reference.model, g, cfg, seed);
    SyntheticTeacher teacher{experts.attr_expert, experts.struct_expert, projector.projector};
    DistillResult distilled = distill_student(teacher, g, cfg, seed);

    const std::string strip = resolve_strip_column(cfg, g);
    SeedOutput out;
    out.record = evaluate_multi_sensitive(distilled.student, g, resolve_eval_attributes(cfg, g),
                                          strip);
    out.record.seed = seed;
    out.record.strategy = "fairgkd";
    out.best_epoch = distilled.best_epoch;
    out.best_val_acc = distilled.best_val_acc;

    if (!seed_dir.empty()) {
        fs::create_directories(seed_dir + "/checkpoints");
        fs::create_directories(seed_dir + "/logs");
        fs::create_directories(seed_dir + "/embeddings");

        save_named_tensors(seed_dir + "/checkpoints/attr_expert.bin",
                           named_params("attr_expert", experts.attr_expert.parameters()));
        save_named_tensors(seed_dir + "/checkpoints/struct_expert.bin",
                           named_params("struct_expert", experts.struct_expert.parameters()));
        save_named_tensors(seed_dir + "/checkpoints/projector.bin",
                           named_params("projector", projector.projector.parameters()));
        save_named_tensors(seed_dir + "/checkpoints/reference.bin",
                           named_params("reference", reference.model.parameters()));
        distilled.student.save(seed_dir + "/checkpoints/student.ckpt");

        atomic_write_file(seed_dir + "/logs/attr_expert.csv", fit_rows_csv(experts.attr_fit.rows));
        atomic_write_file(seed_dir + "/logs/struct_expert.csv",
                          fit_rows_csv(experts.struct_fit.rows));
        atomic_write_file(seed_dir + "/logs/reference.csv", fit_rows_csv(reference.fit.rows));
        atomic_write_file(seed_dir + "/logs/projector.csv", projector_rows_csv(projector.rows));
        atomic_write_file(seed_dir + "/logs/student.csv", student_rows_csv(distilled.rows));

        // embedding dumps: teacher knowledge and the selected student backbone
        Tape::Scope pure(nullptr);
        const ViewData nodes_view = materialize(make_view(g, ViewKind::NodesOnly, strip));
        const ViewData topo_view = materialize(make_view(g, ViewKind::TopologyOnly, strip));
        const ViewData full_view = materialize(make_view(g, ViewKind::Full, strip));
        atomic_write_file(seed_dir + "/embeddings/teacher.bin",
                          tensor_bytes(teacher.representation(nodes_view, topo_view)));
        atomic_write_file(seed_dir + "/embeddings/student.bin",
                          tensor_bytes(distilled.student.representation(full_view)));

        ordered_json manifest;
        manifest["seed"] = seed;
        manifest["config_hash"] = cfg.config_hash();
        manifest["version"] = std::string(kVersion);
        manifest["backbone"] = to_string(cfg.backbone);
        manifest["hidden"] = cfg.hidden;
        manifest["input_dim"] = full_view.attrs.cols();
        manifest["strip_column"] = strip;
        manifest["best_epoch"] = distilled.best_epoch;
        manifest["best_val_acc"] = distilled.best_val_acc;
        atomic_write_file(seed_dir + "/manifest.json", manifest.dump(2) + "\n");

        MetricsReport single = aggregate_runs({out.record}, "fairgkd", cfg.config_hash());
        atomic_write_file(seed_dir + "/metrics.json", single.to_json_string());
    }
    return out;
}

} // namespace

ExperimentResult run_experiment(const TrainConfig& cfg, const Graph& g) {
    cfg.validate();
    const auto seeds = cfg.effective_seeds();
    const bool persist = !cfg.out_dir.empty();
    if (persist) {
        fs::create_directories(cfg.out_dir);
        atomic_write_file(cfg.out_dir + "/config.json", cfg.to_json_string(false));
    }
    std::vector<RunRecord> records(seeds.size());
    parallel_over_seeds(seeds, cfg.parallel, [&](size_t i, uint64_t seed) {
        Graph world;
        const Graph* graph = &g;
        if (cfg.synth && cfg.synth_per_seed) {
            world = generate_synthetic(*cfg.synth, seed);
            graph = &world;
        }
        const std::string seed_dir =
            persist ? cfg.out_dir + "/seed_" + std::to_string(seed) : std::string();
        records[i] = run_one_seed(cfg, *graph, seed, seed_dir).record;
    });
    ExperimentResult result;
    result.report = aggregate_runs(records, "fairgkd", cfg.config_hash());
    if (persist) {
        atomic_write_file(cfg.out_dir + "/metrics.json", result.report.to_json_string());
        atomic_write_file(cfg.out_dir + "/summary.csv",
                          MetricsReport::summary_header() + "\n" + result.report.summary_row());
        result.out_dir = cfg.out_dir;
    }
    return result;
}

ExperimentResult run_experiment(const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.synth && cfg.synth_per_seed) {
        // worlds are regenerated per seed; the template graph is unused
        Graph placeholder = generate_synthetic(*cfg.synth, cfg.effective_seeds().front());
        return run_experiment(cfg, placeholder);
    }
    const Graph g = obtain_graph(cfg, cfg.seed);
    return run_experiment(cfg, g);
}

} // namespace fairgkd
