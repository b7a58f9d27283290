#pragma once

#include "fairgkd/losses.hpp"
#include "fairgkd/metrics.hpp"
#include "fairgkd/models.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fairgkd {

enum class SoftLossKind { NtXent, Mse };

std::string to_string(SoftLossKind k);
SoftLossKind soft_loss_from_string(const std::string& s);

// ----------------------------------------------------------------------------
// Every knob of a run. Defaults marked "method default" come from the
// published training recipe; the rest are choices of this implementation.
// ----------------------------------------------------------------------------
struct TrainConfig {
    Backbone backbone = Backbone::Gcn;
    int hidden = 16;            // method default
    double adam_lr = 1e-3;      // method default
    double weight_decay = 1e-5; // method default
    int epochs = 1000;          // method default
    double tau = 0.5;           // method default
    double gamma = 0.1;         // method default
    double balance_lr = 1.0;    // method default
    bool with_sensitive = false;
    bool use_sim_head = false;
    SoftLossKind soft_loss = SoftLossKind::NtXent;
    /// Fixed (alpha, 1 - alpha) instead of the adaptive schedule. alpha = 1
    /// degenerates to vanilla supervised training.
    std::optional<double> fixed_alpha;

    uint64_t seed = 0;
    int runs = 1;
    std::vector<uint64_t> seeds; // explicit list; overrides seed/runs

    /// Sensitive attribute the views strip and fairness defaults to; empty
    /// picks the graph's first.
    std::string sensitive_attribute;
    /// Attributes to evaluate fairness on; empty evaluates all of them.
    std::vector<std::string> eval_attributes;

    // dataset source: either the three files or a synthetic recipe
    std::string edge_file;
    std::string attribute_file;
    std::string meta_file;
    std::optional<SynthParams> synth;
    /// Regenerate the synthetic world per training seed (independent trials).
    bool synth_per_seed = true;

    std::string out_dir;
    int parallel = 0; // worker threads for multi-seed runs; 0 = hardware

    void validate() const;
    std::vector<uint64_t> effective_seeds() const;
    bool has_dataset_files() const { return !edge_file.empty(); }

    /// Canonical JSON. Identity fields only when for_hash (no out_dir, no
    /// parallelism), so re-running a config elsewhere keeps its hash.
    std::string to_json_string(bool for_hash) const;
    std::string config_hash() const;
    static TrainConfig from_json_file(const std::string& path);
};

/// Column the views strip under this config, resolved against the graph.
std::string resolve_strip_column(const TrainConfig& cfg, const Graph& g);
/// Attributes fairness is evaluated on.
std::vector<std::string> resolve_eval_attributes(const TrainConfig& cfg, const Graph& g);

// ----------------------------- stage results ---------------------------------

struct FitRow {
    int epoch = 0;
    double loss = 0.0;
    double val_acc = 0.0;
};

struct FitResult {
    int best_epoch = 0;
    double best_val_acc = 0.0;
    std::vector<FitRow> rows;
};

/// Shared supervised loop: full-batch BCE on the train split, Adam, model
/// selection by best validation accuracy (ties keep the earliest epoch).
/// logits_fn must rebuild the forward graph when called under the epoch tape.
FitResult fit_supervised(const std::function<Tensor()>& logits_fn, std::vector<Tensor> params,
                         const Graph& g, const TrainConfig& cfg, const std::string& stage);

struct ExpertBundle {
    AttributeExpert attr_expert;
    StructureExpert struct_expert;
    FitResult attr_fit;
    FitResult struct_fit;
};

/// Trains both fairness experts with temporary linear heads and BCE, then
/// discards the heads and freezes the experts.
ExpertBundle train_experts(const Graph& g, const TrainConfig& cfg, uint64_t seed);

struct ReferenceResult {
    StudentNet model;
    FitResult fit;
};

/// Plain supervised training of the student architecture on the full view;
/// frozen afterwards.
ReferenceResult train_reference(const Graph& g, const TrainConfig& cfg, uint64_t seed);

struct ProjectorRow {
    int epoch = 0;
    double loss = 0.0;
    double mean_pos_cosine = 0.0;
};

struct ProjectorResult {
    FusionProjector projector;
    std::vector<ProjectorRow> rows;
};

/// Trains the fusion projector against the frozen reference embeddings with
/// the contrastive objective; only projector parameters update.
ProjectorResult train_projector(const AttributeExpert& attr_expert,
                                const StructureExpert& struct_expert, const StudentNet& reference,
                                const Graph& g, const TrainConfig& cfg, uint64_t seed);

struct StudentRow {
    int epoch = 0;
    double loss_hard = 0.0;
    double loss_soft = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double val_acc = 0.0;
};

struct DistillResult {
    StudentNet student;
    std::vector<StudentRow> rows;
    int best_epoch = 0;
    double best_val_acc = 0.0;
};

/// Knowledge distillation: the teacher representation is computed once up
/// front, then every epoch optimizes alpha * hard + beta * soft with
/// coefficients from the adaptive schedule (or the configured fixed pair).
/// With a fixed beta of 0 this takes the vanilla code path bit for bit.
DistillResult distill_student(const SyntheticTeacher& teacher, const Graph& g,
                              const TrainConfig& cfg, uint64_t seed);

/// Vanilla supervised run of the student architecture on the chosen view,
/// one per seed, evaluated and aggregated. The Full strategy is the vanilla
/// comparison baseline.
MetricsReport run_baseline(const Graph& g, ViewKind strategy, const TrainConfig& cfg);

// ------------------------------ experiments ----------------------------------

struct SeedArtifacts {
    uint64_t seed = 0;
    RunRecord record;
    DistillResult distill;
};

struct ExperimentResult {
    MetricsReport report;
    std::string out_dir; // empty when nothing was persisted
};

/// Full training sequence per seed (experts, reference, projector, teacher
/// representation, distillation), aggregated across seeds. Persists
/// checkpoints, per-epoch logs, embedding dumps and metric documents under
/// cfg.out_dir when it is set. Seeds run in parallel worker threads with
/// fully disjoint state; outputs do not depend on the thread count.
ExperimentResult run_experiment(const TrainConfig& cfg);
/// Same, on an already materialized graph (ignores the config's dataset
/// source; still honors synth_per_seed when cfg.synth is set).
ExperimentResult run_experiment(const TrainConfig& cfg, const Graph& g);

/// Resolves the configured dataset source into a graph (load or generate).
Graph obtain_graph(const TrainConfig& cfg, uint64_t seed);

// ------------------------------- file io -------------------------------------

/// Write-temp-then-rename so readers never observe partial files.
void atomic_write_file(const std::string& path, const std::string& contents);

} // namespace fairgkd
