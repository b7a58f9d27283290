#pragma once

#include "fairgkd/graph.hpp"
#include "fairgkd/models.hpp"

#include <span>
#include <string>
#include <vector>

namespace fairgkd {

// All four scalar metrics are percentages in [0, 100], computed over the
// masked nodes only. Undefined situations raise MetricError instead of
// returning a sentinel zero.

/// |P(pred=1 | s=0) - P(pred=1 | s=1)| * 100. Both groups must be nonempty
/// within the mask.
double delta_dp(std::span<const int8_t> preds, std::span<const int8_t> sens,
                std::span<const int> mask);

/// |TPR(s=0) - TPR(s=1)| * 100. Both groups must contain a positive label
/// within the mask.
double delta_eo(std::span<const int8_t> preds, std::span<const int8_t> labels,
                std::span<const int8_t> sens, std::span<const int> mask);

double accuracy(std::span<const int8_t> preds, std::span<const int8_t> labels,
                std::span<const int> mask);

/// 2PR/(P+R) * 100; 100 when predictions and labels are both all-negative,
/// 0 when there are no true positives otherwise.
double f1_score(std::span<const int8_t> preds, std::span<const int8_t> labels,
                std::span<const int> mask);

struct FairnessBlock {
    std::string attribute;
    double dp = 0.0;
    double eo = 0.0;
};

/// One trained model evaluated once; fairness per sensitive attribute from a
/// single set of predictions.
struct RunRecord {
    uint64_t seed = 0;
    std::string strategy;
    double acc = 0.0;
    double f1 = 0.0;
    std::vector<FairnessBlock> fairness;
};

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0; // sample (n-1) convention; 0 for a single run
};

struct MetricsReport {
    std::string strategy;
    std::string config_hash;
    std::vector<RunRecord> runs;
    Aggregate acc;
    Aggregate f1;
    std::vector<std::string> attributes;
    std::vector<Aggregate> dp; // aligned with attributes
    std::vector<Aggregate> eo;

    /// Structured text document with stable key order.
    std::string to_json_string() const;
    /// Flat delimited row: strategy, hash, then mean/std per metric.
    std::string summary_row() const;
    static std::string summary_header();
};

/// Mean and sample standard deviation per metric; all records must share the
/// same fairness structure.
MetricsReport aggregate_runs(const std::vector<RunRecord>& runs, const std::string& strategy,
                             const std::string& config_hash);

/// One forward pass on the given view; fairness for every named attribute
/// from the same predictions. Evaluated on the test split.
RunRecord evaluate_on_view(const StudentNet& model, const Graph& g, const ViewData& view,
                           const std::vector<std::string>& attribute_names);

/// One forward pass on the Full view (strip_column removed from the
/// attributes; empty keeps everything); fairness for every named attribute
/// from the same predictions. Evaluated on the test split.
RunRecord evaluate_multi_sensitive(const StudentNet& model, const Graph& g,
                                   const std::vector<std::string>& attribute_names,
                                   const std::string& strip_column);

} // namespace fairgkd
