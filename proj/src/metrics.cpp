#include "fairgkd/metrics.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fairgkd {

namespace {

void check_mask(std::span<const int> mask, size_t n, const char* who) {
    if (mask.empty()) throw MetricError(std::string(who) + ": empty mask");
    for (int idx : mask)
        if (idx < 0 || static_cast<size_t>(idx) >= n)
            throw MetricError(std::string(who) + ": mask index out of range");
}

} // namespace

double delta_dp(std::span<const int8_t> preds, std::span<const int8_t> sens,
                std::span<const int> mask) {
    if (preds.size() != sens.size()) throw MetricError("delta_dp: length mismatch");
    check_mask(mask, preds.size(), "delta_dp");
    long count[2] = {0, 0};
    long positive[2] = {0, 0};
    for (int idx : mask) {
        const int g = sens[static_cast<size_t>(idx)];
        ++count[g];
        positive[g] += preds[static_cast<size_t>(idx)] == 1;
    }
    if (count[0] == 0 || count[1] == 0)
        throw MetricError("delta_dp: a demographic group is empty within the mask");
    const double rate0 = static_cast<double>(positive[0]) / static_cast<double>(count[0]);
    const double rate1 = static_cast<double>(positive[1]) / static_cast<double>(count[1]);
    return std::abs(rate0 - rate1) * 100.0;
}

double delta_eo(std::span<const int8_t> preds, std::span<const int8_t> labels,
                std::span<const int8_t> sens, std::span<const int> mask) {
    if (preds.size() != labels.size() || preds.size() != sens.size())
        throw MetricError("delta_eo: length mismatch");
    check_mask(mask, preds.size(), "delta_eo");
    long count[2] = {0, 0};
    long positive[2] = {0, 0};
    for (int idx : mask) {
        if (labels[static_cast<size_t>(idx)] != 1) continue;
        const int g = sens[static_cast<size_t>(idx)];
        ++count[g];
        positive[g] += preds[static_cast<size_t>(idx)] == 1;
    }
    if (count[0] == 0 || count[1] == 0)
        throw MetricError("delta_eo: a demographic group has no positive labels within the mask");
    const double tpr0 = static_cast<double>(positive[0]) / static_cast<double>(count[0]);
    const double tpr1 = static_cast<double>(positive[1]) / static_cast<double>(count[1]);
    return std::abs(tpr0 - tpr1) * 100.0;
}

double accuracy(std::span<const int8_t> preds, std::span<const int8_t> labels,
                std::span<const int> mask) {
    if (preds.size() != labels.size()) throw MetricError("accuracy: length mismatch");
    check_mask(mask, preds.size(), "accuracy");
    long correct = 0;
    for (int idx : mask)
        correct += preds[static_cast<size_t>(idx)] == labels[static_cast<size_t>(idx)];
    return static_cast<double>(correct) / static_cast<double>(mask.size()) * 100.0;
}

double f1_score(std::span<const int8_t> preds, std::span<const int8_t> labels,
                std::span<const int> mask) {
    if (preds.size() != labels.size()) throw MetricError("f1_score: length mismatch");
    check_mask(mask, preds.size(), "f1_score");
    long tp = 0, pred_pos = 0, actual_pos = 0;
    for (int idx : mask) {
        const bool p = preds[static_cast<size_t>(idx)] == 1;
        const bool y = labels[static_cast<size_t>(idx)] == 1;
        pred_pos += p;
        actual_pos += y;
        tp += p && y;
    }
    if (tp == 0) return pred_pos == 0 && actual_pos == 0 ? 100.0 : 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(pred_pos);
    const double recall = static_cast<double>(tp) / static_cast<double>(actual_pos);
    return 2.0 * precision * recall / (precision + recall) * 100.0;
}

// ------------------------------- reports --------------------------------------

namespace {

Aggregate aggregate_values(const std::vector<double>& values) {
    Aggregate a;
    const bool all_equal =
        std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); });
    if (all_equal) {
        a.mean = values.front();
        return a; // exact: identical runs report zero spread
    }
    for (double v : values) a.mean += v;
    a.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double acc = 0.0;
        for (double v : values) {
            const double d = v - a.mean;
            acc += d * d;
        }
        a.stddev = std::sqrt(acc / static_cast<double>(values.size() - 1));
    }
    return a;
}

} // namespace

MetricsReport aggregate_runs(const std::vector<RunRecord>& runs, const std::string& strategy,
                             const std::string& config_hash) {
    if (runs.empty()) throw MetricError("aggregate: no runs");
    for (const auto& r : runs) {
        if (r.fairness.size() != runs.front().fairness.size())
            throw MetricError("aggregate: heterogeneous fairness structure");
        for (size_t k = 0; k < r.fairness.size(); ++k)
            if (r.fairness[k].attribute != runs.front().fairness[k].attribute)
                throw MetricError("aggregate: fairness attributes differ between runs");
    }
    MetricsReport rep;
    rep.strategy = strategy;
    rep.config_hash = config_hash;
    rep.runs = runs;
    std::vector<double> accs, f1s;
    for (const auto& r : runs) {
        accs.push_back(r.acc);
        f1s.push_back(r.f1);
    }
    rep.acc = aggregate_values(accs);
    rep.f1 = aggregate_values(f1s);
    for (size_t k = 0; k < runs.front().fairness.size(); ++k) {
        rep.attributes.push_back(runs.front().fairness[k].attribute);
        std::vector<double> dps, eos;
        for (const auto& r : runs) {
            dps.push_back(r.fairness[k].dp);
            eos.push_back(r.fairness[k].eo);
        }
        rep.dp.push_back(aggregate_values(dps));
        rep.eo.push_back(aggregate_values(eos));
    }
    return rep;
}

std::string MetricsReport::to_json_string() const {
    nlohmann::ordered_json j;
    j["strategy"] = strategy;
    j["config_hash"] = config_hash;
    j["version"] = std::string(kVersion);
    j["num_runs"] = runs.size();
    auto agg = [](const Aggregate& a) {
        nlohmann::ordered_json o;
        o["mean"] = a.mean;
        o["std"] = a.stddev;
        return o;
    };
    j["accuracy"] = agg(acc);
    j["f1"] = agg(f1);
    j["fairness"] = nlohmann::ordered_json::array();
    for (size_t k = 0; k < attributes.size(); ++k) {
        nlohmann::ordered_json o;
        o["attribute"] = attributes[k];
        o["delta_dp"] = agg(dp[k]);
        o["delta_eo"] = agg(eo[k]);
        j["fairness"].push_back(o);
    }
    j["per_run"] = nlohmann::ordered_json::array();
    for (const auto& r : runs) {
        nlohmann::ordered_json o;
        o["seed"] = r.seed;
        o["accuracy"] = r.acc;
        o["f1"] = r.f1;
        o["fairness"] = nlohmann::ordered_json::array();
        for (const auto& f : r.fairness) {
            nlohmann::ordered_json fo;
            fo["attribute"] = f.attribute;
            fo["delta_dp"] = f.dp;
            fo["delta_eo"] = f.eo;
            o["fairness"].push_back(fo);
        }
        j["per_run"].push_back(o);
    }
    return j.dump(2) + "\n";
}

std::string MetricsReport::summary_header() {
    return "strategy\tconfig_hash\truns\tacc_mean\tacc_std\tf1_mean\tf1_std\tattribute\tdp_mean\tdp_std\teo_mean\teo_std";
}

std::string MetricsReport::summary_row() const {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        os << "\t" << buf;
    };
    std::string rows;
    for (size_t k = 0; k < attributes.size(); ++k) {
        os.str("");
        os << strategy << "\t" << config_hash << "\t" << runs.size();
        num(acc.mean);
        num(acc.stddev);
        num(f1.mean);
        num(f1.stddev);
        os << "\t" << attributes[k];
        num(dp[k].mean);
        num(dp[k].stddev);
        num(eo[k].mean);
        num(eo[k].stddev);
        rows += os.str();
        rows += "\n";
    }
    return rows;
}

RunRecord evaluate_on_view(const StudentNet& model, const Graph& g, const ViewData& view,
                           const std::vector<std::string>& attribute_names) {
    for (const auto& name : attribute_names)
        if (!g.has_sensitive(name))
            throw MetricError("evaluate: unknown sensitive attribute '" + name + "'");
    Tape::Scope pure(nullptr);
    const auto [rep, logits] = model.forward(view);
    const auto preds = StudentNet::predictions(logits);

    RunRecord rec;
    rec.acc = accuracy(preds, g.labels, g.splits.test);
    rec.f1 = f1_score(preds, g.labels, g.splits.test);
    for (const auto& name : attribute_names) {
        const auto& attr = g.sensitive_by_name(name);
        FairnessBlock block;
        block.attribute = name;
        block.dp = delta_dp(preds, attr.values, g.splits.test);
        block.eo = delta_eo(preds, g.labels, attr.values, g.splits.test);
        rec.fairness.push_back(std::move(block));
    }
    return rec;
}

RunRecord evaluate_multi_sensitive(const StudentNet& model, const Graph& g,
                                   const std::vector<std::string>& attribute_names,
                                   const std::string& strip_column) {
    return evaluate_on_view(model, g, materialize(make_view(g, ViewKind::Full, strip_column)),
                            attribute_names);
}

} // namespace fairgkd
