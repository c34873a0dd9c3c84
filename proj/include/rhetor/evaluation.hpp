#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace rhetor {

struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long tn = 0;

    long total() const { return tp + fp + fn + tn; }

    bool operator==(const ConfusionCounts&) const = default;
};

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct SplitConfig {
    int train_size = 15;
    int test_size = 35;
    unsigned seed = 0;
};

enum class NotAddressedPolicy { as_negative, as_error };

class IdMismatch : public std::runtime_error {
public:
    explicit IdMismatch(const std::string& what) : std::runtime_error(what) {}
};

class EmptyEvaluation : public std::runtime_error {
public:
    EmptyEvaluation() : std::runtime_error("no evaluated documents") {}
};

// Predictions and golds are keyed by document id; labels are the wire strings
// ("true" / "false" / "not addressed").
inline ConfusionCounts confusion(const std::map<std::string, std::string>& predictions,
                                 const std::map<std::string, std::string>& golds,
                                 const std::string& positive_label = "true",
                                 NotAddressedPolicy policy = NotAddressedPolicy::as_negative) {
    if (predictions.size() != golds.size())
        throw IdMismatch("prediction and gold sets differ in size: " +
                         std::to_string(predictions.size()) + " vs " +
                         std::to_string(golds.size()));
    ConfusionCounts counts;
    for (const auto& [doc_id, gold] : golds) {
        auto it = predictions.find(doc_id);
        if (it == predictions.end())
            throw IdMismatch("no prediction for document " + doc_id);
        std::string predicted = it->second;
        if (predicted == "not addressed" || predicted == "not_addressed") {
            if (policy == NotAddressedPolicy::as_error)
                throw IdMismatch("document " + doc_id + " predicted \"not addressed\"");
            predicted = positive_label == "true" ? "false" : "true";
        }
        const bool p = predicted == positive_label;
        const bool g = gold == positive_label;
        if (p && g)
            ++counts.tp;
        else if (p && !g)
            ++counts.fp;
        else if (!p && g)
            ++counts.fn;
        else
            ++counts.tn;
    }
    return counts;
}

// Zero-division conventions: an empty prediction/reference class scores 1.0
// when nothing was missed and 0.0 otherwise; F1 is 0.0 when both components
// vanish.
inline Metrics metrics(const ConfusionCounts& counts) {
    if (counts.total() <= 0) throw EmptyEvaluation();
    Metrics m;
    m.accuracy = static_cast<double>(counts.tp + counts.tn) / static_cast<double>(counts.total());
    if (counts.tp + counts.fp > 0)
        m.precision = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fp);
    else
        m.precision = counts.fn == 0 ? 1.0 : 0.0;
    if (counts.tp + counts.fn > 0)
        m.recall = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fn);
    else
        m.recall = counts.fp == 0 ? 1.0 : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

// Expected metrics of a label-flipping baseline: predicts positive with
// probability p against a positive class prior q, independently per item.
inline Metrics expected_random_metrics(double p_positive, double class_prior) {
    if (p_positive < 0.0 || p_positive > 1.0 || class_prior < 0.0 || class_prior > 1.0)
        throw std::invalid_argument("probabilities must lie in [0,1]");
    Metrics m;
    m.accuracy = p_positive * class_prior + (1.0 - p_positive) * (1.0 - class_prior);
    m.precision = class_prior;  // prediction is independent of the gold label
    m.recall = p_positive;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

// Searches the integer confusion matrices with the given size and positive
// count for one whose metrics match the four targets within the tolerance.
inline std::optional<ConfusionCounts> solve_counts_for_metrics(long n, long positives,
                                                               const Metrics& target,
                                                               double tolerance = 0.001) {
    const long negatives = n - positives;
    for (long tp = 0; tp <= positives; ++tp) {
        for (long fp = 0; fp <= negatives; ++fp) {
            const ConfusionCounts counts{tp, fp, positives - tp, negatives - fp};
            const Metrics m = metrics(counts);
            if (std::abs(m.accuracy - target.accuracy) <= tolerance &&
                std::abs(m.precision - target.precision) <= tolerance &&
                std::abs(m.recall - target.recall) <= tolerance &&
                std::abs(m.f1 - target.f1) <= tolerance)
                return counts;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Method comparison report
// ---------------------------------------------------------------------------

struct ReportRow {
    std::string method;
    Metrics metrics;
};

struct Report {
    std::vector<ReportRow> rows;
    long n = 0;
    long positives = 0;

    nlohmann::json to_json() const {
        nlohmann::json rows_j = nlohmann::json::array();
        for (const auto& r : rows)
            rows_j.push_back({{"method", r.method},
                              {"acc", r.metrics.accuracy},
                              {"pre", r.metrics.precision},
                              {"rec", r.metrics.recall},
                              {"f1", r.metrics.f1}});
        return nlohmann::json{{"rows", rows_j}, {"n", n}, {"positives", positives}};
    }

    static Report from_json(const nlohmann::json& j) {
        Report report;
        report.n = j.at("n").get<long>();
        report.positives = j.at("positives").get<long>();
        for (const auto& r : j.at("rows")) {
            ReportRow row;
            row.method = r.at("method").get<std::string>();
            row.metrics.accuracy = r.at("acc").get<double>();
            row.metrics.precision = r.at("pre").get<double>();
            row.metrics.recall = r.at("rec").get<double>();
            row.metrics.f1 = r.at("f1").get<double>();
            report.rows.push_back(std::move(row));
        }
        return report;
    }

    // Plain-text table, three decimals, best value per column starred.
    std::string to_text() const {
        auto fmt = [](double v) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%.3f", v);
            return std::string(buf);
        };
        double best[4] = {-1.0, -1.0, -1.0, -1.0};
        for (const auto& r : rows) {
            best[0] = std::max(best[0], r.metrics.accuracy);
            best[1] = std::max(best[1], r.metrics.precision);
            best[2] = std::max(best[2], r.metrics.recall);
            best[3] = std::max(best[3], r.metrics.f1);
        }
        std::string out = "Method                         ACC      PRE      REC      F1\n";
        for (const auto& r : rows) {
            const double vals[4] = {r.metrics.accuracy, r.metrics.precision, r.metrics.recall,
                                    r.metrics.f1};
            std::string line = r.method;
            line.resize(28, ' ');
            for (int i = 0; i < 4; ++i) {
                std::string cell = fmt(vals[i]);
                cell += std::abs(vals[i] - best[i]) < 5e-4 ? "*" : " ";
                line += " " + cell + "  ";
            }
            while (!line.empty() && line.back() == ' ') line.pop_back();
            out += line + "\n";
        }
        out += "n=" + std::to_string(n) + " positives=" + std::to_string(positives) + "\n";
        return out;
    }
};

inline Report compare(
    const std::vector<std::pair<std::string, std::map<std::string, std::string>>>& per_method,
    const std::map<std::string, std::string>& golds,
    const std::string& positive_label = "true",
    NotAddressedPolicy policy = NotAddressedPolicy::as_negative) {
    if (per_method.empty()) throw std::invalid_argument("compare needs at least one method");
    Report report;
    report.n = static_cast<long>(golds.size());
    for (const auto& [doc_id, gold] : golds)
        if (gold == positive_label) ++report.positives;
    for (const auto& [method, predictions] : per_method) {
        const ConfusionCounts counts = confusion(predictions, golds, positive_label, policy);
        report.rows.push_back({method, metrics(counts)});
    }
    return report;
}

}  // namespace rhetor
