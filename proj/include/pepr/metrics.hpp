#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pepr {

// Scores for one (method, dataset) cell; in-distribution is the positive class.
struct LabeledScores {
    std::vector<double> in_dist;
    std::vector<double> ood;
};

struct EvalRecord {
    std::string method;
    std::string dataset;
    std::uint64_t seed = 0;
    double auroc = 0.0;
    double aupr = 0.0;
    double fpr95 = 0.0;
};

// Mean and sample sigma (across seeds) of the per-seed dataset means.
struct SummaryRow {
    std::string method;
    std::string metric;  // "auroc" | "aupr" | "fpr95"
    double mean = 0.0;
    double sigma = 0.0;
};

// Rank-based Mann-Whitney AUROC with tie handling:
// P(S_in > S_ood) + 0.5 * P(S_in = S_ood).
double auroc(const LabeledScores& ls);

// Average precision over descending-score thresholds, ties as one group.
double aupr(const LabeledScores& ls);

// FPR at the largest threshold tau (under the >= rule) with TPR(tau) >= target.
double fpr_at_tpr(const LabeledScores& ls, double tpr_target = 0.95);

// Table-style aggregation: per (method, seed), mean each metric over datasets;
// then mean and sample (n-1) sigma across seeds. Requires a complete grid.
std::vector<SummaryRow> summarize(const std::vector<EvalRecord>& records);

}  // namespace pepr
