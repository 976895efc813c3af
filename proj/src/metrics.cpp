#include "pepr/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>

#include "pepr/util.hpp"

namespace pepr {
namespace {

void require_nonempty(const LabeledScores& ls, const char* what) {
    if (ls.in_dist.empty() || ls.ood.empty()) {
        throw DataError(std::string(what) + ": both score arrays must be non-empty");
    }
    for (double s : ls.in_dist) {
        if (!std::isfinite(s)) throw DataError(std::string(what) + ": non-finite score");
    }
    for (double s : ls.ood) {
        if (!std::isfinite(s)) throw DataError(std::string(what) + ": non-finite score");
    }
}

}  // namespace

double auroc(const LabeledScores& ls) {
    require_nonempty(ls, "auroc");
    struct Entry {
        double score;
        bool in_dist;
    };
    std::vector<Entry> pool;
    pool.reserve(ls.in_dist.size() + ls.ood.size());
    for (double s : ls.in_dist) pool.push_back({s, true});
    for (double s : ls.ood) pool.push_back({s, false});
    std::sort(pool.begin(), pool.end(),
              [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // Average ranks over tie groups, then the Mann-Whitney identity.
    double rank_sum_in = 0.0;
    std::size_t i = 0;
    while (i < pool.size()) {
        std::size_t j = i;
        while (j < pool.size() && pool[j].score == pool[i].score) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) {
            if (pool[k].in_dist) rank_sum_in += avg_rank;
        }
        i = j;
    }
    const double n_in = static_cast<double>(ls.in_dist.size());
    const double n_ood = static_cast<double>(ls.ood.size());
    const double u = rank_sum_in - n_in * (n_in + 1.0) / 2.0;
    return u / (n_in * n_ood);
}

double aupr(const LabeledScores& ls) {
    require_nonempty(ls, "aupr");
    struct Entry {
        double score;
        bool in_dist;
    };
    std::vector<Entry> pool;
    pool.reserve(ls.in_dist.size() + ls.ood.size());
    for (double s : ls.in_dist) pool.push_back({s, true});
    for (double s : ls.ood) pool.push_back({s, false});
    std::sort(pool.begin(), pool.end(),
              [](const Entry& a, const Entry& b) { return a.score > b.score; });

    const double positives = static_cast<double>(ls.in_dist.size());
    double tp = 0.0, fp = 0.0, recall_prev = 0.0, ap = 0.0;
    std::size_t i = 0;
    while (i < pool.size()) {
        std::size_t j = i;
        while (j < pool.size() && pool[j].score == pool[i].score) ++j;
        for (std::size_t k = i; k < j; ++k) {
            if (pool[k].in_dist) {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
        }
        const double recall = tp / positives;
        const double precision = tp / (tp + fp);
        ap += precision * (recall - recall_prev);
        recall_prev = recall;
        i = j;
    }
    return ap;
}

double fpr_at_tpr(const LabeledScores& ls, double tpr_target) {
    require_nonempty(ls, "fpr_at_tpr");
    if (tpr_target < 0.0 || tpr_target > 1.0) {
        throw ConfigError("fpr_at_tpr: target must be in [0,1]");
    }
    const std::size_t n_in = ls.in_dist.size();
    const auto k = static_cast<std::size_t>(
        std::ceil(tpr_target * static_cast<double>(n_in) - 1e-12));
    if (k == 0) return 0.0;  // tau = +inf keeps every OOD example out

    std::vector<double> in_sorted = ls.in_dist;
    std::sort(in_sorted.begin(), in_sorted.end(), std::greater<>());
    const double tau = in_sorted[k - 1];  // largest tau with TPR >= target

    std::size_t fp = 0;
    for (double s : ls.ood) {
        if (s >= tau) ++fp;
    }
    return static_cast<double>(fp) / static_cast<double>(ls.ood.size());
}

std::vector<SummaryRow> summarize(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw DataError("summarize: no records");

    std::set<std::string> datasets;
    std::set<std::uint64_t> seeds;
    std::set<std::string> methods;
    std::map<std::string, std::map<std::uint64_t, std::map<std::string, const EvalRecord*>>> grid;
    for (const EvalRecord& r : records) {
        datasets.insert(r.dataset);
        seeds.insert(r.seed);
        methods.insert(r.method);
        const EvalRecord*& cell = grid[r.method][r.seed][r.dataset];
        if (cell != nullptr) {
            throw DataError("summarize: duplicate record for (" + r.method + ", " + r.dataset +
                            ", seed " + std::to_string(r.seed) + ")");
        }
        cell = &r;
    }

    std::string gaps;
    for (const std::string& m : methods) {
        for (std::uint64_t s : seeds) {
            for (const std::string& d : datasets) {
                if (grid[m][s].find(d) == grid[m][s].end()) {
                    gaps += " (" + m + ", " + d + ", seed " + std::to_string(s) + ")";
                }
            }
        }
    }
    if (!gaps.empty()) throw DataError("summarize: missing cells:" + gaps);

    std::vector<SummaryRow> out;
    const char* metric_names[3] = {"auroc", "aupr", "fpr95"};
    for (const std::string& m : methods) {
        std::vector<std::array<double, 3>> seed_means;
        for (std::uint64_t s : seeds) {
            std::array<double, 3> acc{0.0, 0.0, 0.0};
            for (const std::string& d : datasets) {
                const EvalRecord* r = grid[m][s][d];
                acc[0] += r->auroc;
                acc[1] += r->aupr;
                acc[2] += r->fpr95;
            }
            const double inv = 1.0 / static_cast<double>(datasets.size());
            seed_means.push_back({acc[0] * inv, acc[1] * inv, acc[2] * inv});
        }
        const auto n = static_cast<double>(seed_means.size());
        for (int k = 0; k < 3; ++k) {
            double mean = 0.0;
            for (const auto& sm : seed_means) mean += sm[k];
            mean /= n;
            double sigma = 0.0;
            if (seed_means.size() > 1) {
                double ss = 0.0;
                for (const auto& sm : seed_means) ss += (sm[k] - mean) * (sm[k] - mean);
                sigma = std::sqrt(ss / (n - 1.0));
            }
            out.push_back({m, metric_names[k], mean, sigma});
        }
    }
    return out;
}

}  // namespace pepr
