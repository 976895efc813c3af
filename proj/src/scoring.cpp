#include "pepr/scoring.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>

#include "pepr/kernels.hpp"

namespace pepr {
namespace {

constexpr double kLogFloor = 1e-12;

std::atomic<std::uint64_t> g_klm_comparisons{0};

double kl_divergence(const double* p, const double* q, int n) {
    double kl = 0.0;
    for (int i = 0; i < n; ++i) {
        kl += p[i] * std::log(std::max(p[i], kLogFloor) / std::max(q[i], kLogFloor));
    }
    return kl;
}

}  // namespace

std::vector<double> score_pepr(const Matrix& yhat, const Network& regressor) {
    if (yhat.cols != regressor.in_dim()) {
        throw ConfigError("pepr score: yhat width " + std::to_string(yhat.cols) +
                          " != regressor input " + std::to_string(regressor.in_dim()));
    }
    const Matrix zhat = regressor.eval(yhat);
    std::vector<double> out(static_cast<std::size_t>(zhat.rows));
    kern::row_mean_relu_sq(zhat.v.data(), zhat.rows, zhat.cols, out.data());
    return out;
}

std::vector<double> score_epow(const Matrix& z, double psi) {
    std::vector<double> out(static_cast<std::size_t>(z.rows));
    kern::row_mean_sq(z.v.data(), z.rows, z.cols, out.data());
    for (double& s : out) s *= psi;
    return out;
}

std::vector<double> score_cpepr(const Matrix& yhat, const Matrix& z, const Network& regressor,
                                double psi) {
    std::vector<double> pepr = score_pepr(yhat, regressor);
    const std::vector<double> epow = score_epow(z, psi);
    for (std::size_t i = 0; i < pepr.size(); ++i) pepr[i] += epow[i];
    return pepr;
}

std::vector<double> score_msp(const Matrix& yhat_flat) {
    std::vector<double> out(static_cast<std::size_t>(yhat_flat.rows));
    for (int i = 0; i < yhat_flat.rows; ++i) {
        const double* row = yhat_flat.row(i);
        double sum = 0.0, mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < yhat_flat.cols; ++j) {
            sum += row[j];
            mx = std::max(mx, row[j]);
        }
        if (std::abs(sum - 1.0) > 1e-4) {
            throw DataError("msp: row " + std::to_string(i) + " is not a probability simplex (sum " +
                            std::to_string(sum) + ")");
        }
        out[i] = mx;
    }
    return out;
}

std::vector<double> score_max_logit(const Matrix& logits) {
    std::vector<double> out(static_cast<std::size_t>(logits.rows));
    for (int i = 0; i < logits.rows; ++i) {
        const double* row = logits.row(i);
        out[i] = *std::max_element(row, row + logits.cols);
    }
    return out;
}

KlmTemplates fit_klm_templates(const Matrix& yhat_train, const std::vector<int>& labels,
                               int num_classes) {
    if (static_cast<int>(labels.size()) != yhat_train.rows) {
        throw ConfigError("klm templates: label count != row count");
    }
    std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
    Matrix sums(num_classes, yhat_train.cols);
    for (int i = 0; i < yhat_train.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= num_classes) {
            throw DataError("klm templates: label " + std::to_string(y) +
                            " outside [0," + std::to_string(num_classes) + ")");
        }
        ++counts[y];
        for (int j = 0; j < yhat_train.cols; ++j) sums.at(y, j) += yhat_train.at(i, j);
    }
    KlmTemplates t;
    for (int c = 0; c < num_classes; ++c) {
        if (counts[c] == 0) {
            ++t.skipped_classes;
            std::cerr << "warning: klm templates: class " << c
                      << " has no training examples, omitted\n";
            continue;
        }
        t.class_ids.push_back(c);
    }
    t.means = Matrix(static_cast<int>(t.class_ids.size()), yhat_train.cols);
    for (int r = 0; r < t.means.rows; ++r) {
        const int c = t.class_ids[r];
        const double inv = 1.0 / counts[c];
        for (int j = 0; j < t.means.cols; ++j) t.means.at(r, j) = sums.at(c, j) * inv;
    }
    return t;
}

std::vector<double> score_klm(const Matrix& yhat, const KlmTemplates& templates) {
    if (templates.means.rows == 0) throw ConfigError("klm: no fitted templates");
    if (yhat.cols != templates.means.cols) throw ConfigError("klm: width mismatch");
    std::vector<double> out(static_cast<std::size_t>(yhat.rows));
    // Each example is compared against every template: dataset-level cost
    // grows with (class count)^2 when examples scale with classes.
#pragma omp parallel for schedule(static) if (yhat.rows > 64)
    for (int i = 0; i < yhat.rows; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < templates.means.rows; ++r) {
            best = std::min(best, kl_divergence(yhat.row(i), templates.means.row(r), yhat.cols));
        }
        out[i] = -best;
    }
    g_klm_comparisons.fetch_add(static_cast<std::uint64_t>(yhat.rows) *
                                static_cast<std::uint64_t>(templates.means.rows));
    return out;
}

std::vector<double> score_mos(const Matrix& yhat_grouped, const GroupScheme& scheme) {
    if (yhat_grouped.cols != scheme.total_width()) {
        throw ConfigError("mos: expected grouped probabilities of width " +
                          std::to_string(scheme.total_width()) + ", got " +
                          std::to_string(yhat_grouped.cols));
    }
    std::vector<double> out(static_cast<std::size_t>(yhat_grouped.rows));
    for (int i = 0; i < yhat_grouped.rows; ++i) {
        double lowest = std::numeric_limits<double>::infinity();
        for (int g = 0; g < scheme.groups(); ++g) {
            lowest = std::min(lowest, yhat_grouped.at(i, scheme.others_slot(g)));
        }
        out[i] = -lowest;
    }
    return out;
}

std::vector<double> ensemble_score(const std::vector<std::vector<double>>& members) {
    if (members.empty()) throw ConfigError("ensemble score: no members");
    const std::size_t n = members.front().size();
    for (const auto& m : members) {
        if (m.size() != n) throw ConfigError("ensemble score: member length mismatch");
    }
    std::vector<double> out(n, 0.0);
    for (const auto& m : members) {
        for (std::size_t i = 0; i < n; ++i) out[i] += m[i];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (double& s : out) s *= inv;
    return out;
}

std::vector<int> threshold_detector(const std::vector<double>& scores, double threshold) {
    std::vector<int> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= threshold ? 1 : 0;
    return out;
}

std::uint64_t klm_comparison_count() { return g_klm_comparisons.load(); }

void reset_klm_comparison_count() { g_klm_comparisons.store(0); }

}  // namespace pepr
