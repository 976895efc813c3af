#pragma once

#include <cstdint>
#include <vector>

#include "pepr/model.hpp"
#include "pepr/tensor.hpp"

// In-distribution scoring functions. Every score is oriented so that higher
// means "more in-distribution"; thresholding with >= gives the detector.
namespace pepr {

inline constexpr double kDefaultPsi = 0.01;

// mean_i relu(R(yhat)_i)^2 per example; always >= 0.
std::vector<double> score_pepr(const Matrix& yhat, const Network& regressor);

// Embedding power: psi * mean_i z_i^2.
std::vector<double> score_epow(const Matrix& z, double psi = kDefaultPsi);

// score_pepr + psi * mean_i z_i^2, summed elementwise.
std::vector<double> score_cpepr(const Matrix& yhat, const Matrix& z, const Network& regressor,
                                double psi = kDefaultPsi);

// Max softmax probability; rejects rows that are not a probability simplex.
std::vector<double> score_msp(const Matrix& yhat_flat);

std::vector<double> score_max_logit(const Matrix& logits);

// Per-class mean predicted distribution over training data.
struct KlmTemplates {
    std::vector<int> class_ids;  // classes that had at least one example
    Matrix means;                // one row per retained class
    int skipped_classes = 0;
};

KlmTemplates fit_klm_templates(const Matrix& yhat_train, const std::vector<int>& labels,
                               int num_classes);

// -min_k KL(yhat || d_k), probability floor 1e-12 inside the logs; <= 0.
std::vector<double> score_klm(const Matrix& yhat, const KlmTemplates& templates);

// -min over groups of that group's "others" probability.
std::vector<double> score_mos(const Matrix& yhat_grouped, const GroupScheme& scheme);

// Elementwise mean of member score vectors.
std::vector<double> ensemble_score(const std::vector<std::vector<double>>& members);

// G(x) = 1 iff S(x) >= threshold.
std::vector<int> threshold_detector(const std::vector<double>& scores, double threshold);

// Counts template comparisons made by score_klm; used to pin down the
// cost-per-example contract (one KL evaluation per retained class).
std::uint64_t klm_comparison_count();
void reset_klm_comparison_count();

}  // namespace pepr
