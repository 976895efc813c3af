#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pepr/nn.hpp"

namespace pepr {

// Partition of C classes into G groups. Each group's logit block has one slot
// per member class plus a trailing "others" slot, so the block is |c_g|+1 wide.
struct GroupScheme {
    int num_classes = 0;
    std::vector<int> group_of;        // class -> group
    std::vector<int> index_in_group;  // class -> slot within its group block
    std::vector<int> group_size;      // member classes per group (others excluded)
    std::vector<int> group_offset;    // block start within the concatenated logits
    std::vector<int> group_width;     // group_size + 1

    int groups() const { return static_cast<int>(group_size.size()); }
    int total_width() const;
    int others_slot(int g) const { return group_offset[g] + group_size[g]; }
    int class_slot(int c) const { return group_offset[group_of[c]] + index_in_group[c]; }

    // Contiguous even split of class indices; remainder spread one per group.
    static GroupScheme contiguous(int num_classes, int groups);
    // Mirrors 8-class groups: max(1, round(C / 8)).
    static int default_group_count(int num_classes);
};

struct TrainConfig {
    int epochs = 10;
    int steps_per_epoch = 1000;
    int batch_size = 512;
    double base_lr = 0.0003;
    double gamma_anc = 0.03;
    std::uint64_t seed = 1;
    bool grouped = true;
    int group_count = 0;  // 0 -> GroupScheme::default_group_count
    double width_factor = 1.0;
    int num_regressors = 1;
    AdamConfig adam;
    double bn_eps = 1e-5;
    double bn_momentum = 0.99;
    double dropout_rate = 0.1;
};

// Embedder + classifier head + anchored regressors. The regressors read the
// head's probabilities and predict the embedding; no gradient ever crosses
// back from them into the embedder or head.
struct PeprModel {
    int input_dim = 0;
    int num_classes = 0;
    int embed_dim = 0;
    double width_factor = 1.0;
    bool grouped = false;
    GroupScheme scheme;  // meaningful when grouped
    Network embedder;
    Network head;
    std::vector<Network> regressors;

    int yhat_width() const { return grouped ? scheme.total_width() : num_classes; }
};

// dense(d -> 512f) elu, bn, dropout; dense(-> 512f) elu, bn, dropout;
// dense(-> 256f) elu, bn. Widths scale with width_factor (min 1).
Network build_embedder(int input_dim, const TrainConfig& cfg, std::uint64_t init_seed,
                       std::uint64_t dropout_seed, int* embed_dim_out);

// dense(-> 512f) tanh, dense(-> 256f) tanh, dense(-> embed_dim), leaky-relu(0.1);
// anchors snapshotted at initialization.
Network build_regressor(int yhat_width, int embed_dim, const TrainConfig& cfg,
                        std::uint64_t init_seed);

PeprModel build_pepr_model(int input_dim, int num_classes, const std::optional<GroupScheme>& scheme,
                           const TrainConfig& cfg, int num_regressors);

// Per-group softmax over the concatenated logit blocks.
Matrix grouped_forward(const Matrix& logits, const GroupScheme& scheme);

// Sum over groups of that group's cross-entropy, averaged over the batch. The
// true class's group targets the class slot; every other group targets its
// "others" slot.
LossGrad grouped_cross_entropy(const Matrix& logits, const std::vector<int>& targets,
                               const GroupScheme& scheme);

// Class prediction for accuracy logging: argmax over all non-"others"
// probabilities (grouped) or plain argmax (flat).
std::vector<int> predict_classes(const Matrix& yhat, const PeprModel& model);

struct EvalOutputs {
    Matrix z;
    Matrix yhat;
    Matrix logits;
};

EvalOutputs embed_and_classify(const PeprModel& model, const Matrix& x);

struct EpochLog {
    int epoch = 0;
    double cls_loss = 0.0;
    double reg_loss = 0.0;  // NaN when the model has no regressors
    double lr = 0.0;
    double val_accuracy = 0.0;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
};

struct TrainData {
    Matrix train_x;
    std::vector<int> train_y;
    Matrix val_x;
    std::vector<int> val_y;
};

// Interleaved per step: (1) classification forward/backward/update on the
// embedder+head, (2) regressor updates against the detached (yhat, z) pair
// from that same train-mode forward.
PeprModel train_run(const TrainData& data, const TrainConfig& cfg, TrainLog* log = nullptr);

// num_regressors forced to 1.
PeprModel train_pepr(const TrainData& data, const TrainConfig& cfg, TrainLog* log = nullptr);

// One embedder+head, m independently seeded/anchored regressors.
PeprModel train_ensemble(const TrainData& data, const TrainConfig& cfg, int m,
                         TrainLog* log = nullptr);

double classification_accuracy(const PeprModel& model, const Matrix& x,
                               const std::vector<int>& labels);

}  // namespace pepr
