#include "pepr/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pepr/kernels.hpp"

namespace pepr {
namespace {

int scaled_width(int base, double factor) {
    return std::max(1, static_cast<int>(std::llround(base * factor)));
}

void check_labels_in_distribution(const std::vector<int>& labels, const char* where) {
    for (int y : labels) {
        if (y < 0) {
            throw DataError(std::string(where) + ": OOD label (-1) must not reach training");
        }
    }
}

}  // namespace

int GroupScheme::total_width() const {
    int w = 0;
    for (int s : group_size) w += s + 1;
    return w;
}

GroupScheme GroupScheme::contiguous(int num_classes, int groups) {
    if (num_classes < 1) throw ConfigError("group scheme: need at least one class");
    if (groups < 1 || groups > num_classes) {
        throw ConfigError("group scheme: group count must be in [1, classes]");
    }
    GroupScheme s;
    s.num_classes = num_classes;
    s.group_of.resize(num_classes);
    s.index_in_group.resize(num_classes);
    const int base = num_classes / groups;
    const int extra = num_classes % groups;  // first `extra` groups get one more
    int cls = 0, offset = 0;
    for (int g = 0; g < groups; ++g) {
        const int size = base + (g < extra ? 1 : 0);
        s.group_size.push_back(size);
        s.group_offset.push_back(offset);
        s.group_width.push_back(size + 1);
        for (int i = 0; i < size; ++i, ++cls) {
            s.group_of[cls] = g;
            s.index_in_group[cls] = i;
        }
        offset += size + 1;
    }
    return s;
}

int GroupScheme::default_group_count(int num_classes) {
    return std::max(1, static_cast<int>(std::llround(num_classes / 8.0)));
}

Network build_embedder(int input_dim, const TrainConfig& cfg, std::uint64_t init_seed,
                       std::uint64_t dropout_seed, int* embed_dim_out) {
    if (cfg.width_factor <= 0.0) throw ConfigError("width factor must be positive");
    const int w1 = scaled_width(512, cfg.width_factor);
    const int w2 = scaled_width(256, cfg.width_factor);
    Rng init(init_seed);
    Network net(dropout_seed);
    net.add(std::make_unique<DenseLayer>(input_dim, w1, init));
    net.add(std::make_unique<EluLayer>());
    net.add(std::make_unique<BatchNormLayer>(w1, cfg.bn_eps, cfg.bn_momentum));
    net.add(std::make_unique<DropoutLayer>(cfg.dropout_rate));
    net.add(std::make_unique<DenseLayer>(w1, w1, init));
    net.add(std::make_unique<EluLayer>());
    net.add(std::make_unique<BatchNormLayer>(w1, cfg.bn_eps, cfg.bn_momentum));
    net.add(std::make_unique<DropoutLayer>(cfg.dropout_rate));
    net.add(std::make_unique<DenseLayer>(w1, w2, init));
    net.add(std::make_unique<EluLayer>());
    net.add(std::make_unique<BatchNormLayer>(w2, cfg.bn_eps, cfg.bn_momentum));
    if (embed_dim_out) *embed_dim_out = w2;
    return net;
}

Network build_regressor(int yhat_width, int embed_dim, const TrainConfig& cfg,
                        std::uint64_t init_seed) {
    if (cfg.width_factor <= 0.0) throw ConfigError("width factor must be positive");
    const int w1 = scaled_width(512, cfg.width_factor);
    const int w2 = scaled_width(256, cfg.width_factor);
    Rng init(init_seed);
    Network net(derive_seed(init_seed, 0x5eed));
    net.add(std::make_unique<DenseLayer>(yhat_width, w1, init));
    net.add(std::make_unique<TanhLayer>());
    net.add(std::make_unique<DenseLayer>(w1, w2, init));
    net.add(std::make_unique<TanhLayer>());
    net.add(std::make_unique<DenseLayer>(w2, embed_dim, init));
    net.add(std::make_unique<LeakyReluLayer>(0.1));
    net.snapshot_anchors();
    return net;
}

PeprModel build_pepr_model(int input_dim, int num_classes, const std::optional<GroupScheme>& scheme,
                           const TrainConfig& cfg, int num_regressors) {
    if (input_dim < 1) throw ConfigError("model: input dim must be positive");
    if (num_classes < 2) throw ConfigError("model: need at least two classes");
    if (num_regressors < 0) throw ConfigError("model: regressor count must be >= 0");
    PeprModel m;
    m.input_dim = input_dim;
    m.num_classes = num_classes;
    m.width_factor = cfg.width_factor;
    m.grouped = scheme.has_value();
    if (m.grouped) m.scheme = *scheme;

    m.embedder = build_embedder(input_dim, cfg, derive_seed(cfg.seed, 1), derive_seed(cfg.seed, 3),
                                &m.embed_dim);
    const int head_width = m.grouped ? m.scheme.total_width() : num_classes;
    Rng head_init(derive_seed(cfg.seed, 2));
    m.head = Network();
    m.head.add(std::make_unique<DenseLayer>(m.embed_dim, head_width, head_init));

    m.regressors.reserve(num_regressors);
    for (int j = 0; j < num_regressors; ++j) {
        m.regressors.push_back(
            build_regressor(m.yhat_width(), m.embed_dim, cfg, derive_seed(cfg.seed, 100 + j)));
    }
    return m;
}

Matrix grouped_forward(const Matrix& logits, const GroupScheme& scheme) {
    if (logits.cols != scheme.total_width()) {
        throw ConfigError("grouped softmax: logit width " + std::to_string(logits.cols) +
                          " != scheme width " + std::to_string(scheme.total_width()));
    }
    Matrix y(logits.rows, logits.cols);
    kern::grouped_row_softmax(logits.v.data(), y.v.data(), logits.rows, logits.cols,
                              scheme.group_offset.data(), scheme.group_width.data(),
                              scheme.groups());
    return y;
}

LossGrad grouped_cross_entropy(const Matrix& logits, const std::vector<int>& targets,
                               const GroupScheme& scheme) {
    if (static_cast<int>(targets.size()) != logits.rows) {
        throw ConfigError("grouped cross-entropy: target count != batch size");
    }
    const int n = logits.rows;
    LossGrad out;
    out.grad = grouped_forward(logits, scheme);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const int cls = targets[i];
        if (cls < 0 || cls >= scheme.num_classes) {
            throw DataError("grouped cross-entropy: unknown class " + std::to_string(cls));
        }
        const int true_group = scheme.group_of[cls];
        for (int g = 0; g < scheme.groups(); ++g) {
            const int slot = g == true_group ? scheme.class_slot(cls) : scheme.others_slot(g);
            loss -= std::log(std::max(out.grad.at(i, slot), 1e-300));
            out.grad.at(i, slot) -= 1.0;
        }
    }
    const double inv_n = 1.0 / n;
    for (double& g : out.grad.v) g *= inv_n;
    out.loss = loss * inv_n;
    return out;
}

std::vector<int> predict_classes(const Matrix& yhat, const PeprModel& model) {
    std::vector<int> out(yhat.rows);
    if (!model.grouped) {
        for (int i = 0; i < yhat.rows; ++i) {
            const double* row = yhat.row(i);
            out[i] = static_cast<int>(std::max_element(row, row + yhat.cols) - row);
        }
        return out;
    }
    const GroupScheme& s = model.scheme;
    for (int i = 0; i < yhat.rows; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        int best_cls = 0;
        for (int c = 0; c < s.num_classes; ++c) {
            const double p = yhat.at(i, s.class_slot(c));
            if (p > best) {
                best = p;
                best_cls = c;
            }
        }
        out[i] = best_cls;
    }
    return out;
}

EvalOutputs embed_and_classify(const PeprModel& model, const Matrix& x) {
    EvalOutputs out;
    out.z = model.embedder.eval(x);
    out.logits = model.head.eval(out.z);
    if (model.grouped) {
        out.yhat = grouped_forward(out.logits, model.scheme);
    } else {
        out.yhat = Matrix(out.logits.rows, out.logits.cols);
        kern::row_softmax(out.logits.v.data(), out.yhat.v.data(), out.logits.rows,
                          out.logits.cols);
    }
    return out;
}

double classification_accuracy(const PeprModel& model, const Matrix& x,
                               const std::vector<int>& labels) {
    if (x.rows == 0) return 0.0;
    constexpr int kChunk = 512;
    int correct = 0;
    for (int start = 0; start < x.rows; start += kChunk) {
        const int n = std::min(kChunk, x.rows - start);
        Matrix chunk(n, x.cols);
        std::copy(x.row(start), x.row(start) + static_cast<std::size_t>(n) * x.cols,
                  chunk.v.data());
        const EvalOutputs eo = embed_and_classify(model, chunk);
        const std::vector<int> pred = predict_classes(eo.yhat, model);
        for (int i = 0; i < n; ++i) {
            if (pred[i] == labels[start + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / x.rows;
}

PeprModel train_run(const TrainData& data, const TrainConfig& cfg, TrainLog* log) {
    if (data.train_x.rows == 0) throw DataError("training set is empty");
    check_labels_in_distribution(data.train_y, "train split");
    check_labels_in_distribution(data.val_y, "val split");
    if (static_cast<int>(data.train_y.size()) != data.train_x.rows) {
        throw DataError("train labels/features row mismatch");
    }

    int num_classes = 0;
    for (int y : data.train_y) num_classes = std::max(num_classes, y + 1);

    std::optional<GroupScheme> scheme;
    if (cfg.grouped) {
        const int g = cfg.group_count > 0 ? cfg.group_count
                                          : GroupScheme::default_group_count(num_classes);
        scheme = GroupScheme::contiguous(num_classes, g);
    }
    PeprModel model = build_pepr_model(data.train_x.cols, num_classes, scheme, cfg,
                                       cfg.num_regressors);

    auto cls_params = model.embedder.params();
    {
        auto hp = model.head.params();
        cls_params.insert(cls_params.end(), hp.begin(), hp.end());
    }
    std::vector<std::vector<Param*>> reg_params;
    for (auto& reg : model.regressors) reg_params.push_back(reg.params());

    Rng batch_rng(derive_seed(cfg.seed, 0xD474));
    const int batch = std::min(cfg.batch_size, data.train_x.rows);
    Matrix bx(batch, data.train_x.cols);
    std::vector<int> by(batch);

    long long step_count = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg.base_lr, cfg.epochs);
        double cls_loss_sum = 0.0, reg_loss_sum = 0.0;
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            ++step_count;
            for (int i = 0; i < batch; ++i) {
                const auto r = static_cast<int>(
                    batch_rng.uniform_int(static_cast<std::uint64_t>(data.train_x.rows)));
                std::copy(data.train_x.row(r), data.train_x.row(r) + data.train_x.cols, bx.row(i));
                by[i] = data.train_y[r];
            }

            // (1) classification step
            const Matrix z = model.embedder.forward(bx, Mode::train);
            const Matrix logits = model.head.forward(z, Mode::train);
            LossGrad cls = model.grouped ? grouped_cross_entropy(logits, by, model.scheme)
                                         : softmax_cross_entropy(logits, by);
            if (!std::isfinite(cls.loss)) {
                throw TrainingDiverged("classification loss became non-finite at step " +
                                       std::to_string(step_count));
            }
            cls_loss_sum += cls.loss;
            model.embedder.zero_grad();
            model.head.zero_grad();
            const Matrix dz = model.head.backward(cls.grad);
            model.embedder.backward(dz);
            adam_step(cls_params, lr, step_count, cfg.adam);

            // (2) regressor step on the detached (yhat, z) pair; nothing here
            // touches the classifier state.
            if (!model.regressors.empty()) {
                Matrix yhat;
                if (model.grouped) {
                    yhat = grouped_forward(logits, model.scheme);
                } else {
                    yhat = Matrix(logits.rows, logits.cols);
                    kern::row_softmax(logits.v.data(), yhat.v.data(), logits.rows, logits.cols);
                }
                for (std::size_t j = 0; j < model.regressors.size(); ++j) {
                    Network& reg = model.regressors[j];
                    const Matrix zhat = reg.forward(yhat, Mode::train);
                    reg.zero_grad();
                    const AnchoredLossResult al =
                        anchored_mse_loss(zhat, z, reg_params[j], cfg.gamma_anc);
                    if (!std::isfinite(al.loss)) {
                        throw TrainingDiverged("regressor loss became non-finite at step " +
                                               std::to_string(step_count));
                    }
                    reg_loss_sum += al.loss;
                    reg.backward(al.dzhat);
                    adam_step(reg_params[j], lr, step_count, cfg.adam);
                }
            }
        }
        if (log) {
            EpochLog el;
            el.epoch = epoch;
            el.cls_loss = cls_loss_sum / cfg.steps_per_epoch;
            el.reg_loss = model.regressors.empty()
                              ? std::numeric_limits<double>::quiet_NaN()
                              : reg_loss_sum / (cfg.steps_per_epoch *
                                                static_cast<double>(model.regressors.size()));
            el.lr = lr;
            el.val_accuracy = data.val_x.rows > 0
                                  ? classification_accuracy(model, data.val_x, data.val_y)
                                  : std::numeric_limits<double>::quiet_NaN();
            log->epochs.push_back(el);
        }
    }
    return model;
}

PeprModel train_pepr(const TrainData& data, const TrainConfig& cfg, TrainLog* log) {
    TrainConfig c = cfg;
    c.num_regressors = 1;
    return train_run(data, c, log);
}

PeprModel train_ensemble(const TrainData& data, const TrainConfig& cfg, int m, TrainLog* log) {
    if (m < 1) throw ConfigError("ensemble: need at least one regressor");
    TrainConfig c = cfg;
    c.num_regressors = m;
    return train_run(data, c, log);
}

}  // namespace pepr
