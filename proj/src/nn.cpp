#include "pepr/nn.hpp"

#include <cmath>

#include "pepr/kernels.hpp"

namespace pepr {

Matrix Layer::forward(const Matrix& x, Mode mode, Rng& rng) {
    if (mode == Mode::eval) return eval(x);
    has_cache_ = true;
    return train_forward(x, rng);
}

void Layer::require_cache(const char* kind) const {
    if (!has_cache_) {
        throw ConfigError(std::string(kind) + ": backward without a preceding train-mode forward");
    }
}

// ---------------------------------------------------------------------------
// dense

DenseLayer::DenseLayer(int in, int out, Rng& init_rng) : DenseLayer(in, out) {
    glorot_init(w_.value, in, out, init_rng);
}

DenseLayer::DenseLayer(int in, int out)
    : in_(in), out_(out), w_("w", in, out), b_("b", 1, out) {
    if (in <= 0 || out <= 0) throw ConfigError("dense: dims must be positive");
}

Matrix DenseLayer::eval(const Matrix& x) const {
    if (x.cols != in_) {
        throw ConfigError("dense: input width " + std::to_string(x.cols) + " != " +
                          std::to_string(in_));
    }
    Matrix y(x.rows, out_);
    kern::matmul_nn(x.v.data(), w_.value.v.data(), y.v.data(), x.rows, in_, out_);
    kern::add_row_vector(y.v.data(), b_.value.v.data(), y.rows, y.cols);
    return y;
}

Matrix DenseLayer::train_forward(const Matrix& x, Rng&) {
    x_cache_ = x;
    return eval(x);
}

Matrix DenseLayer::backward(const Matrix& dy) {
    require_cache("dense");
    require_shape(dy, x_cache_.rows, out_, "dense backward");
    kern::matmul_tn_acc(x_cache_.v.data(), dy.v.data(), w_.grad.v.data(), in_, x_cache_.rows, out_);
    kern::col_sum_acc(dy.v.data(), b_.grad.v.data(), dy.rows, dy.cols);
    Matrix dx(dy.rows, in_);
    kern::matmul_nt(dy.v.data(), w_.value.v.data(), dx.v.data(), dy.rows, out_, in_);
    return dx;
}

void DenseLayer::params(std::vector<Param*>& out) {
    out.push_back(&w_);
    out.push_back(&b_);
}

// ---------------------------------------------------------------------------
// activations

Matrix EluLayer::eval(const Matrix& x) const {
    Matrix y(x.rows, x.cols);
    kern::elu_forward(x.v.data(), y.v.data(), x.size());
    return y;
}

Matrix EluLayer::train_forward(const Matrix& x, Rng&) {
    y_cache_ = eval(x);
    return y_cache_;
}

Matrix EluLayer::backward(const Matrix& dy) {
    require_cache("elu");
    Matrix dx(dy.rows, dy.cols);
    kern::elu_backward(y_cache_.v.data(), dy.v.data(), dx.v.data(), dy.size());
    return dx;
}

Matrix TanhLayer::eval(const Matrix& x) const {
    Matrix y(x.rows, x.cols);
    kern::tanh_forward(x.v.data(), y.v.data(), x.size());
    return y;
}

Matrix TanhLayer::train_forward(const Matrix& x, Rng&) {
    y_cache_ = eval(x);
    return y_cache_;
}

Matrix TanhLayer::backward(const Matrix& dy) {
    require_cache("tanh");
    Matrix dx(dy.rows, dy.cols);
    kern::tanh_backward(y_cache_.v.data(), dy.v.data(), dx.v.data(), dy.size());
    return dx;
}

Matrix ReluLayer::eval(const Matrix& x) const {
    Matrix y(x.rows, x.cols);
    kern::relu_forward(x.v.data(), y.v.data(), x.size());
    return y;
}

Matrix ReluLayer::train_forward(const Matrix& x, Rng&) {
    x_cache_ = x;
    return eval(x);
}

Matrix ReluLayer::backward(const Matrix& dy) {
    require_cache("relu");
    Matrix dx(dy.rows, dy.cols);
    kern::relu_backward(x_cache_.v.data(), dy.v.data(), dx.v.data(), dy.size());
    return dx;
}

LeakyReluLayer::LeakyReluLayer(double slope) : slope_(slope) {
    if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("leaky-relu: slope must be in (0,1)");
}

Matrix LeakyReluLayer::eval(const Matrix& x) const {
    Matrix y(x.rows, x.cols);
    kern::leaky_relu_forward(x.v.data(), y.v.data(), x.size(), slope_);
    return y;
}

Matrix LeakyReluLayer::train_forward(const Matrix& x, Rng&) {
    x_cache_ = x;
    return eval(x);
}

Matrix LeakyReluLayer::backward(const Matrix& dy) {
    require_cache("leaky-relu");
    Matrix dx(dy.rows, dy.cols);
    kern::leaky_relu_backward(x_cache_.v.data(), dy.v.data(), dx.v.data(), dy.size(), slope_);
    return dx;
}

// ---------------------------------------------------------------------------
// batch norm

BatchNormLayer::BatchNormLayer(int dim, double eps, double momentum)
    : dim_(dim),
      eps_(eps),
      momentum_(momentum),
      gamma_("scale", 1, dim),
      beta_("shift", 1, dim),
      running_mean_(1, dim, 0.0),
      running_var_(1, dim, 1.0) {
    if (dim <= 0) throw ConfigError("batch-norm: dim must be positive");
    gamma_.value.fill(1.0);
}

Matrix BatchNormLayer::eval(const Matrix& x) const {
    require_shape(x, x.rows, dim_, "batch-norm eval");
    Matrix y(x.rows, dim_);
    for (int j = 0; j < dim_; ++j) {
        const double inv = 1.0 / std::sqrt(running_var_.v[j] + eps_);
        const double g = gamma_.value.v[j];
        const double b = beta_.value.v[j];
        const double m = running_mean_.v[j];
        for (int i = 0; i < x.rows; ++i) y.at(i, j) = (x.at(i, j) - m) * inv * g + b;
    }
    return y;
}

Matrix BatchNormLayer::train_forward(const Matrix& x, Rng&) {
    require_shape(x, x.rows, dim_, "batch-norm train");
    if (x.rows < 2) throw ConfigError("batch-norm: train mode needs batch size >= 2");
    Matrix mean(1, dim_), var(1, dim_);
    kern::feature_mean_var(x.v.data(), x.rows, dim_, mean.v.data(), var.v.data());

    xhat_cache_ = Matrix(x.rows, dim_);
    inv_std_cache_ = Matrix(1, dim_);
    Matrix y(x.rows, dim_);
    for (int j = 0; j < dim_; ++j) {
        const double inv = 1.0 / std::sqrt(var.v[j] + eps_);
        inv_std_cache_.v[j] = inv;
        const double g = gamma_.value.v[j];
        const double b = beta_.value.v[j];
        for (int i = 0; i < x.rows; ++i) {
            const double xh = (x.at(i, j) - mean.v[j]) * inv;
            xhat_cache_.at(i, j) = xh;
            y.at(i, j) = xh * g + b;
        }
        running_mean_.v[j] = momentum_ * running_mean_.v[j] + (1.0 - momentum_) * mean.v[j];
        running_var_.v[j] = momentum_ * running_var_.v[j] + (1.0 - momentum_) * var.v[j];
    }
    return y;
}

Matrix BatchNormLayer::backward(const Matrix& dy) {
    require_cache("batch-norm");
    require_shape(dy, xhat_cache_.rows, dim_, "batch-norm backward");
    const int n = dy.rows;
    Matrix dx(n, dim_);
    for (int j = 0; j < dim_; ++j) {
        const double g = gamma_.value.v[j];
        const double inv = inv_std_cache_.v[j];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int i = 0; i < n; ++i) {
            sum_dy += dy.at(i, j);
            sum_dy_xhat += dy.at(i, j) * xhat_cache_.at(i, j);
        }
        gamma_.grad.v[j] += sum_dy_xhat;
        beta_.grad.v[j] += sum_dy;
        const double scale = g * inv / n;
        for (int i = 0; i < n; ++i) {
            dx.at(i, j) =
                scale * (n * dy.at(i, j) - sum_dy - xhat_cache_.at(i, j) * sum_dy_xhat);
        }
    }
    return dx;
}

void BatchNormLayer::params(std::vector<Param*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
}

// ---------------------------------------------------------------------------
// dropout

DropoutLayer::DropoutLayer(double rate) : rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout: rate must be in [0,1)");
}

Matrix DropoutLayer::eval(const Matrix& x) const { return x; }

Matrix DropoutLayer::train_forward(const Matrix& x, Rng& rng) {
    mask_cache_ = Matrix(x.rows, x.cols);
    const double keep_scale = 1.0 / (1.0 - rate_);
    for (std::size_t i = 0; i < x.size(); ++i) {
        mask_cache_.v[i] = rng.uniform() >= rate_ ? keep_scale : 0.0;
    }
    Matrix y(x.rows, x.cols);
    for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] * mask_cache_.v[i];
    return y;
}

Matrix DropoutLayer::backward(const Matrix& dy) {
    require_cache("dropout");
    Matrix dx(dy.rows, dy.cols);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.v[i] = dy.v[i] * mask_cache_.v[i];
    return dx;
}

// ---------------------------------------------------------------------------
// softmax

Matrix SoftmaxLayer::eval(const Matrix& x) const {
    Matrix y(x.rows, x.cols);
    kern::row_softmax(x.v.data(), y.v.data(), x.rows, x.cols);
    return y;
}

Matrix SoftmaxLayer::train_forward(const Matrix& x, Rng&) {
    y_cache_ = eval(x);
    return y_cache_;
}

Matrix SoftmaxLayer::backward(const Matrix& dy) {
    require_cache("softmax");
    Matrix dx(dy.rows, dy.cols);
    for (int i = 0; i < dy.rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < dy.cols; ++j) dot += dy.at(i, j) * y_cache_.at(i, j);
        for (int j = 0; j < dy.cols; ++j) {
            dx.at(i, j) = y_cache_.at(i, j) * (dy.at(i, j) - dot);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// network

void Network::add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

Matrix Network::forward(const Matrix& x, Mode mode) {
    if (mode == Mode::eval) return eval(x);
    Matrix cur = x;
    for (auto& layer : layers_) {
        cur = layer->forward(cur, Mode::train, rng_);
        if (!all_finite(cur)) {
            throw NumericError("non-finite output from layer '" + layer->kind() + "'");
        }
    }
    has_cache_ = true;
    return cur;
}

Matrix Network::eval(const Matrix& x) const {
    Matrix cur = x;
    for (const auto& layer : layers_) {
        cur = layer->eval(cur);
        if (!all_finite(cur)) {
            throw NumericError("non-finite output from layer '" + layer->kind() + "'");
        }
    }
    return cur;
}

Matrix Network::backward(const Matrix& dy) {
    if (!has_cache_) throw ConfigError("network: backward without a train-mode forward");
    Matrix cur = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        cur = (*it)->backward(cur);
        if (!all_finite(cur)) {
            throw NumericError("non-finite gradient from layer '" + (*it)->kind() + "'");
        }
    }
    return cur;
}

std::vector<Param*> Network::params() {
    std::vector<Param*> out;
    for (auto& layer : layers_) layer->params(out);
    return out;
}

void Network::zero_grad() {
    for (Param* p : params()) p->grad.fill(0.0);
}

void Network::snapshot_anchors() {
    for (Param* p : params()) {
        p->anchor = p->value;
        p->has_anchor = true;
    }
}

int Network::in_dim() const {
    for (const auto& layer : layers_) {
        if (layer->in_dim() > 0) return layer->in_dim();
    }
    return -1;
}

int Network::out_dim() const {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        if ((*it)->out_dim() > 0) return (*it)->out_dim();
    }
    return -1;
}

// ---------------------------------------------------------------------------
// losses

LossGrad softmax_cross_entropy(const Matrix& logits, const std::vector<int>& targets) {
    if (static_cast<int>(targets.size()) != logits.rows) {
        throw ConfigError("cross-entropy: target count != batch size");
    }
    const int n = logits.rows, c = logits.cols;
    LossGrad out;
    out.grad = Matrix(n, c);
    kern::row_softmax(logits.v.data(), out.grad.v.data(), n, c);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const int t = targets[i];
        if (t < 0 || t >= c) {
            throw DataError("cross-entropy: target " + std::to_string(t) + " out of range [0," +
                            std::to_string(c) + ")");
        }
        loss -= std::log(std::max(out.grad.at(i, t), 1e-300));
        out.grad.at(i, t) -= 1.0;
    }
    const double inv_n = 1.0 / n;
    for (double& g : out.grad.v) g *= inv_n;
    out.loss = loss * inv_n;
    return out;
}

AnchoredLossResult anchored_mse_loss(const Matrix& zhat, const Matrix& z,
                                     const std::vector<Param*>& params, double gamma_anc) {
    if (!zhat.same_shape(z)) throw ConfigError("anchored loss: z and zhat shapes differ");
    const int n = z.rows;
    AnchoredLossResult out;
    out.dzhat = Matrix(z.rows, z.cols);
    double data = 0.0;
    const double two_over_n = 2.0 / n;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double d = z.v[i] - zhat.v[i];
        data += d * d;
        out.dzhat.v[i] = -two_over_n * d;
    }
    out.data_term = data / n;

    double anchor = 0.0;
    const double g2 = gamma_anc * gamma_anc;
    for (Param* p : params) {
        if (!p->has_anchor) {
            throw ConfigError("anchored loss: parameter '" + p->name + "' has no anchor");
        }
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double d = gamma_anc * (p->value.v[i] - p->anchor.v[i]);
            anchor += d * d;
            p->grad.v[i] += two_over_n * g2 * (p->value.v[i] - p->anchor.v[i]);
        }
    }
    out.anchor_term = anchor / n;
    out.loss = out.data_term + out.anchor_term;
    return out;
}

// ---------------------------------------------------------------------------
// optimizer / schedule

void adam_step(const std::vector<Param*>& params, double lr, long long step,
               const AdamConfig& cfg) {
    if (step < 1) throw ConfigError("adam: step count must be >= 1");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (Param* p : params) {
        double* m = p->adam_m.v.data();
        double* v = p->adam_v.v.data();
        double* w = p->value.v.data();
        const double* g = p->grad.v.data();
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(p->value.size());
#pragma omp parallel for schedule(static) if (n > 16384)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

double lr_schedule(int epoch, double base, int total_epochs) {
    if (epoch <= 0) throw ConfigError("lr_schedule: epochs are numbered from 1");
    if (epoch <= total_epochs - 2) return base;
    if (epoch == total_epochs - 1) return base * 0.6;
    return base * 0.36;
}

void glorot_init(Matrix& w, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& x : w.v) x = rng.uniform(-limit, limit);
}

}  // namespace pepr
