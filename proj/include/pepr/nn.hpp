#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pepr/rng.hpp"
#include "pepr/tensor.hpp"

namespace pepr {

// Batch norm uses batch statistics and dropout is active only in train mode.
enum class Mode { train, eval };

// One trainable array plus its gradient, Adam moments, and optional anchor
// (snapshot of the initial value, the regularization target of the anchored
// loss). Anchor shape always equals the value shape.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix adam_m;
    Matrix adam_v;
    Matrix anchor;
    bool has_anchor = false;

    explicit Param(std::string n, int rows, int cols)
        : name(std::move(n)),
          value(rows, cols),
          grad(rows, cols),
          adam_m(rows, cols),
          adam_v(rows, cols) {}
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string kind() const = 0;
    // -1 means "any width" / "same as input".
    virtual int in_dim() const { return -1; }
    virtual int out_dim() const { return -1; }
    // Train-mode forward caches whatever backward needs; eval-mode forward is
    // routed to eval() and caches nothing.
    virtual Matrix forward(const Matrix& x, Mode mode, Rng& rng);
    virtual Matrix eval(const Matrix& x) const = 0;
    virtual Matrix backward(const Matrix& dy) = 0;
    virtual void params(std::vector<Param*>& /*out*/) {}
    virtual double extra() const { return 0.0; }  // slope / rate, for serialization

protected:
    virtual Matrix train_forward(const Matrix& x, Rng& rng) = 0;
    void require_cache(const char* kind) const;
    bool has_cache_ = false;
};

class DenseLayer : public Layer {
public:
    DenseLayer(int in, int out, Rng& init_rng);
    DenseLayer(int in, int out);  // zero-initialized, filled by checkpoint load
    std::string kind() const override { return "dense"; }
    int in_dim() const override { return in_; }
    int out_dim() const override { return out_; }
    Matrix eval(const Matrix& x) const override;
    Matrix backward(const Matrix& dy) override;
    void params(std::vector<Param*>& out) override;
    Param& weights() { return w_; }
    Param& bias() { return b_; }

protected:
    Matrix train_forward(const Matrix& x, Rng& rng) override;

private:
    int in_, out_;
    Param w_;
    Param b_;
    Matrix x_cache_;
};

class EluLayer : public Layer {
public:
    std::string kind() const override { return "elu"; }
    Matrix eval(const Matrix& x) const override;
    Matrix backward(const Matrix& dy) override;

protected:
    Matrix train_forward(const Matrix& x, Rng& rng) override;

private:
    Matrix y_cache_;
};

class TanhLayer : public Layer {
public:
    std::string kind() const override { return "tanh"; }
    Matrix eval(const Matrix& x) const override;
    Matrix backward(const Matrix& dy) override;

protected:
    Matrix train_forward(const Matrix& x, Rng& rng) override;

private:
    Matrix y_cache_;
};

class ReluLayer : public Layer {
public:
    std::string kind() const override { return "relu"; }
    Matrix eval(const Matrix& x) const override;
    Matrix backward(const Matrix& dy) override;

protected:
    Matrix train_forward(const Matrix& x, Rng& rng) override;

private:
    Matrix x_cache_;
};

class LeakyReluLayer : public Layer {
public:
    explicit LeakyReluLayer(double slope);
    std::string kind() const override { return "leaky-relu"; }
    double extra() const override { return slope_; }
    Matrix eval(const Matrix& x) const override;
    Matrix backward(const Matrix& dy) override;

protected:
    Matrix train_forward(const Matrix& x, Rng& rng) override;

private:
    double slope_;
    Matrix x_cache_;
};

class BatchNormLayer : public Layer {
public:
    explicit BatchNormLayer(int dim, double eps = 1e-5, double momentum = 0.99);
    std::string kind() const override { return "batch-norm"; }
    int in_dim() const override { return dim_; }
    int out_dim() const override { return dim_; }
    Matrix eval(const Matrix& x) const override;
    Matrix backward(const Matrix& dy) override;
    void params(std::vector<Param*>& out) override;
    double extra() const override { return eps_; }
    Matrix& running_mean() { return running_mean_; }
    Matrix& running_var() { return running_var_; }
    double momentum() const { return momentum_; }
    Param& scale() { return gamma_; }
    Param& shift() { return beta_; }

protected:
    Matrix train_forward(const Matrix& x, Rng& rng) override;

private:
    int dim_;
    double eps_;
    double momentum_;
    Param gamma_;
    Param beta_;
    Matrix running_mean_;
    Matrix running_var_;
    Matrix xhat_cache_;
    Matrix inv_std_cache_;
};

class DropoutLayer : public Layer {
public:
    explicit DropoutLayer(double rate);
    std::string kind() const override { return "dropout"; }
    double extra() const override { return rate_; }
    Matrix eval(const Matrix& x) const override;
    Matrix backward(const Matrix& dy) override;

protected:
    // Inverted dropout: surviving entries scaled by 1/(1-rate) so eval is identity.
    Matrix train_forward(const Matrix& x, Rng& rng) override;

private:
    double rate_;
    Matrix mask_cache_;
};

class SoftmaxLayer : public Layer {
public:
    std::string kind() const override { return "softmax"; }
    Matrix eval(const Matrix& x) const override;
    Matrix backward(const Matrix& dy) override;

protected:
    Matrix train_forward(const Matrix& x, Rng& rng) override;

private:
    Matrix y_cache_;
};

// Sequential stack. An empty network is the identity. Train-mode forward
// consumes the network's own RNG stream (dropout masks), so a fixed seed gives
// a reproducible trajectory; eval() is const and touches no state.
class Network {
public:
    Network() : rng_(0) {}
    explicit Network(std::uint64_t seed) : rng_(seed), seed_(seed) {}

    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    void add(std::unique_ptr<Layer> layer);

    Matrix forward(const Matrix& x, Mode mode);
    Matrix eval(const Matrix& x) const;
    // Propagates dy back through the cached train-mode forward, accumulating
    // parameter gradients; returns the input gradient.
    Matrix backward(const Matrix& dy);

    std::vector<Param*> params();
    void zero_grad();
    // Freezes a copy of every parameter's current value as its anchor.
    void snapshot_anchors();

    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }
    const Layer& layer(std::size_t i) const { return *layers_[i]; }

    int in_dim() const;
    int out_dim() const;

    Rng& rng() { return rng_; }
    std::uint64_t seed() const { return seed_; }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    Rng rng_;
    std::uint64_t seed_ = 0;
    bool has_cache_ = false;
};

struct LossGrad {
    double loss = 0.0;
    Matrix grad;  // d loss / d logits
};

// Mean cross-entropy over the batch; grad = (softmax(logits) - onehot) / batch.
LossGrad softmax_cross_entropy(const Matrix& logits, const std::vector<int>& targets);

struct AnchoredLossResult {
    double loss = 0.0;
    double data_term = 0.0;
    double anchor_term = 0.0;
    Matrix dzhat;
};

// loss = (1/N)*||z - zhat||^2 + (1/N)*||gamma_anc*(theta - theta_anc)||^2 with
// N the batch size. Adds the anchor-term gradient into each param's grad;
// dzhat carries the data-term gradient for backprop through the predictor.
AnchoredLossResult anchored_mse_loss(const Matrix& zhat, const Matrix& z,
                                     const std::vector<Param*>& params, double gamma_anc);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-7;
};

// Standard bias-corrected Adam. step starts at 1.
void adam_step(const std::vector<Param*>& params, double lr, long long step,
               const AdamConfig& cfg = {});

// Base rate until the two final epochs, then 0.6x and 0.36x (two 40% cuts).
// Epochs are numbered from 1.
double lr_schedule(int epoch, double base, int total_epochs = 10);

// Uniform Glorot fan-based initialization.
void glorot_init(Matrix& w, int fan_in, int fan_out, Rng& rng);

}  // namespace pepr
