#include "pepr/checkpoint.hpp"

#include "pepr/binio.hpp"

namespace pepr {
namespace {

constexpr char kMagic[9] = "PEPRCKP1";
constexpr std::uint32_t kVersion = 1;

void write_matrix(ByteWriter& w, const Matrix& m) {
    w.u32(static_cast<std::uint32_t>(m.rows));
    w.u32(static_cast<std::uint32_t>(m.cols));
    for (double x : m.v) w.f64(x);
}

Matrix read_matrix(ByteReader& r) {
    const int rows = static_cast<int>(r.u32());
    const int cols = static_cast<int>(r.u32());
    Matrix m(rows, cols);
    for (double& x : m.v) x = r.f64();
    return m;
}

void write_params(ByteWriter& w, Layer& layer) {
    std::vector<Param*> params;
    layer.params(params);
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const Param* p : params) {
        w.str(p->name);
        write_matrix(w, p->value);
        w.u8(p->has_anchor ? 1 : 0);
        if (p->has_anchor) write_matrix(w, p->anchor);
    }
}

void read_params(ByteReader& r, Layer& layer) {
    std::vector<Param*> params;
    layer.params(params);
    const std::uint32_t n = r.u32();
    if (n != params.size()) throw DataError(r.path() + ": parameter count mismatch");
    for (Param* p : params) {
        p->name = r.str();
        Matrix value = read_matrix(r);
        if (!value.same_shape(p->value)) throw DataError(r.path() + ": parameter shape mismatch");
        p->value = std::move(value);
        if (r.u8()) {
            p->anchor = read_matrix(r);
            p->has_anchor = true;
        }
    }
}

void write_network(ByteWriter& w, Network& net) {
    w.u64(net.seed());
    w.u32(static_cast<std::uint32_t>(net.layer_count()));
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        Layer& layer = net.layer(i);
        const std::string kind = layer.kind();
        w.str(kind);
        if (kind == "dense") {
            w.u32(static_cast<std::uint32_t>(layer.in_dim()));
            w.u32(static_cast<std::uint32_t>(layer.out_dim()));
        } else if (kind == "leaky-relu" || kind == "dropout") {
            w.f64(layer.extra());
        } else if (kind == "batch-norm") {
            auto& bn = static_cast<BatchNormLayer&>(layer);
            w.u32(static_cast<std::uint32_t>(layer.in_dim()));
            w.f64(layer.extra());  // eps
            w.f64(bn.momentum());
            write_matrix(w, bn.running_mean());
            write_matrix(w, bn.running_var());
        }
        write_params(w, layer);
    }
}

Network read_network(ByteReader& r) {
    const std::uint64_t seed = r.u64();
    Network net(seed);
    const std::uint32_t layers = r.u32();
    for (std::uint32_t i = 0; i < layers; ++i) {
        const std::string kind = r.str();
        std::unique_ptr<Layer> layer;
        if (kind == "dense") {
            const int in = static_cast<int>(r.u32());
            const int out = static_cast<int>(r.u32());
            layer = std::make_unique<DenseLayer>(in, out);
        } else if (kind == "elu") {
            layer = std::make_unique<EluLayer>();
        } else if (kind == "tanh") {
            layer = std::make_unique<TanhLayer>();
        } else if (kind == "relu") {
            layer = std::make_unique<ReluLayer>();
        } else if (kind == "leaky-relu") {
            layer = std::make_unique<LeakyReluLayer>(r.f64());
        } else if (kind == "dropout") {
            layer = std::make_unique<DropoutLayer>(r.f64());
        } else if (kind == "softmax") {
            layer = std::make_unique<SoftmaxLayer>();
        } else if (kind == "batch-norm") {
            const int dim = static_cast<int>(r.u32());
            const double eps = r.f64();
            const double momentum = r.f64();
            auto bn = std::make_unique<BatchNormLayer>(dim, eps, momentum);
            bn->running_mean() = read_matrix(r);
            bn->running_var() = read_matrix(r);
            layer = std::move(bn);
        } else {
            throw DataError(r.path() + ": unknown layer kind '" + kind + "'");
        }
        read_params(r, *layer);
        net.add(std::move(layer));
    }
    return net;
}

void write_config(ByteWriter& w, const TrainConfig& cfg) {
    w.u32(static_cast<std::uint32_t>(cfg.epochs));
    w.u32(static_cast<std::uint32_t>(cfg.steps_per_epoch));
    w.u32(static_cast<std::uint32_t>(cfg.batch_size));
    w.f64(cfg.base_lr);
    w.f64(cfg.gamma_anc);
    w.u64(cfg.seed);
    w.u8(cfg.grouped ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(cfg.group_count));
    w.f64(cfg.width_factor);
    w.u32(static_cast<std::uint32_t>(cfg.num_regressors));
    w.f64(cfg.adam.beta1);
    w.f64(cfg.adam.beta2);
    w.f64(cfg.adam.eps);
    w.f64(cfg.bn_eps);
    w.f64(cfg.bn_momentum);
    w.f64(cfg.dropout_rate);
}

TrainConfig read_config(ByteReader& r) {
    TrainConfig cfg;
    cfg.epochs = static_cast<int>(r.u32());
    cfg.steps_per_epoch = static_cast<int>(r.u32());
    cfg.batch_size = static_cast<int>(r.u32());
    cfg.base_lr = r.f64();
    cfg.gamma_anc = r.f64();
    cfg.seed = r.u64();
    cfg.grouped = r.u8() != 0;
    cfg.group_count = static_cast<int>(r.u32());
    cfg.width_factor = r.f64();
    cfg.num_regressors = static_cast<int>(r.u32());
    cfg.adam.beta1 = r.f64();
    cfg.adam.beta2 = r.f64();
    cfg.adam.eps = r.f64();
    cfg.bn_eps = r.f64();
    cfg.bn_momentum = r.f64();
    cfg.dropout_rate = r.f64();
    return cfg;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const PeprModel& model,
                      const TrainConfig& cfg) {
    ByteWriter w(path);
    w.bytes(kMagic, 8);
    w.u32(kVersion);
    write_config(w, cfg);

    w.u32(static_cast<std::uint32_t>(model.input_dim));
    w.u32(static_cast<std::uint32_t>(model.num_classes));
    w.u32(static_cast<std::uint32_t>(model.embed_dim));
    w.f64(model.width_factor);
    w.u8(model.grouped ? 1 : 0);
    if (model.grouped) {
        w.u32(static_cast<std::uint32_t>(model.scheme.num_classes));
        w.u32(static_cast<std::uint32_t>(model.scheme.groups()));
        for (int s : model.scheme.group_size) w.u32(static_cast<std::uint32_t>(s));
    }

    auto& m = const_cast<PeprModel&>(model);  // params() is non-const; no mutation happens
    write_network(w, m.embedder);
    write_network(w, m.head);
    w.u32(static_cast<std::uint32_t>(m.regressors.size()));
    for (auto& reg : m.regressors) write_network(w, reg);
    w.close();
}

CheckpointBundle read_checkpoint(const std::filesystem::path& path) {
    ByteReader r(path);
    r.expect_magic(kMagic);
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw DataError(path.string() + ": unsupported checkpoint version " +
                        std::to_string(version));
    }
    CheckpointBundle b;
    b.config = read_config(r);

    b.model.input_dim = static_cast<int>(r.u32());
    b.model.num_classes = static_cast<int>(r.u32());
    b.model.embed_dim = static_cast<int>(r.u32());
    b.model.width_factor = r.f64();
    b.model.grouped = r.u8() != 0;
    if (b.model.grouped) {
        const int classes = static_cast<int>(r.u32());
        const int groups = static_cast<int>(r.u32());
        GroupScheme s;
        s.num_classes = classes;
        s.group_of.resize(classes);
        s.index_in_group.resize(classes);
        int cls = 0, offset = 0;
        for (int g = 0; g < groups; ++g) {
            const int size = static_cast<int>(r.u32());
            s.group_size.push_back(size);
            s.group_offset.push_back(offset);
            s.group_width.push_back(size + 1);
            for (int i = 0; i < size; ++i, ++cls) {
                s.group_of[cls] = g;
                s.index_in_group[cls] = i;
            }
            offset += size + 1;
        }
        if (cls != classes) throw DataError(path.string() + ": group sizes do not cover classes");
        b.model.scheme = std::move(s);
    }

    b.model.embedder = read_network(r);
    b.model.head = read_network(r);
    const std::uint32_t regs = r.u32();
    for (std::uint32_t i = 0; i < regs; ++i) b.model.regressors.push_back(read_network(r));
    return b;
}

}  // namespace pepr
