#include "pepr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pepr/binio.hpp"
#include "pepr/rng.hpp"

namespace pepr {
namespace {

constexpr char kFeatureMagic[9] = "PEPRFTR1";
constexpr char kCacheMagic[9] = "PEPRCCH1";
constexpr std::uint32_t kFeatureVersion = 1;
constexpr std::uint32_t kCacheVersion = 1;

using nlohmann::json;

std::vector<float> gaussian_row(Rng& rng, int dim, double scale) {
    std::vector<float> row(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) row[j] = static_cast<float>(scale * rng.normal());
    return row;
}

}  // namespace

void FeatureDataset::append(const float* feat, int label, Split s) {
    features.insert(features.end(), feat, feat + dim);
    labels.push_back(label);
    split.push_back(s);
}

void FeatureDataset::check_invariants() const {
    std::set<int> train_classes, all_classes;
    for (int i = 0; i < rows(); ++i) {
        const bool ood = labels[i] < 0;
        if (ood && (split[i] == Split::train || split[i] == Split::val)) {
            throw DataError("dataset invariant: OOD example in train/val split (row " +
                            std::to_string(i) + ")");
        }
        if (!ood) {
            all_classes.insert(labels[i]);
            if (split[i] == Split::train) train_classes.insert(labels[i]);
        }
    }
    for (int c : all_classes) {
        if (train_classes.find(c) == train_classes.end()) {
            throw DataError("dataset invariant: class " + std::to_string(c) +
                            " has no training examples");
        }
    }
}

std::string ood_mode_name(OodMode mode) {
    switch (mode) {
        case OodMode::held_out_clusters: return "heldout";
        case OodMode::mean_shift: return "meanshift";
        case OodMode::isotropic_noise: return "isonoise";
    }
    throw ConfigError("unknown OOD mode");
}

OodMode ood_mode_from_name(const std::string& name) {
    if (name == "heldout") return OodMode::held_out_clusters;
    if (name == "meanshift") return OodMode::mean_shift;
    if (name == "isonoise") return OodMode::isotropic_noise;
    throw ConfigError("unknown OOD mode name: " + name);
}

namespace {

void validate(const SyntheticSpec& spec) {
    if (spec.dim < 2) throw ConfigError("synthetic: dim must be >= 2");
    if (spec.classes < 2) throw ConfigError("synthetic: classes must be >= 2");
    if (spec.train_per_class < 1 || spec.val_per_class < 1) {
        throw ConfigError("synthetic: need at least 2 samples per class to split train/val");
    }
    if (spec.test_in_per_class < 0 || spec.ood_count < 0) {
        throw ConfigError("synthetic: negative sample counts");
    }
    if (spec.cluster_sigma < 0.0) throw ConfigError("synthetic: negative sigma");
}

std::vector<std::vector<float>> draw_class_means(const SyntheticSpec& spec) {
    Rng rng(derive_seed(spec.seed, 0x3EA1));
    std::vector<std::vector<float>> means;
    means.reserve(spec.classes);
    for (int c = 0; c < spec.classes; ++c) means.push_back(gaussian_row(rng, spec.dim, spec.mean_scale));
    return means;
}

FeatureDataset gen_id_data(const SyntheticSpec& spec,
                           const std::vector<std::vector<float>>& means) {
    FeatureDataset ds;
    ds.dim = spec.dim;
    ds.provenance = "synthetic seed=" + std::to_string(spec.seed);
    Rng rng(derive_seed(spec.seed, 0x1D00));
    std::vector<float> row(static_cast<std::size_t>(spec.dim));
    for (int c = 0; c < spec.classes; ++c) {
        const int total = spec.train_per_class + spec.val_per_class + spec.test_in_per_class;
        for (int s = 0; s < total; ++s) {
            for (int j = 0; j < spec.dim; ++j) {
                row[j] = means[c][j] + static_cast<float>(spec.cluster_sigma * rng.normal());
            }
            const Split sp = s < spec.train_per_class ? Split::train
                             : s < spec.train_per_class + spec.val_per_class ? Split::val
                                                                             : Split::test_in;
            ds.append(row.data(), c, sp);
        }
    }
    return ds;
}

Matrix gen_ood_features(const SyntheticSpec& spec, const std::vector<std::vector<float>>& means,
                        OodMode mode) {
    Rng rng(derive_seed(spec.seed, 0x0D00 + static_cast<std::uint64_t>(mode)));
    Matrix out(spec.ood_count, spec.dim);
    switch (mode) {
        case OodMode::held_out_clusters: {
            const int nc = spec.ood_clusters > 0 ? spec.ood_clusters
                                                 : std::max(1, spec.classes / 10);
            std::vector<std::vector<float>> fresh;
            fresh.reserve(nc);
            for (int c = 0; c < nc; ++c) fresh.push_back(gaussian_row(rng, spec.dim, spec.mean_scale));
            for (int i = 0; i < spec.ood_count; ++i) {
                const auto& m = fresh[static_cast<std::size_t>(i) % nc];
                for (int j = 0; j < spec.dim; ++j) {
                    out.at(i, j) = m[j] + spec.cluster_sigma * rng.normal();
                }
            }
            break;
        }
        case OodMode::mean_shift: {
            // One fixed offset, comparable in length to typical inter-mean distance.
            std::vector<double> delta(static_cast<std::size_t>(spec.dim));
            for (double& d : delta) d = 2.0 * spec.mean_scale * rng.normal();
            for (int i = 0; i < spec.ood_count; ++i) {
                const auto c = static_cast<int>(rng.uniform_int(spec.classes));
                for (int j = 0; j < spec.dim; ++j) {
                    out.at(i, j) = means[c][j] + delta[j] + spec.cluster_sigma * rng.normal();
                }
            }
            break;
        }
        case OodMode::isotropic_noise: {
            for (int i = 0; i < spec.ood_count; ++i) {
                for (int j = 0; j < spec.dim; ++j) out.at(i, j) = spec.mean_scale * rng.normal();
            }
            break;
        }
    }
    // Features are float32 at rest; round here so file/cache round trips are exact.
    for (double& v : out.v) v = static_cast<float>(v);
    return out;
}

}  // namespace

FeatureDataset gen_synthetic(const SyntheticSpec& spec) {
    validate(spec);
    const auto means = draw_class_means(spec);
    FeatureDataset ds = gen_id_data(spec, means);
    const Matrix ood = gen_ood_features(spec, means, spec.ood_mode);
    std::vector<float> row(static_cast<std::size_t>(spec.dim));
    for (int i = 0; i < ood.rows; ++i) {
        for (int j = 0; j < spec.dim; ++j) row[j] = static_cast<float>(ood.at(i, j));
        ds.append(row.data(), -1, Split::test_ood);
    }
    ds.check_invariants();
    return ds;
}

SyntheticBenchmark gen_benchmark(const SyntheticSpec& spec) {
    validate(spec);
    const auto means = draw_class_means(spec);
    SyntheticBenchmark b;
    b.id_data = gen_id_data(spec, means);
    b.id_data.check_invariants();
    for (OodMode mode :
         {OodMode::held_out_clusters, OodMode::mean_shift, OodMode::isotropic_noise}) {
        b.ood_names.push_back(ood_mode_name(mode));
        b.ood_features.push_back(gen_ood_features(spec, means, mode));
    }
    return b;
}

// ---------------------------------------------------------------------------
// feature files

namespace {

FeatureDataset load_csv(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    FeatureDataset ds;
    ds.provenance = path.string();
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool header_skipped = false;
    std::vector<float> row;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (!header_skipped) {
            header_skipped = true;
            continue;
        }
        const auto fields = split(line, ',');
        if (fields.size() < 2) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": expected label plus at least one feature");
        }
        int label = 0;
        {
            const std::string f = trim(fields[0]);
            auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), label);
            if (ec != std::errc() || p != f.data() + f.size()) {
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": bad label '" + f + "'");
            }
        }
        if (ds.dim == 0) {
            ds.dim = static_cast<int>(fields.size()) - 1;
        } else if (static_cast<int>(fields.size()) - 1 != ds.dim) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": row has " + std::to_string(fields.size() - 1) +
                            " features, expected " + std::to_string(ds.dim));
        }
        row.resize(static_cast<std::size_t>(ds.dim));
        for (int j = 0; j < ds.dim; ++j) {
            const std::string f = trim(fields[j + 1]);
            float value = 0.0f;
            auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
            if (ec != std::errc() || p != f.data() + f.size()) {
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": non-numeric feature '" + f + "'");
            }
            row[j] = value;
        }
        ds.append(row.data(), label, label < 0 ? Split::test_ood : Split::train);
    }
    if (ds.rows() == 0) throw DataError(path.string() + ": no data rows");
    return ds;
}

FeatureDataset load_binary(const std::filesystem::path& path) {
    ByteReader r(path);
    r.expect_magic(kFeatureMagic);
    const std::uint32_t version = r.u32();
    if (version != kFeatureVersion) {
        throw DataError(path.string() + ": unsupported format version " + std::to_string(version));
    }
    FeatureDataset ds;
    ds.provenance = path.string();
    ds.dim = static_cast<int>(r.u32());
    const std::uint64_t rows = r.u64();
    if (ds.dim <= 0) throw DataError(path.string() + ": bad feature dim");
    if (rows == 0) throw DataError(path.string() + ": no data rows");
    std::vector<float> row(static_cast<std::size_t>(ds.dim));
    for (std::uint64_t i = 0; i < rows; ++i) {
        const int label = r.i32();
        for (int j = 0; j < ds.dim; ++j) row[j] = r.f32();
        ds.append(row.data(), label, label < 0 ? Split::test_ood : Split::train);
    }
    return ds;
}

}  // namespace

FeatureDataset load_feature_file(const std::filesystem::path& path, FeatureFileFormat format) {
    return format == FeatureFileFormat::csv ? load_csv(path) : load_binary(path);
}

FeatureDataset load_feature_file(const std::filesystem::path& path) {
    const std::string ext = lower(path.extension().string());
    return load_feature_file(path,
                             ext == ".csv" ? FeatureFileFormat::csv : FeatureFileFormat::binary);
}

void save_feature_file(const std::filesystem::path& path, const FeatureDataset& ds,
                       FeatureFileFormat format) {
    if (format == FeatureFileFormat::csv) {
        std::string out = "label";
        for (int j = 0; j < ds.dim; ++j) out += ",f" + std::to_string(j);
        out += "\n";
        char buf[48];
        for (int i = 0; i < ds.rows(); ++i) {
            out += std::to_string(ds.labels[i]);
            const float* row = ds.row(i);
            for (int j = 0; j < ds.dim; ++j) {
                std::snprintf(buf, sizeof(buf), ",%.9g", static_cast<double>(row[j]));
                out += buf;
            }
            out += "\n";
        }
        write_text_file(path, out);
        return;
    }
    ByteWriter w(path);
    w.bytes(kFeatureMagic, 8);
    w.u32(kFeatureVersion);
    w.u32(static_cast<std::uint32_t>(ds.dim));
    w.u64(static_cast<std::uint64_t>(ds.rows()));
    for (int i = 0; i < ds.rows(); ++i) {
        w.i32(ds.labels[i]);
        const float* row = ds.row(i);
        for (int j = 0; j < ds.dim; ++j) w.f32(row[j]);
    }
    w.close();
}

void assign_splits(FeatureDataset& ds, double val_fraction, double test_fraction,
                   std::uint64_t seed) {
    if (val_fraction < 0.0 || test_fraction < 0.0 || val_fraction + test_fraction >= 1.0) {
        throw ConfigError("split fractions must be nonnegative and sum below 1");
    }
    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < ds.rows(); ++i) {
        if (ds.labels[i] >= 0 && ds.split[i] == Split::train) by_class[ds.labels[i]].push_back(i);
    }
    Rng rng(derive_seed(seed, 0x59117));
    for (auto& [cls, idx] : by_class) {
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
        }
        const auto n_val = static_cast<std::size_t>(val_fraction * static_cast<double>(idx.size()));
        const auto n_test =
            static_cast<std::size_t>(test_fraction * static_cast<double>(idx.size()));
        for (std::size_t i = 0; i < n_val && i < idx.size(); ++i) ds.split[idx[i]] = Split::val;
        for (std::size_t i = n_val; i < n_val + n_test && i < idx.size(); ++i) {
            ds.split[idx[i]] = Split::test_in;
        }
    }
    ds.check_invariants();
}

// ---------------------------------------------------------------------------
// feature cache

Matrix CachedRows::to_matrix() const {
    Matrix m(rows(), dim);
    for (std::size_t i = 0; i < features.size(); ++i) m.v[i] = features[i];
    return m;
}

namespace {

std::filesystem::path cache_file(const std::filesystem::path& dir, const std::string& id) {
    return dir / (id + ".pfc");
}

std::filesystem::path cache_manifest(const std::filesystem::path& dir) {
    return dir / "cache_manifest.json";
}

void write_cache_file(const std::filesystem::path& path, const std::string& id,
                      const CachedRows& rows) {
    ByteWriter w(path);
    w.bytes(kCacheMagic, 8);
    w.u32(kCacheVersion);
    w.str(id);
    w.u32(static_cast<std::uint32_t>(rows.dim));
    w.u64(static_cast<std::uint64_t>(rows.rows()));
    for (int i = 0; i < rows.rows(); ++i) {
        w.u32(rows.example_id[i]);
        w.u32(rows.aug_index[i]);
        w.i32(rows.labels[i]);
        const float* f = rows.features.data() + static_cast<std::size_t>(i) * rows.dim;
        for (int j = 0; j < rows.dim; ++j) w.f32(f[j]);
    }
    w.close();
}

CachedRows read_cache_file(const std::filesystem::path& path, const std::string& expect_id) {
    ByteReader r(path);
    r.expect_magic(kCacheMagic);
    const std::uint32_t version = r.u32();
    if (version != kCacheVersion) {
        throw DataError(path.string() + ": unsupported cache version");
    }
    const std::string id = r.str();
    if (id != expect_id) {
        throw DataError(path.string() + ": dataset id '" + id + "' != '" + expect_id + "'");
    }
    CachedRows rows;
    rows.dim = static_cast<int>(r.u32());
    const std::uint64_t n = r.u64();
    rows.features.resize(n * static_cast<std::uint64_t>(rows.dim));
    rows.labels.resize(n);
    rows.example_id.resize(n);
    rows.aug_index.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        rows.example_id[i] = r.u32();
        rows.aug_index[i] = r.u32();
        rows.labels[i] = r.i32();
        float* f = rows.features.data() + i * static_cast<std::uint64_t>(rows.dim);
        for (int j = 0; j < rows.dim; ++j) f[j] = r.f32();
    }
    return rows;
}

}  // namespace

bool FeatureCache::has(const std::string& dataset_id) const {
    return std::find(dataset_ids.begin(), dataset_ids.end(), dataset_id) != dataset_ids.end();
}

CachedRows FeatureCache::load(const std::string& dataset_id) const {
    if (!has(dataset_id)) throw DataError("cache has no dataset '" + dataset_id + "'");
    return read_cache_file(cache_file(dir, dataset_id), dataset_id);
}

FeatureCache precompute_cache(const FeatureDataset& id_data,
                              const std::vector<std::string>& ood_names,
                              const std::vector<Matrix>& ood_features, const CacheConfig& cfg,
                              const std::filesystem::path& dir) {
    if (cfg.augmentations_per_example < 1) {
        throw ConfigError("cache: augmentations per example must be >= 1");
    }
    id_data.check_invariants();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create cache dir " + dir.string() + ": " + ec.message());

    FeatureCache cache;
    cache.dir = dir;

    CachedRows train, val, test_in;
    train.dim = val.dim = test_in.dim = id_data.dim;
    Rng aug_rng(derive_seed(cfg.seed, 0xA06));
    std::vector<float> jittered(static_cast<std::size_t>(id_data.dim));
    for (int i = 0; i < id_data.rows(); ++i) {
        const float* row = id_data.row(i);
        switch (id_data.split[i]) {
            case Split::train:
                for (int a = 0; a < cfg.augmentations_per_example; ++a) {
                    for (int j = 0; j < id_data.dim; ++j) {
                        jittered[j] =
                            static_cast<float>(row[j] + cfg.sigma_aug * aug_rng.normal());
                    }
                    train.features.insert(train.features.end(), jittered.begin(), jittered.end());
                    train.labels.push_back(id_data.labels[i]);
                    train.example_id.push_back(static_cast<std::uint32_t>(i));
                    train.aug_index.push_back(static_cast<std::uint32_t>(a));
                }
                break;
            case Split::val:
            case Split::test_in: {
                CachedRows& dst = id_data.split[i] == Split::val ? val : test_in;
                dst.features.insert(dst.features.end(), row, row + id_data.dim);
                dst.labels.push_back(id_data.labels[i]);
                dst.example_id.push_back(static_cast<std::uint32_t>(i));
                dst.aug_index.push_back(0);
                break;
            }
            case Split::test_ood:
                throw DataError("cache: ID dataset must not contain test_ood rows");
        }
    }

    json manifest;
    manifest["version"] = 1;
    manifest["config"] = {{"augmentations_per_example", cfg.augmentations_per_example},
                          {"sigma_aug", cfg.sigma_aug},
                          {"seed", cfg.seed}};
    auto emit = [&](const std::string& id, const CachedRows& rows) {
        const auto path = cache_file(dir, id);
        write_cache_file(path, id, rows);
        manifest["datasets"][id] = {{"file", path.filename().string()},
                                    {"rows", rows.rows()},
                                    {"checksum", hex64(file_checksum(path))}};
        cache.dataset_ids.push_back(id);
    };
    emit("train", train);
    emit("val", val);
    emit("test_in", test_in);

    if (ood_names.size() != ood_features.size()) {
        throw ConfigError("cache: ood names/features length mismatch");
    }
    for (std::size_t k = 0; k < ood_names.size(); ++k) {
        CachedRows rows;
        rows.dim = id_data.dim;
        const Matrix& f = ood_features[k];
        if (f.cols != id_data.dim) throw DataError("cache: OOD feature dim mismatch");
        for (int i = 0; i < f.rows; ++i) {
            for (int j = 0; j < f.cols; ++j) {
                rows.features.push_back(static_cast<float>(f.at(i, j)));
            }
            rows.labels.push_back(-1);
            rows.example_id.push_back(static_cast<std::uint32_t>(i));
            rows.aug_index.push_back(0);
        }
        emit("ood_" + ood_names[k], rows);
    }

    write_text_file(cache_manifest(dir), manifest.dump(2) + "\n");
    return cache;
}

FeatureCache open_cache(const std::filesystem::path& dir) {
    const auto manifest_path = cache_manifest(dir);
    if (!std::filesystem::exists(manifest_path)) {
        throw DataError("no cache manifest at " + manifest_path.string());
    }
    const json manifest = json::parse(read_text_file(manifest_path));
    FeatureCache cache;
    cache.dir = dir;
    for (const auto& [id, entry] : manifest.at("datasets").items()) {
        (void)entry;
        cache.dataset_ids.push_back(id);
    }
    std::sort(cache.dataset_ids.begin(), cache.dataset_ids.end());
    return cache;
}

std::vector<std::string> verify_cache(const std::filesystem::path& dir) {
    const json manifest = json::parse(read_text_file(cache_manifest(dir)));
    std::vector<std::string> bad;
    for (const auto& [id, entry] : manifest.at("datasets").items()) {
        const auto path = dir / entry.at("file").get<std::string>();
        if (!std::filesystem::exists(path) ||
            hex64(file_checksum(path)) != entry.at("checksum").get<std::string>()) {
            bad.push_back(id);
        }
    }
    std::sort(bad.begin(), bad.end());
    return bad;
}

}  // namespace pepr
