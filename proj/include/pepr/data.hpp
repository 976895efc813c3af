#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pepr/tensor.hpp"

namespace pepr {

enum class Split : std::uint8_t { train, val, test_in, test_ood };

// Feature vectors with integer labels; label -1 marks OOD examples, which are
// only ever allowed in the test_ood split. Features are stored as float32
// (the on-disk precision); math promotes to double at batch assembly.
struct FeatureDataset {
    int dim = 0;
    std::vector<float> features;  // row-major
    std::vector<int> labels;
    std::vector<Split> split;
    std::string provenance;

    int rows() const { return static_cast<int>(labels.size()); }
    const float* row(int r) const { return features.data() + static_cast<std::size_t>(r) * dim; }

    void append(const float* feat, int label, Split s);
    // Throws if an OOD label appears in train/val or some class is absent
    // from the train split.
    void check_invariants() const;
};

enum class OodMode { held_out_clusters, mean_shift, isotropic_noise };

std::string ood_mode_name(OodMode mode);
OodMode ood_mode_from_name(const std::string& name);

// Gaussian clusters around seeded random class means. ID samples and means
// depend only on (seed, dim, classes, counts); the OOD stream is derived
// separately per mode, so the three OOD variants share identical ID data.
struct SyntheticSpec {
    int dim = 64;
    int classes = 100;
    double mean_scale = 1.0;
    double cluster_sigma = 0.5;
    int train_per_class = 200;
    int val_per_class = 50;
    int test_in_per_class = 50;
    OodMode ood_mode = OodMode::held_out_clusters;
    int ood_count = 2000;
    int ood_clusters = 0;  // 0 -> max(1, classes / 10)
    std::uint64_t seed = 1;
};

FeatureDataset gen_synthetic(const SyntheticSpec& spec);

// All three OOD variants over one shared ID dataset.
struct SyntheticBenchmark {
    FeatureDataset id_data;  // train/val/test_in rows only
    std::vector<std::string> ood_names;
    std::vector<Matrix> ood_features;
};

SyntheticBenchmark gen_benchmark(const SyntheticSpec& spec);

// CSV: header row, column 1 = integer label (-1 for OOD), remaining columns
// features. Binary: magic, version, dims, little-endian float32 rows.
enum class FeatureFileFormat { csv, binary };

FeatureDataset load_feature_file(const std::filesystem::path& path, FeatureFileFormat format);
FeatureDataset load_feature_file(const std::filesystem::path& path);  // by extension
void save_feature_file(const std::filesystem::path& path, const FeatureDataset& ds,
                       FeatureFileFormat format);

// Stratified carve-out of val/test_in from the train rows (OOD rows keep
// their split); fractions apply per class.
void assign_splits(FeatureDataset& ds, double val_fraction, double test_fraction,
                   std::uint64_t seed);

// On-disk feature store emulating precomputed backbone outputs: train rows
// get k seeded jittered variants, val/test rows are stored un-augmented.
// Layout: one file per dataset plus cache_manifest.json with checksums.
struct CachedRows {
    int dim = 0;
    std::vector<float> features;
    std::vector<int> labels;
    std::vector<std::uint32_t> example_id;
    std::vector<std::uint32_t> aug_index;

    int rows() const { return static_cast<int>(labels.size()); }
    Matrix to_matrix() const;
};

struct CacheConfig {
    int augmentations_per_example = 3;
    double sigma_aug = 0.0;
    std::uint64_t seed = 1;
};

struct FeatureCache {
    std::filesystem::path dir;
    std::vector<std::string> dataset_ids;

    bool has(const std::string& dataset_id) const;
    CachedRows load(const std::string& dataset_id) const;
};

FeatureCache precompute_cache(const FeatureDataset& id_data,
                              const std::vector<std::string>& ood_names,
                              const std::vector<Matrix>& ood_features, const CacheConfig& cfg,
                              const std::filesystem::path& dir);

FeatureCache open_cache(const std::filesystem::path& dir);

// Compares stored checksums against file contents; returns the ids of
// corrupted or missing files.
std::vector<std::string> verify_cache(const std::filesystem::path& dir);

}  // namespace pepr
