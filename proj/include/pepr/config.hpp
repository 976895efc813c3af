#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pepr/data.hpp"
#include "pepr/model.hpp"

namespace pepr {

// Flat "key = value" text with [section] headers; '#' starts a comment.
// Lookups use "section.key".
class KvConfig {
public:
    static KvConfig parse(const std::string& text, const std::string& origin = "<config>");
    static KvConfig parse_file(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

struct MethodSpec {
    std::string name;  // display name, e.g. "PEPR-10"
    std::string base;  // "MSP" | "MLGT" | "KLM" | "MOS" | "EPOW" | "PEPR" | "CPEPR"
    int ensemble = 1;

    bool needs_flat_head() const { return base == "MSP" || base == "MLGT" || base == "KLM"; }
    bool needs_grouped_head() const { return !needs_flat_head(); }
};

MethodSpec parse_method(const std::string& token, int default_ensemble_size);

// Resolved run description. Defaults are the desk-scale benchmark: d=64,
// C=100 in 10 groups, 200/50/50 examples per class, three 2000-example OOD
// variants, 10 epochs x 100 steps at batch 128, width factor 1/8, 10 seeds.
struct RunConfig {
    // data
    bool synthetic = true;
    SyntheticSpec data;
    std::filesystem::path feature_file;
    std::vector<std::pair<std::string, std::filesystem::path>> ood_files;
    double val_fraction = 0.2;
    double test_fraction = 0.2;

    // cache
    int augmentations = 3;
    double sigma_aug = -1.0;  // <0 -> 0.05 * cluster_sigma (synthetic) or 0 (file)

    // train (TrainConfig::seed is replaced by each run seed below)
    TrainConfig train;

    // eval
    std::vector<MethodSpec> methods;
    std::vector<std::uint64_t> seeds;
    double psi = 0.01;
    int ensemble_size = 10;

    // report
    int histogram_bins = 100;

    std::filesystem::path out_dir = "out";

    RunConfig();

    double resolved_sigma_aug() const;
    // Stable textual dump of every resolved field; hashed into the run id.
    std::string dump() const;
};

RunConfig make_run_config(const KvConfig& kv);

}  // namespace pepr
