#pragma once

#include <filesystem>

#include "pepr/model.hpp"

namespace pepr {

// Self-describing little-endian container: format version, train config,
// group scheme, then each network as a list of layer records (kind, shape
// parameters, running statistics, parameter arrays, anchors) plus its RNG seed.
void write_checkpoint(const std::filesystem::path& path, const PeprModel& model,
                      const TrainConfig& cfg);

struct CheckpointBundle {
    PeprModel model;
    TrainConfig config;
};

CheckpointBundle read_checkpoint(const std::filesystem::path& path);

}  // namespace pepr
