#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Error categories map onto CLI exit codes:
//   ConfigError -> 1, DataError -> 2, NumericError / TrainingDiverged -> 3.
namespace pepr {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainingDiverged : NumericError {
    explicit TrainingDiverged(const std::string& msg) : NumericError(msg) {}
};

// FNV-1a, used for artifact checksums and sub-seed derivation.
std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ull);
std::uint64_t fnv1a64(std::string_view s);
std::uint64_t file_checksum(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

// Mixes a base seed with a stream tag into an independent sub-seed (splitmix64 round).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);
std::string lower(std::string_view s);

// Shortest decimal form that round-trips a double; used everywhere a double is
// written to CSV so repeated runs produce byte-identical files.
std::string format_double(double v);
std::string format_fixed(double v, int decimals);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace pepr
