#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "relunet/data.hpp"

namespace relunet::cli {

constexpr const char* kToolVersion = "1.0.0";

// Exit codes.
constexpr int kOk = 0;
constexpr int kNumericalFailure = 1;
constexpr int kUsageError = 2;

// A dataset given either as a CSV path or as `kind[:key=value,...]` with keys
// n, d, seed, eta, noise_std, teacher_width.
struct DatasetSource {
    bool from_file = false;
    std::string path;
    DatasetKind kind = DatasetKind::GaussianTeacher;
    Eigen::Index n = 0;
    Eigen::Index d = 0;
    std::uint64_t seed = 0;
    double eta = 1e-3;
    double noise_std = 1e-3;
    Eigen::Index teacher_width = 10;

    // Replicate r of a generated source uses seed derive_seed(seed, {r}).
    Dataset make(std::size_t replicate) const;
    std::string describe() const;
};

DatasetSource parse_dataset_source(const std::string& text, std::uint64_t default_seed);

// Generates one dataset from explicit parameters (exact seed, no derivation).
Dataset generate(DatasetKind kind, Eigen::Index n, Eigen::Index d, std::uint64_t seed, double eta, double noise_std,
                 Eigen::Index teacher_width);

// "2^-1..2^-9", "0.5,0.25", "2^-3,0.1" ...
std::vector<double> parse_alpha_grid(const std::string& text);
std::vector<std::size_t> parse_size_list(const std::string& text);
// Accepts integers and forms like 1e5.
std::uint64_t parse_count(const std::string& text);

// Reads `key=value` lines; blank lines and lines starting with '#' are skipped.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace relunet::cli
