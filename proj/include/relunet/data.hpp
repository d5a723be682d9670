#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "relunet/network.hpp"
#include "relunet/types.hpp"

namespace relunet {

enum class DatasetKind { GaussianTeacher, Orthogonal, Assumption1 };

std::string to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& text);

using TeacherNetwork = Network;

struct Dataset {
    Matrix points;  // n x d, one point per row
    Vector labels;  // n
    DatasetKind kind = DatasetKind::GaussianTeacher;
    std::uint64_t seed = 0;
    // Only meaningful for Assumption1 data.
    double eta = 0.0;
    double noise_std = 0.0;

    Eigen::Index n() const { return points.rows(); }
    Eigen::Index d() const { return points.cols(); }
    Vector point(Eigen::Index k) const { return points.row(k).transpose(); }
};

struct CovarianceSpectrum {
    Matrix H;
    Vector eigenvalues;   // ascending
    Matrix eigenvectors;  // columns, matching eigenvalues
    double mu_min = 0.0;
    double mu_max = 0.0;
    bool eigen_distinct = false;
    bool vstar_full_support = false;
};

struct GeneralPositionReport {
    bool general_position = false;
    bool has_zero_point = false;
    bool exhaustive = false;  // every d-subset checked (otherwise sampled)
    std::size_t subsets_checked = 0;
    double min_abs_det = 0.0;
};

// Fixed teacher direction (4/5) e1 + (3/5) e3 of the small-initialization setting.
Vector teacher_direction(Eigen::Index d);
// Unit centers xhat_1..xhat_d of the small-initialization setting, one per row.
Matrix assumption1_centers(Eigen::Index d);

TeacherNetwork random_teacher(Eigen::Index width, Eigen::Index d, Rng& rng);

Dataset gen_gaussian_teacher(Eigen::Index n, Eigen::Index d, Eigen::Index teacher_width, std::uint64_t seed);

// Labels come from `labeler`; points are a Haar-random orthonormal n-frame.
Dataset gen_orthogonal(Eigen::Index n, Eigen::Index d, const TeacherNetwork& labeler, std::uint64_t seed);

// Noisy, normalized copies of the centers with labels <v*, x_k>. Draws that
// violate x_k . xhat_k > 1 - eta are redrawn, at most 100 times.
Dataset gen_assumption1(Eigen::Index d, double eta, double noise_std, std::uint64_t seed);

CovarianceSpectrum covariance_spectrum(const Dataset& ds);

GeneralPositionReport validate_general_position(const Dataset& ds, std::uint64_t sample_seed = 0);

// CSV: one '#' metadata line, header `k,x_1,...,x_d,y`, 17 significant digits.
void write_dataset_csv(std::ostream& out, const Dataset& ds);
void write_dataset_csv(const std::string& path, const Dataset& ds);
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::string& path);

}  // namespace relunet
