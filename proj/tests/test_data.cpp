#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "relunet/data.hpp"

using namespace relunet;

TEST_CASE("centers are unit vectors with the stated teacher correlations") {
    for (Eigen::Index d : {3, 4, 5, 8}) {
        const Matrix c = assumption1_centers(d);
        const Vector v = teacher_direction(d);
        CHECK(std::abs(v.norm() - 1.0) < 1e-15);
        for (Eigen::Index k = 0; k < d; ++k) CHECK(std::abs(c.row(k).norm() - 1.0) < 1e-15);
        CHECK(std::abs(v.dot(c.row(0).transpose()) - 0.8) < 1e-15);
        CHECK(std::abs(v.dot(c.row(1).transpose()) - 7.0 / 9.0) < 1e-15);
        for (Eigen::Index k = 3; k < d; ++k) CHECK(std::abs(v.dot(c.row(k).transpose()) - 32.0 / 45.0) < 1e-15);
    }
    CHECK_THROWS_AS(assumption1_centers(2), InvalidArgument);
}

TEST_CASE("assumption1 data stays close to the centers and is labeled by the teacher") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Dataset ds = gen_assumption1(4, 1e-3, 1e-3, seed);
        const Matrix c = assumption1_centers(4);
        const Vector v = teacher_direction(4);
        for (Eigen::Index k = 0; k < 4; ++k) {
            CHECK(std::abs(ds.points.row(k).norm() - 1.0) < 1e-14);
            CHECK(ds.points.row(k).dot(c.row(k)) > 1.0 - 1e-3);
            CHECK(ds.labels[k] == doctest::Approx(ds.point(k).dot(v)).epsilon(1e-14));
        }
    }
    const Dataset exact = gen_assumption1(5, 1e-3, 0.0, 1);
    CHECK((exact.points - assumption1_centers(5)).norm() == 0.0);
    CHECK_THROWS_AS(gen_assumption1(3, 0.0, 1e-3, 0), InvalidArgument);
}

TEST_CASE("orthogonal data is an orthonormal frame labeled by the teacher") {
    Rng rng = make_rng(3);
    const TeacherNetwork t = random_teacher(10, 20, rng);
    const Dataset ds = gen_orthogonal(8, 20, t, 4);
    CHECK(ds.n() == 8);
    CHECK(ds.d() == 20);
    CHECK((ds.points * ds.points.transpose() - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((ds.labels - t.outputs(ds.points)).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(gen_orthogonal(21, 20, t, 0), InvalidArgument);
}

TEST_CASE("generators are pure functions of the seed") {
    const Dataset a = gen_gaussian_teacher(6, 3, 10, 42);
    const Dataset b = gen_gaussian_teacher(6, 3, 10, 42);
    const Dataset c = gen_gaussian_teacher(6, 3, 10, 43);
    CHECK(a.points == b.points);
    CHECK(a.labels == b.labels);
    CHECK(a.points != c.points);
    CHECK(validate_general_position(a).general_position);
}

TEST_CASE("general position detects repeated directions") {
    Dataset ds = gen_gaussian_teacher(5, 2, 3, 1);
    CHECK(validate_general_position(ds).general_position);
    ds.points.row(3) = 2.0 * ds.points.row(1);
    CHECK_FALSE(validate_general_position(ds).general_position);
    ds.points.row(3).setZero();
    CHECK(validate_general_position(ds).has_zero_point);
}

TEST_CASE("dataset csv round trips bit for bit") {
    const Dataset ds = gen_assumption1(3, 1e-3, 1e-3, 9);
    std::stringstream s;
    write_dataset_csv(s, ds);
    const std::string first = s.str();
    const Dataset back = read_dataset_csv(s);
    CHECK(back.points == ds.points);
    CHECK(back.labels == ds.labels);
    CHECK(back.kind == ds.kind);
    CHECK(back.eta == ds.eta);
    std::stringstream again;
    write_dataset_csv(again, back);
    CHECK(again.str() == first);
    CHECK(first.find('\r') == std::string::npos);
}

TEST_CASE("covariance spectrum") {
    const Dataset ds = gen_assumption1(3, 1e-3, 1e-3, 2);
    const CovarianceSpectrum s = covariance_spectrum(ds);
    const Matrix H = ds.points.transpose() * ds.points / 3.0;
    CHECK((s.H - H).norm() < 1e-15);
    CHECK(s.mu_min > 0.0);
    CHECK(s.mu_min <= s.mu_max);
    CHECK(std::is_sorted(s.eigenvalues.data(), s.eigenvalues.data() + s.eigenvalues.size()));
    CHECK((s.H * s.eigenvectors - s.eigenvectors * s.eigenvalues.asDiagonal()).norm() < 1e-12);
    CHECK(s.vstar_full_support);
}

TEST_CASE("kind names parse back") {
    for (auto k : {DatasetKind::GaussianTeacher, DatasetKind::Orthogonal, DatasetKind::Assumption1})
        CHECK(parse_dataset_kind(to_string(k)) == k);
    CHECK_THROWS_AS(parse_dataset_kind("spiral"), InvalidArgument);
}
