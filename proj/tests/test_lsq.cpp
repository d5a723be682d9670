#include <doctest.h>

#include <cmath>
#include <limits>

#include "relunet/linprog.hpp"
#include "relunet/lsq.hpp"

using namespace relunet;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = gaussian(rng);
    return m;
}

// Exhaustive oracle: each variable is free, at its lower bound or at its upper bound.
double box_lsq_bruteforce(const Matrix& A, const Vector& b, const Vector& lo, const Vector& hi) {
    const auto n = A.cols();
    double best = std::numeric_limits<double>::infinity();
    int total = 1;
    for (int j = 0; j < n; ++j) total *= 3;
    for (int code = 0; code < total; ++code) {
        Vector x = Vector::Zero(n);
        std::vector<Eigen::Index> free;
        int c = code;
        for (Eigen::Index j = 0; j < n; ++j, c /= 3) {
            if (c % 3 == 0) free.push_back(j);
            else x[j] = c % 3 == 1 ? lo[j] : hi[j];
        }
        Vector r = b - A * x;
        if (!free.empty()) {
            Matrix Af(A.rows(), static_cast<Eigen::Index>(free.size()));
            for (std::size_t t = 0; t < free.size(); ++t) Af.col(static_cast<Eigen::Index>(t)) = A.col(free[t]);
            const Vector z = Af.colPivHouseholderQr().solve(r);
            for (std::size_t t = 0; t < free.size(); ++t) x[free[t]] = z[static_cast<Eigen::Index>(t)];
        }
        if (((x - lo).array() < -1e-12).any() || ((x - hi).array() > 1e-12).any()) continue;
        best = std::min(best, (A * x - b).norm());
    }
    return best;
}

}  // namespace

TEST_CASE("bounded least squares matches the exhaustive active-set oracle") {
    Rng rng = make_rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(trial % 4);
        const Eigen::Index r = n + 1 + static_cast<Eigen::Index>(trial % 3);
        const Matrix A = random_matrix(r, n, rng);
        const Vector b = random_matrix(r, 1, rng);
        const Vector lo = Vector::Zero(n);
        const Vector hi = Vector::Constant(n, 0.5);
        const BoundedLsqResult res = bounded_least_squares(A, b, lo, hi);
        CHECK(res.converged);
        CHECK(((res.x - lo).array() >= -1e-15).all());
        CHECK(((res.x - hi).array() <= 1e-15).all());
        CHECK(res.residual_norm == doctest::Approx(box_lsq_bruteforce(A, b, lo, hi)).epsilon(1e-9));
    }
}

TEST_CASE("nonnegative least squares satisfies the KKT conditions") {
    Rng rng = make_rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix A = random_matrix(8, 5, rng);
        const Vector b = random_matrix(8, 1, rng);
        const BoundedLsqResult res = nonnegative_least_squares(A, b);
        REQUIRE(res.converged);
        const Vector g = A.transpose() * (A * res.x - b);
        for (Eigen::Index j = 0; j < 5; ++j) {
            CHECK(res.x[j] >= 0.0);
            if (res.x[j] > 0.0) CHECK(std::abs(g[j]) < 1e-10);
            else CHECK(g[j] > -1e-10);
        }
    }
}

TEST_CASE("cone projection satisfies the Moreau conditions") {
    Rng rng = make_rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix G = random_matrix(4, 3, rng);
        const Vector v = random_matrix(3, 1, rng);
        const Vector z = project_polyhedral_cone(G, v);
        CHECK((G * z).minCoeff() > -1e-12);
        CHECK(std::abs((v - z).dot(z)) < 1e-12);
        // v - z lies in the polar cone: it has nonpositive inner product with feasible directions.
        for (int s = 0; s < 20; ++s) {
            const Vector p = project_polyhedral_cone(G, random_matrix(3, 1, rng));
            CHECK((v - z).dot(p) < 1e-10);
        }
    }
    const Matrix G = Matrix::Identity(2, 2);
    const Vector v = (Vector(2) << 1.0, -2.0).finished();
    const Vector z = project_polyhedral_cone(G, v);
    CHECK(z[0] == doctest::Approx(1.0));
    CHECK(std::abs(z[1]) < 1e-15);
}

TEST_CASE("simplex solves a textbook LP") {
    // max 3x + 5y  s.t.  x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), value 36.
    Matrix A(3, 2);
    A << 1, 0, 0, 2, 3, 2;
    const Vector b = (Vector(3) << 4, 12, 18).finished();
    const Vector c = (Vector(2) << 3, 5).finished();
    const LpResult r = simplex_maximize(A, b, c);
    REQUIRE(r.optimal);
    CHECK(r.value == doctest::Approx(36.0));
    CHECK(r.z[0] == doctest::Approx(2.0));
    CHECK(r.z[1] == doctest::Approx(6.0));
    const LpResult u = simplex_maximize(Matrix::Zero(1, 1), Vector::Ones(1), Vector::Ones(1));
    CHECK(u.unbounded);
}

TEST_CASE("margin witness separates realizable sign patterns only") {
    Matrix rows(2, 2);
    rows << 1, 0, 0, 1;
    Eigen::VectorXi s(2);
    s << 1, -1;
    const MarginWitness w = max_margin_witness(rows, s);
    CHECK(w.feasible);
    CHECK(w.w[0] > 0.0);
    CHECK(w.w[1] < 0.0);
    Matrix same(2, 2);
    same << 1, 0, -1, 0;
    Eigen::VectorXi both(2);
    both << 1, 1;
    CHECK_FALSE(max_margin_witness(same, both).feasible);
}
