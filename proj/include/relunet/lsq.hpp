#pragma once

#include <limits>

#include "relunet/types.hpp"

namespace relunet {

struct BoundedLsqResult {
    Vector x;
    double residual_norm = 0.0;  // ||A x - b||
    int iterations = 0;
    bool converged = false;
};

// min ||A x - b||^2 subject to lo <= x <= hi, by an active-set method
// (Lawson-Hanson generalized to two-sided bounds). Bounds may be infinite on
// one side but every variable needs at least one finite bound.
BoundedLsqResult bounded_least_squares(const Matrix& A, const Vector& b, const Vector& lo, const Vector& hi,
                                       int max_iterations = 0);

// min ||A x - b||^2 subject to x >= 0.
inline BoundedLsqResult nonnegative_least_squares(const Matrix& A, const Vector& b) {
    const auto n = A.cols();
    return bounded_least_squares(A, b, Vector::Zero(n),
                                 Vector::Constant(n, std::numeric_limits<double>::infinity()));
}

// Euclidean projection of v onto the polyhedral cone {z : G z >= 0}.
Vector project_polyhedral_cone(const Matrix& G, const Vector& v);

}  // namespace relunet
