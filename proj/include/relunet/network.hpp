#pragma once

#include "relunet/types.hpp"

namespace relunet {

// Two-layer ReLU network x -> a^T relu(W x). Row i of W is neuron w_i.
struct Network {
    Matrix W;  // m x d
    Vector a;  // m

    Network() = default;
    Network(Matrix w, Vector out) : W(std::move(w)), a(std::move(out)) {
        if (W.rows() != a.size()) throw InvalidArgument("Network: W rows must match a size");
    }
    static Network zeros(Eigen::Index width, Eigen::Index dim) {
        return Network(Matrix::Zero(width, dim), Vector::Zero(width));
    }

    Eigen::Index width() const { return a.size(); }
    Eigen::Index dim() const { return W.cols(); }

    double operator()(const Vector& x) const;
    // One output per row of `points` (n x d).
    Vector outputs(const Matrix& points) const;
    // ||theta||^2 = ||W||_F^2 + ||a||^2.
    double squared_norm() const { return W.squaredNorm() + a.squaredNorm(); }
    // max_i |a_i^2 - ||w_i||^2|
    double balance_drift() const;
};

struct Gradient {
    Matrix W;
    Vector a;
    double squared_norm() const { return W.squaredNorm() + a.squaredNorm(); }
};

// (1/n) sum_k (f(x_k) - y_k)^2
double mean_squared_error(const Network& net, const Matrix& points, const Vector& labels);

// mse + lambda * ||theta||^2
double regularized_loss(const Network& net, const Matrix& points, const Vector& labels, double lambda);

// Gradient of the regularized loss with the ReLU derivative taken as 1[z > 0],
// so that a neuron exactly on a hyperplane gets derivative 0 there.
Gradient loss_gradient(const Network& net, const Matrix& points, const Vector& labels, double lambda);

}  // namespace relunet
