#include "relunet/network.hpp"

#include <algorithm>
#include <cmath>

namespace relunet {

double Network::operator()(const Vector& x) const {
    double out = 0.0;
    for (Eigen::Index i = 0; i < width(); ++i) {
        const double z = W.row(i).dot(x);
        if (z > 0.0) out += a[i] * z;
    }
    return out;
}

Vector Network::outputs(const Matrix& points) const {
    Vector out(points.rows());
    for (Eigen::Index k = 0; k < points.rows(); ++k) out[k] = (*this)(points.row(k).transpose());
    return out;
}

double Network::balance_drift() const {
    double drift = 0.0;
    for (Eigen::Index i = 0; i < width(); ++i)
        drift = std::max(drift, std::abs(a[i] * a[i] - W.row(i).squaredNorm()));
    return drift;
}

double mean_squared_error(const Network& net, const Matrix& points, const Vector& labels) {
    return (net.outputs(points) - labels).squaredNorm() / static_cast<double>(points.rows());
}

double regularized_loss(const Network& net, const Matrix& points, const Vector& labels, double lambda) {
    return mean_squared_error(net, points, labels) + lambda * net.squared_norm();
}

Gradient loss_gradient(const Network& net, const Matrix& points, const Vector& labels, double lambda) {
    const auto n = points.rows();
    const Matrix pre = net.W * points.transpose();  // m x n
    Vector residual = Vector::Zero(n);               // f(x_k) - y_k
    for (Eigen::Index k = 0; k < n; ++k) {
        double out = 0.0;
        for (Eigen::Index i = 0; i < net.width(); ++i)
            if (pre(i, k) > 0.0) out += net.a[i] * pre(i, k);
        residual[k] = out - labels[k];
    }
    const double scale = 2.0 / static_cast<double>(n);
    Gradient g{2.0 * lambda * net.W, 2.0 * lambda * net.a};
    for (Eigen::Index i = 0; i < net.width(); ++i) {
        double ga = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (pre(i, k) <= 0.0) continue;
            const double c = scale * residual[k];
            ga += c * pre(i, k);
            g.W.row(i) += (c * net.a[i]) * points.row(k);
        }
        g.a[i] += ga;
    }
    return g;
}

}  // namespace relunet
