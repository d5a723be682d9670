#include "relunet/linprog.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace relunet {

LpResult simplex_maximize(const Matrix& A, const Vector& b, const Vector& c, int max_pivots) {
    const auto m = A.rows();
    const auto n = A.cols();
    if (b.size() != m || c.size() != n) throw InvalidArgument("simplex_maximize: dimension mismatch");
    if (m > 0 && b.minCoeff() < 0.0) throw InvalidArgument("simplex_maximize: requires b >= 0");

    // Columns: n structural, m slack, then rhs. Last row holds reduced costs.
    Matrix T = Matrix::Zero(m + 1, n + m + 1);
    T.topLeftCorner(m, n) = A;
    T.block(0, n, m, m).setIdentity();
    T.topRightCorner(m, 1) = b;
    T.bottomLeftCorner(1, n) = -c.transpose();
    std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;

    constexpr double eps = 1e-12;
    LpResult res;
    for (int pivot = 0; pivot < max_pivots; ++pivot) {
        Eigen::Index enter = -1;
        for (Eigen::Index j = 0; j < n + m; ++j)
            if (T(m, j) < -eps) {
                enter = j;
                break;
            }
        if (enter < 0) {
            res.optimal = true;
            break;
        }
        Eigen::Index leave = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (T(i, enter) <= eps) continue;
            const double ratio = T(i, n + m) / T(i, enter);
            if (leave < 0 || ratio < best_ratio - eps) {
                best_ratio = ratio;
                leave = i;
            } else if (ratio <= best_ratio + eps &&
                       basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)]) {
                best_ratio = std::min(best_ratio, ratio);
                leave = i;
            }
        }
        if (leave < 0) {
            res.unbounded = true;
            break;
        }
        T.row(leave) /= T(leave, enter);
        for (Eigen::Index i = 0; i <= m; ++i) {
            if (i == leave || T(i, enter) == 0.0) continue;
            T.row(i) -= T(i, enter) * T.row(leave);
        }
        basis[static_cast<std::size_t>(leave)] = enter;
    }
    res.z = Vector::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto j = basis[static_cast<std::size_t>(i)];
        if (j < n) res.z[j] = T(i, n + m);
    }
    res.value = c.dot(res.z);
    return res;
}

MarginWitness max_margin_witness(const Matrix& rows, const Eigen::VectorXi& signs) {
    const auto r = rows.rows();
    const auto d = rows.cols();
    if (signs.size() != r) throw InvalidArgument("max_margin_witness: signs size mismatch");
    // Variables (w+, w-, t) >= 0; w = w+ - w-.
    const auto nv = 2 * d + 1;
    const auto nc = r + 2 * d + 1;
    Matrix A = Matrix::Zero(nc, nv);
    Vector b = Vector::Zero(nc);
    for (Eigen::Index j = 0; j < r; ++j) {
        const double norm = rows.row(j).norm();
        if (norm == 0.0) throw InvalidArgument("max_margin_witness: zero constraint row");
        const Eigen::RowVectorXd unit = rows.row(j) / norm * static_cast<double>(signs[j]);
        A.block(j, 0, 1, d) = -unit;
        A.block(j, d, 1, d) = unit;
        A(j, 2 * d) = 1.0;
    }
    for (Eigen::Index i = 0; i < 2 * d; ++i) {
        A(r + i, i) = 1.0;
        b[r + i] = 1.0;
    }
    A(r + 2 * d, 2 * d) = 1.0;
    b[r + 2 * d] = 1.0;
    Vector c = Vector::Zero(nv);
    c[2 * d] = 1.0;

    const LpResult lp = simplex_maximize(A, b, c);
    MarginWitness out;
    out.w = lp.z.head(d) - lp.z.segment(d, d);
    if (r == 0) {
        out.margin = 1.0;
        if (out.w.isZero()) out.w = Vector::Unit(d, 0);
        out.feasible = true;
        return out;
    }
    out.margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < r; ++j)
        out.margin = std::min(out.margin, signs[j] * rows.row(j).dot(out.w) / rows.row(j).norm());
    out.feasible = lp.optimal && out.margin > 1e-12;
    return out;
}

}  // namespace relunet
