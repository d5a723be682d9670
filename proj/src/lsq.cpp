#include "relunet/lsq.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace relunet {

namespace {

enum class VarState { Free, AtLower, AtUpper };

}  // namespace

BoundedLsqResult bounded_least_squares(const Matrix& A, const Vector& b, const Vector& lo, const Vector& hi,
                                       int max_iterations) {
    const auto m = A.rows();
    const auto n = A.cols();
    if (b.size() != m || lo.size() != n || hi.size() != n)
        throw InvalidArgument("bounded_least_squares: dimension mismatch");
    if (max_iterations <= 0) max_iterations = static_cast<int>(30 * (n + 1));

    BoundedLsqResult res;
    res.x.resize(n);
    std::vector<VarState> state(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        if (lo[j] > hi[j]) throw InvalidArgument("bounded_least_squares: lo > hi");
        if (std::isfinite(lo[j])) {
            res.x[j] = lo[j];
            state[static_cast<std::size_t>(j)] = VarState::AtLower;
        } else if (std::isfinite(hi[j])) {
            res.x[j] = hi[j];
            state[static_cast<std::size_t>(j)] = VarState::AtUpper;
        } else {
            throw InvalidArgument("bounded_least_squares: variable without finite bound");
        }
    }
    if (n == 0) {
        res.residual_norm = b.norm();
        res.converged = true;
        return res;
    }

    const double tol = 1e-13 * std::max(1.0, A.norm() * std::max(b.norm(), 1e-300));
    std::vector<char> skip(static_cast<std::size_t>(n), 0);

    for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
        const Vector w = A.transpose() * (b - A * res.x);
        Eigen::Index best = -1;
        double best_violation = tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto s = state[static_cast<std::size_t>(j)];
            if (s == VarState::Free || skip[static_cast<std::size_t>(j)] || lo[j] == hi[j]) continue;
            const double v = s == VarState::AtLower ? w[j] : -w[j];
            if (v > best_violation) {
                best_violation = v;
                best = j;
            }
        }
        if (best < 0) {
            res.converged = true;
            break;
        }
        const auto entered_from = state[static_cast<std::size_t>(best)];
        state[static_cast<std::size_t>(best)] = VarState::Free;

        bool progressed = false;
        for (int inner = 0; inner <= n; ++inner) {
            std::vector<Eigen::Index> free_idx;
            for (Eigen::Index j = 0; j < n; ++j)
                if (state[static_cast<std::size_t>(j)] == VarState::Free) free_idx.push_back(j);
            if (free_idx.empty()) break;
            const auto nf = static_cast<Eigen::Index>(free_idx.size());
            Matrix Af(m, nf);
            Vector rhs = b;
            for (Eigen::Index c = 0; c < nf; ++c) Af.col(c) = A.col(free_idx[static_cast<std::size_t>(c)]);
            for (Eigen::Index j = 0; j < n; ++j)
                if (state[static_cast<std::size_t>(j)] != VarState::Free) rhs -= A.col(j) * res.x[j];
            const Vector z = Af.completeOrthogonalDecomposition().solve(rhs);

            if (!progressed) {
                // The entering variable must move off its bound in the improving direction.
                Eigen::Index pos = 0;
                while (free_idx[static_cast<std::size_t>(pos)] != best) ++pos;
                const double zb = z[pos];
                const bool wrong = entered_from == VarState::AtLower ? zb <= lo[best] : zb >= hi[best];
                if (wrong) {
                    state[static_cast<std::size_t>(best)] = entered_from;
                    skip[static_cast<std::size_t>(best)] = 1;
                    break;
                }
            }

            double alpha = 1.0;
            for (Eigen::Index c = 0; c < nf; ++c) {
                const auto j = free_idx[static_cast<std::size_t>(c)];
                const double x0 = res.x[j];
                if (z[c] <= lo[j] && z[c] < x0) alpha = std::min(alpha, (lo[j] - x0) / (z[c] - x0));
                if (z[c] >= hi[j] && z[c] > x0) alpha = std::min(alpha, (hi[j] - x0) / (z[c] - x0));
            }
            alpha = std::clamp(alpha, 0.0, 1.0);
            for (Eigen::Index c = 0; c < nf; ++c) {
                const auto j = free_idx[static_cast<std::size_t>(c)];
                res.x[j] += alpha * (z[c] - res.x[j]);
            }
            progressed = true;
            std::fill(skip.begin(), skip.end(), 0);
            if (alpha >= 1.0) {
                bool clean = true;
                for (auto j : free_idx) {
                    if (res.x[j] <= lo[j]) { res.x[j] = lo[j]; state[static_cast<std::size_t>(j)] = VarState::AtLower; clean = false; }
                    else if (res.x[j] >= hi[j]) { res.x[j] = hi[j]; state[static_cast<std::size_t>(j)] = VarState::AtUpper; clean = false; }
                }
                if (clean) break;
                continue;
            }
            // Pin every free variable that reached a bound.
            for (auto j : free_idx) {
                const double span = std::max(1.0, std::abs(res.x[j]));
                if (res.x[j] <= lo[j] + 1e-15 * span) {
                    res.x[j] = lo[j];
                    state[static_cast<std::size_t>(j)] = VarState::AtLower;
                } else if (res.x[j] >= hi[j] - 1e-15 * span) {
                    res.x[j] = hi[j];
                    state[static_cast<std::size_t>(j)] = VarState::AtUpper;
                }
            }
        }
    }
    res.residual_norm = (A * res.x - b).norm();
    return res;
}

Vector project_polyhedral_cone(const Matrix& G, const Vector& v) {
    if (G.cols() != v.size()) throw InvalidArgument("project_polyhedral_cone: dimension mismatch");
    if (G.rows() == 0 || (G * v).minCoeff() >= 0.0) return v;
    // Moreau: v = P_K(v) + P_polar(v), and the polar cone is {-G^T mu : mu >= 0}.
    const auto dual = nonnegative_least_squares(G.transpose(), -v);
    Vector p = v + G.transpose() * dual.x;
    return p;
}

}  // namespace relunet
