#include "relunet/conic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "relunet/csv.hpp"
#include "relunet/lsq.hpp"

namespace relunet {

std::string to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::MaxIter: return "MaxIter";
        case SolveStatus::Infeasible: return "Infeasible";
    }
    return "Unknown";
}

namespace {

// Predictions only see beta through span{x_k}; components outside it cost
// norm and nothing else, so every solve runs in an orthonormal basis Q of
// the row space of X (beta = Q gamma).
struct Reduction {
    Matrix Q;  // d x r
    Matrix P;  // n x r, P = X Q
};

Reduction reduce(const Matrix& X) {
    Reduction red;
    const auto d = X.cols();
    if (X.rows() == 0 || X.norm() == 0.0) {
        red.Q = Matrix::Zero(d, 0);
        red.P = Matrix::Zero(X.rows(), 0);
        return red;
    }
    Eigen::JacobiSVD<Matrix> svd(X, Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    Eigen::Index r = 0;
    while (r < s.size() && s[r] > 1e-12 * s[0]) ++r;
    red.Q = svd.matrixV().leftCols(r);
    red.P = X * red.Q;
    return red;
}

struct Group {
    double eps = 1.0;
    Eigen::ArrayXd mask;  // n, 1 where the data bit is set
    Matrix G;             // n x r, row k = (+/-1) p_k
    Eigen::VectorXd row_norms;
};

class GroupLasso {
public:
    GroupLasso(const ConeProgram& cp, const Reduction& red) : red_(red), n_(cp.n) {
        const auto r = red.P.cols();
        groups_.reserve(cp.rows.size());
        for (const auto& row : cp.rows) {
            Group g;
            g.eps = row.sign_bit ? 1.0 : -1.0;
            g.mask.resize(n_);
            g.G.resize(n_, r);
            for (int k = 0; k < n_; ++k) {
                const bool on = bit(row.data_bits, k);
                g.mask[k] = on ? 1.0 : 0.0;
                g.G.row(k) = (on ? 1.0 : -1.0) * red.P.row(k);
            }
            g.row_norms = g.G.rowwise().norm();
            groups_.push_back(std::move(g));
        }
    }

    std::size_t size() const { return groups_.size(); }
    Eigen::Index dim() const { return red_.P.cols(); }

    Vector predict(const std::vector<Vector>& gamma, const std::vector<std::size_t>& idx) const {
        Vector pred = Vector::Zero(n_);
        for (auto i : idx) {
            if (gamma[i].isZero(0.0)) continue;
            const auto& g = groups_[i];
            pred.array() += g.eps * g.mask * (red_.P * gamma[i]).array();
        }
        return pred;
    }

    // Gradient of (1/n)||pred - target||^2 w.r.t. gamma_i, given rr = (2/n)(pred - target).
    Vector group_gradient(std::size_t i, const Vector& rr) const {
        const auto& g = groups_[i];
        return g.eps * (red_.P.transpose() * (g.mask * rr.array()).matrix());
    }

    Vector prox(std::size_t i, const Vector& v, double shrink) const {
        Vector p = project_polyhedral_cone(groups_[i].G, v);
        const double norm = p.norm();
        if (norm <= shrink) return Vector::Zero(v.size());
        return (1.0 - shrink / norm) * p;
    }

    // Distance of the group's optimality condition from being satisfied.
    double group_kkt(std::size_t i, const Vector& gamma, const Vector& q, double tau) const {
        const auto& g = groups_[i];
        const double norm = gamma.norm();
        if (norm == 0.0) {
            const double pk = project_polyhedral_cone(g.G, -q).norm();
            return std::max(0.0, pk - tau);
        }
        const Vector u = -(q + (tau / norm) * gamma);
        const Vector slack = g.G * gamma;
        std::vector<Eigen::Index> active;
        double violation = 0.0;
        for (Eigen::Index k = 0; k < slack.size(); ++k) {
            violation = std::max(violation, -slack[k]);
            if (slack[k] <= 1e-9 * g.row_norms[k] * norm) active.push_back(k);
        }
        if (active.empty()) return std::max(violation, u.norm());
        Matrix GA(static_cast<Eigen::Index>(active.size()), gamma.size());
        for (std::size_t j = 0; j < active.size(); ++j) GA.row(static_cast<Eigen::Index>(j)) = g.G.row(active[j]);
        return std::max(violation, project_polyhedral_cone(GA, u).norm());
    }

    double lipschitz(const std::vector<std::size_t>& idx) const {
        if (idx.empty() || dim() == 0) return 0.0;
        Matrix cover = Matrix::Zero(n_, n_);
        for (auto i : idx) cover += groups_[i].mask.matrix() * groups_[i].mask.matrix().transpose();
        const Matrix S = (red_.P * red_.P.transpose()).cwiseProduct(cover);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(S, Eigen::EigenvaluesOnly);
        return 2.0 / n_ * std::max(0.0, eig.eigenvalues().maxCoeff());
    }

    struct RunResult {
        bool converged = false;
        int iterations = 0;
        double kkt = 0.0;
    };

    // Accelerated proximal gradient with adaptive restart over the groups in idx.
    RunResult fista(const std::vector<std::size_t>& idx, std::vector<Vector>& gamma, const Vector& target, double tau,
                    double tol_abs, int budget) const {
        RunResult rr;
        const double L = lipschitz(idx);
        if (L == 0.0) {
            rr.converged = true;
            return rr;
        }
        const double step = 1.0 / L;
        std::vector<Vector> x(gamma), z(gamma), x_prev(gamma);
        double t = 1.0;
        const double scale_n = 2.0 / n_;
        for (rr.iterations = 1; rr.iterations <= budget; ++rr.iterations) {
            const Vector resid = scale_n * (predict(z, idx) - target);
            double restart_dot = 0.0;
            for (auto i : idx) {
                x_prev[i] = x[i];
                x[i] = prox(i, z[i] - step * group_gradient(i, resid), step * tau);
                restart_dot += (z[i] - x[i]).dot(x[i] - x_prev[i]);
            }
            if (restart_dot > 0.0) {
                t = 1.0;
                for (auto i : idx) z[i] = x[i];
            } else {
                const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
                const double mom = (t - 1.0) / t_next;
                for (auto i : idx) z[i] = x[i] + mom * (x[i] - x_prev[i]);
                t = t_next;
            }
            if (rr.iterations % 10 == 0 || rr.iterations == budget) {
                rr.kkt = kkt(idx, x, target, tau);
                if (rr.kkt <= tol_abs) {
                    rr.converged = true;
                    break;
                }
            }
        }
        if (rr.iterations > budget) rr.iterations = budget;
        gamma = std::move(x);
        return rr;
    }

    double kkt(const std::vector<std::size_t>& idx, const std::vector<Vector>& gamma, const Vector& target,
               double tau) const {
        const Vector resid = (2.0 / n_) * (predict(gamma, idx) - target);
        double worst = 0.0;
        for (auto i : idx) worst = std::max(worst, group_kkt(i, gamma[i], group_gradient(i, resid), tau));
        return worst;
    }

    // Working-set solve over all groups: only groups that violate the zero
    // optimality condition enter the accelerated solver.
    RunResult solve_all(std::vector<Vector>& gamma, const Vector& target, double tau, double tol_abs,
                        int budget) const {
        RunResult total;
        std::vector<std::size_t> all(size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        std::vector<char> in_set(size(), 0);
        std::vector<std::size_t> working;
        for (std::size_t i = 0; i < size(); ++i)
            if (!gamma[i].isZero(0.0)) {
                in_set[i] = 1;
                working.push_back(i);
            }
        for (int round = 0; round < 1000; ++round) {
            const Vector resid = (2.0 / n_) * (predict(gamma, working) - target);
            std::vector<std::pair<double, std::size_t>> violators;
            for (std::size_t i = 0; i < size(); ++i) {
                if (in_set[i]) continue;
                const double v = group_kkt(i, gamma[i], group_gradient(i, resid), tau);
                if (v > 0.5 * tol_abs) violators.emplace_back(v, i);
            }
            if (violators.empty() && round > 0) {
                total.converged = true;
                break;
            }
            std::sort(violators.begin(), violators.end(), std::greater<>());
            const std::size_t add = std::min<std::size_t>(violators.size(), std::max<std::size_t>(8, working.size()));
            for (std::size_t j = 0; j < add; ++j) {
                in_set[violators[j].second] = 1;
                working.push_back(violators[j].second);
            }
            std::sort(working.begin(), working.end());
            const RunResult inner = fista(working, gamma, target, tau, 0.5 * tol_abs, budget - total.iterations);
            total.iterations += inner.iterations;
            if (!inner.converged) break;
            if (add == 0) {
                total.converged = true;
                break;
            }
        }
        total.kkt = kkt(all, gamma, target, tau);
        total.converged = total.converged && total.kkt <= tol_abs;
        return total;
    }

private:
    const Reduction& red_;
    int n_;
    std::vector<Group> groups_;
};

double data_scale(const Vector& y) { return 1.0 + (y.size() ? y.cwiseAbs().maxCoeff() : 0.0); }

}  // namespace

ConeProgram build_cone_program(const ActivationMatrix& A, const Dataset& ds, double lambda, ObjectiveKind kind) {
    if (A.rows.empty()) throw InvalidArgument("build_cone_program: empty activation matrix");
    if (A.n != ds.n()) throw InvalidArgument("build_cone_program: activation matrix does not match dataset size");
    if (kind == ObjectiveKind::Regularized && !(lambda > 0.0))
        throw InvalidArgument("build_cone_program: lambda must be > 0 for the regularized objective");
    if (lambda < 0.0) throw InvalidArgument("build_cone_program: lambda must be >= 0");
    ConeProgram cp;
    cp.n = A.n;
    cp.points = ds.points;
    cp.labels = ds.labels;
    cp.lambda = lambda;
    cp.kind = kind;
    std::map<NeuronPattern, std::size_t> seen;
    for (std::size_t j = 0; j < A.rows.size(); ++j) {
        auto [it, inserted] = seen.emplace(A.rows[j], cp.rows.size());
        if (inserted) {
            cp.rows.push_back(A.rows[j]);
            cp.first_source.push_back(j);
        }
        cp.row_of.push_back(it->second);
    }
    return cp;
}

Vector model_outputs(const ConeProgram& cp, const std::vector<Vector>& beta) {
    Vector out = Vector::Zero(cp.n);
    for (std::size_t i = 0; i < cp.rows.size(); ++i) {
        const double eps = cp.rows[i].sign_bit ? 1.0 : -1.0;
        for (int k = 0; k < cp.n; ++k)
            if (bit(cp.rows[i].data_bits, k)) out[k] += eps * cp.points.row(k).dot(beta[i]);
    }
    return out;
}

double cone_objective(const ConeProgram& cp, const std::vector<Vector>& beta) {
    double group_norm = 0.0;
    for (const auto& b : beta) group_norm += b.norm();
    if (cp.kind == ObjectiveKind::MinNorm) return 2.0 * group_norm;
    const double mse = (model_outputs(cp, beta) - cp.labels).squaredNorm() / cp.n;
    return mse + 2.0 * cp.lambda * group_norm;
}

double feasibility_violation(const ConeProgram& cp, const std::vector<Vector>& beta) {
    double worst = 0.0;
    for (std::size_t i = 0; i < cp.rows.size(); ++i)
        for (int k = 0; k < cp.n; ++k) {
            const double z = cp.points.row(k).dot(beta[i]);
            worst = std::max(worst, bit(cp.rows[i].data_bits, k) ? -z : z);
        }
    return worst;
}

SolveResult solve(const ConeProgram& cp, const SolverOptions& opts) {
    if (!(opts.tol > 0.0)) throw InvalidArgument("solve: tol must be > 0");
    const Reduction red = reduce(cp.points);
    const GroupLasso gl(cp, red);
    const auto r = red.P.cols();
    const double scale = data_scale(cp.labels);
    const double tol_abs = opts.tol * scale;
    std::vector<Vector> gamma(cp.rows.size(), Vector::Zero(r));

    SolveResult out;
    out.rows = cp.rows;

    if (cp.kind == ObjectiveKind::Regularized) {
        const auto run = gl.solve_all(gamma, cp.labels, 2.0 * cp.lambda, tol_abs, opts.max_iterations);
        out.iterations = run.iterations;
        out.kkt_residual = run.kkt / scale;
        out.status = run.converged ? SolveStatus::Optimal : SolveStatus::MaxIter;
    } else {
        // Best cone-constrained fit first: the interpolation constraint is
        // infeasible exactly when this residual stays away from zero.
        std::vector<Vector> fit(cp.rows.size(), Vector::Zero(r));
        std::vector<std::size_t> all(cp.rows.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        const auto ls = gl.fista(all, fit, cp.labels, 0.0, 1e-3 * tol_abs, opts.max_iterations);
        int used = ls.iterations;
        const Vector fit_resid = gl.predict(fit, all) - cp.labels;
        if (fit_resid.cwiseAbs().maxCoeff() > 1e-6 * scale) {
            out.status = SolveStatus::Infeasible;
            out.iterations = used;
            out.kkt_residual = fit_resid.cwiseAbs().maxCoeff() / scale;
            out.beta.assign(cp.rows.size(), Vector::Zero(cp.points.cols()));
            out.objective_value = std::numeric_limits<double>::infinity();
            return out;
        }
        // Augmented Lagrangian on the interpolation constraint.
        Vector multiplier = Vector::Zero(cp.n);
        double rho = 1.0;
        double prev_violation = std::numeric_limits<double>::infinity();
        bool done = false;
        double kkt_scaled = 0.0;
        for (int outer = 0; outer < 200 && used < opts.max_iterations; ++outer) {
            const Vector target = cp.labels - multiplier / rho;
            const double tau = 2.0 / (rho * cp.n);
            // Inner tolerance in the units of the scaled subproblem.
            const double inner_tol = 0.1 * tol_abs * tau;
            const auto run = gl.solve_all(gamma, target, tau, inner_tol, opts.max_iterations - used);
            used += run.iterations;
            const Vector violation = gl.predict(gamma, all) - cp.labels;
            multiplier += rho * violation;
            const double vmax = violation.cwiseAbs().maxCoeff();
            kkt_scaled = std::max(vmax, run.kkt / tau) / scale;
            if (run.converged && vmax <= tol_abs) {
                done = true;
                break;
            }
            if (vmax > 0.25 * prev_violation) rho *= 4.0;
            prev_violation = vmax;
        }
        out.iterations = used;
        out.kkt_residual = kkt_scaled;
        out.status = done ? SolveStatus::Optimal : SolveStatus::MaxIter;
    }

    out.beta.reserve(gamma.size());
    for (const auto& g : gamma) out.beta.push_back(r > 0 ? Vector(red.Q * g) : Vector::Zero(cp.points.cols()));
    out.objective_value = cone_objective(cp, out.beta);
    return out;
}

Network recover_network(const SolveResult& sr, std::size_t m, const std::vector<std::size_t>& slot) {
    if (m < sr.beta.size()) throw InvalidArgument("recover_network: width smaller than number of rows");
    if (slot.size() != sr.beta.size()) throw InvalidArgument("recover_network: slot map size mismatch");
    const auto d = sr.beta.empty() ? 0 : sr.beta.front().size();
    Network net = Network::zeros(static_cast<Eigen::Index>(m), d);
    std::vector<char> used(m, 0);
    for (std::size_t i = 0; i < sr.beta.size(); ++i) {
        if (slot[i] >= m || used[slot[i]]) throw InvalidArgument("recover_network: invalid slot map");
        used[slot[i]] = 1;
        const double norm = sr.beta[i].norm();
        if (norm == 0.0) continue;
        const double root = std::sqrt(norm);
        const auto s = static_cast<Eigen::Index>(slot[i]);
        net.W.row(s) = (sr.beta[i] / root).transpose();
        net.a[s] = sr.rows[i].sign_bit ? root : -root;
    }
    return net;
}

Network recover_network(const SolveResult& sr) {
    std::vector<std::size_t> slot(sr.beta.size());
    std::iota(slot.begin(), slot.end(), std::size_t{0});
    return recover_network(sr, sr.beta.size(), slot);
}

ConeProgram global_program(const Dataset& ds, double lambda, ObjectiveKind kind) {
    const PatternSet ps = enumerate_patterns(ds);
    ActivationMatrix A;
    A.n = ps.n;
    for (auto bits : ps.patterns) {
        A.rows.push_back(NeuronPattern{bits, true});
        A.rows.push_back(NeuronPattern{bits, false});
    }
    return build_cone_program(A, ds, lambda, kind);
}

SolveResult global_optimum(const Dataset& ds, double lambda, ObjectiveKind kind, const SolverOptions& opts) {
    return solve(global_program(ds, lambda, kind), opts);
}

StationarityReport stationarity_check(const Network& net, const Dataset& ds, double lambda,
                                      const StationarityOptions& opts) {
    const auto n = ds.n();
    const auto d = ds.d();
    const auto m = net.width();
    if (net.dim() != d) throw InvalidArgument("stationarity_check: network dimension mismatch");
    StationarityReport rep;

    const Matrix pre = net.W * ds.points.transpose();  // m x n
    Vector residual(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        double f = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) f += net.a[i] * std::max(0.0, pre(i, k));
        residual[k] = f - ds.labels[k];
    }
    const double c = 2.0 / static_cast<double>(n);

    // Parameters of zero neurons have zero gradient whatever the tunable
    // derivatives are, so only nonzero neurons enter the least-squares problem.
    std::vector<Eigen::Index> live;
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index k = 0; k < n; ++k)
            if (std::abs(pre(i, k)) <= opts.boundary_tol) ++rep.boundary_count;
        if (net.a[i] != 0.0 || !net.W.row(i).isZero(0.0)) live.push_back(i);
    }
    const auto block = d + 1;
    const auto rows = static_cast<Eigen::Index>(live.size()) * block;
    Vector g0 = Vector::Zero(rows);
    std::vector<Vector> columns;
    for (std::size_t li = 0; li < live.size(); ++li) {
        const auto i = live[li];
        const auto off = static_cast<Eigen::Index>(li) * block;
        double ga = 2.0 * lambda * net.a[i];
        Vector gw = 2.0 * lambda * net.W.row(i).transpose();
        for (Eigen::Index k = 0; k < n; ++k) {
            const double z = pre(i, k);
            ga += c * residual[k] * std::max(0.0, z);
            const Vector contrib = (c * residual[k] * net.a[i]) * ds.point(k);
            if (z > opts.boundary_tol) {
                gw += contrib;
            } else if (z >= -opts.boundary_tol && !contrib.isZero(0.0)) {
                Vector col = Vector::Zero(rows);
                col.segment(off, d) = contrib;
                columns.push_back(std::move(col));
            }
        }
        g0.segment(off, d) = gw;
        g0[off + d] = ga;
    }
    rep.tunable_count = columns.size();
    Vector g = g0;
    if (!columns.empty()) {
        Matrix J(rows, static_cast<Eigen::Index>(columns.size()));
        for (std::size_t j = 0; j < columns.size(); ++j) J.col(static_cast<Eigen::Index>(j)) = columns[j];
        const auto q = static_cast<Eigen::Index>(columns.size());
        const auto bl = bounded_least_squares(J, -g0, Vector::Zero(q), Vector::Ones(q));
        g = g0 + J * bl.x;
    }
    rep.min_grad_inf_norm = rows > 0 ? g.cwiseAbs().maxCoeff() : 0.0;
    rep.is_stationary = rep.min_grad_inf_norm < opts.grad_tol;
    return rep;
}

void write_solve_result_csv(std::ostream& out, const SolveResult& sr, int n) {
    out << "# " << csv::format(sr.objective_value) << ',' << csv::format(sr.kkt_residual) << ','
        << to_string(sr.status) << '\n';
    const auto d = sr.beta.empty() ? 0 : sr.beta.front().size();
    out << "row_bits,sign";
    for (Eigen::Index j = 0; j < d; ++j) out << ",beta_" << (j + 1);
    out << '\n';
    for (std::size_t i = 0; i < sr.rows.size(); ++i) {
        out << bits_to_string(sr.rows[i].data_bits, n) << ',' << (sr.rows[i].sign_bit ? 1 : 0);
        for (Eigen::Index j = 0; j < d; ++j) out << ',' << csv::format(sr.beta[i][j]);
        out << '\n';
    }
}

}  // namespace relunet
