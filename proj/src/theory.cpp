#include "relunet/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "relunet/csv.hpp"

namespace relunet {

namespace {

BoundReport report(std::string name, double bound, double empirical, bool satisfied, std::string note = {}) {
    BoundReport r;
    r.name = std::move(name);
    r.bound_value = bound;
    r.empirical_value = empirical;
    r.satisfied = satisfied;
    r.note = std::move(note);
    return r;
}

void finish_u_star(UStar& us, const Matrix& H, const Vector& v, double lambda) {
    const Vector h = H * (v - us.u);
    us.norm_residual = std::abs(h.norm() - lambda);
    const double hn = h.norm();
    const double un = us.u.norm();
    us.align_residual = hn > 0.0 && un > 0.0 ? std::abs(us.u.dot(h) / (un * hn) - 1.0) : 1.0;
}

}  // namespace

Matrix dual_basis(const Matrix& X) {
    if (X.rows() != X.cols() || X.rows() == 0) throw InvalidArgument("dual_basis: X must be square and nonempty");
    Eigen::JacobiSVD<Matrix> svd(X);
    const Vector& s = svd.singularValues();
    if (s[s.size() - 1] == 0.0 || s[0] / s[s.size() - 1] >= 1e12)
        throw InvalidArgument("dual_basis: data matrix is singular or too ill-conditioned");
    return X.fullPivLu().inverse();
}

double cos_angle(const Vector& u, const Vector& v) {
    const double denom = u.norm() * v.norm();
    if (denom == 0.0) throw InvalidArgument("cos_angle: zero vector");
    return std::clamp(u.dot(v) / denom, -1.0, 1.0);
}

double sin_angle(const Vector& u, const Vector& v) {
    // Component of u orthogonal to v, relative to |u|; stable for small angles.
    const double un = u.norm();
    const double vn = v.norm();
    if (un == 0.0 || vn == 0.0) throw InvalidArgument("sin_angle: zero vector");
    const Vector vb = v / vn;
    return std::min(1.0, (u - u.dot(vb) * vb).norm() / un);
}

UStar compute_u_star(const Matrix& H, const Vector& v_star, double lambda) {
    if (!(lambda > 0.0)) throw InvalidArgument("compute_u_star: lambda must be > 0");
    if (H.rows() != H.cols() || H.rows() != v_star.size()) throw InvalidArgument("compute_u_star: size mismatch");
    UStar us;
    const Vector hv = H * v_star;
    if (lambda >= hv.norm()) {
        us.u = Vector::Zero(v_star.size());
        return us;
    }
    us.nonzero = true;
    const auto d = v_star.size();
    const Matrix I = Matrix::Identity(d, d);

    // Fixed point u <- (H + (lambda/|u|) I)^{-1} H v*.
    Vector u = v_star;
    bool converged = false;
    for (us.iterations = 1; us.iterations <= 2000; ++us.iterations) {
        const double r = u.norm();
        if (!(r > 0.0) || !std::isfinite(r)) break;
        const Vector next = (H + (lambda / r) * I).ldlt().solve(hv);
        const double change = (next - u).norm();
        u = next;
        if (change <= 1e-15 * std::max(1.0, u.norm())) {
            converged = true;
            break;
        }
    }
    if (converged) {
        us.u = u;
        finish_u_star(us, H, v_star, lambda);
        if (us.norm_residual <= 1e-12 && us.align_residual <= 1e-12) return us;
    }

    // Fallback: find r with |u(r)| = r for u(r) = (H + (lambda/r) I)^{-1} H v*.
    // In the eigenbasis |u(r)|^2 / r^2 - 1 is decreasing in r, so bisect on it.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
    const Vector mu = eig.eigenvalues().cwiseMax(0.0);
    const Vector c = eig.eigenvectors().transpose() * v_star;
    auto psi = [&](double r) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double t = mu[j] * c[j] / (mu[j] * r + lambda);
            s += t * t;
        }
        return s - 1.0;
    };
    double lo = 0.0, hi = std::max(1.0, v_star.norm());
    while (psi(hi) > 0.0) hi *= 2.0;
    for (int it = 0; it < 400 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (psi(mid) > 0.0 ? lo : hi) = mid;
        ++us.iterations;
    }
    const double r = 0.5 * (lo + hi);
    Vector coef(d);
    for (Eigen::Index j = 0; j < d; ++j) coef[j] = mu[j] * r / (mu[j] * r + lambda) * c[j];
    us.u = eig.eigenvectors() * coef;
    finish_u_star(us, H, v_star, lambda);
    return us;
}

double L_lambda_star(const TheoryContext& ctx) {
    const Vector diff = ctx.v_star - ctx.u_star.u;
    return diff.dot(ctx.H * diff) + 2.0 * ctx.lambda * ctx.u_star.u.norm();
}

Network theta_ustar_member(const Vector& u_star, const std::vector<double>& weights, Eigen::Index width) {
    if (static_cast<Eigen::Index>(weights.size()) > width) throw InvalidArgument("theta_ustar_member: too many weights");
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw InvalidArgument("theta_ustar_member: weights must be nonnegative");
        total += w;
    }
    if (!(total > 0.0)) throw InvalidArgument("theta_ustar_member: weights must not all be zero");
    Network net = Network::zeros(width, u_star.size());
    const double un = u_star.norm();
    const Vector dir = u_star / un;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double a = std::sqrt(weights[i] / total * un);
        net.a[static_cast<Eigen::Index>(i)] = a;
        net.W.row(static_cast<Eigen::Index>(i)) = a * dir.transpose();
    }
    return net;
}

TheoryContext make_theory_context(const Dataset& ds, double lambda) {
    const auto d = ds.d();
    if (ds.n() != d || d < 3) throw InvalidArgument("theory context needs n = d >= 3 data");
    TheoryContext ctx;
    ctx.lambda = lambda;
    ctx.v_star = teacher_direction(d);
    ctx.X = ds.points.transpose();
    ctx.x_dag = dual_basis(ctx.X);
    const CovarianceSpectrum spec = covariance_spectrum(ds);
    ctx.H = spec.H;
    ctx.mu_min = spec.mu_min;
    ctx.mu_max = spec.mu_max;
    ctx.u_star = compute_u_star(ctx.H, ctx.v_star, lambda);
    ctx.L_lambda_star = L_lambda_star(ctx);
    ctx.gamma = correlation_vector(ds);
    const Vector xd2 = ctx.x_dag.row(1).transpose();
    const Vector xd3 = ctx.x_dag.row(2).transpose();
    if (ctx.u_star.nonzero) {
        ctx.zeta = cos_angle(ctx.u_star.u, xd2) - sin_angle(xd2, xd3);
        const Vector b2 = xd2.normalized();
        const Vector b3 = xd3.normalized();
        ctx.u1 = ctx.u_star.u - ctx.zeta * b2;
        ctx.u2 = ctx.zeta * (b2 - b3 * b3.dot(b2));
        ctx.rank2_net = Network::zeros(2, d);
        const Vector* parts[2] = {&ctx.u1, &ctx.u2};
        for (int j = 0; j < 2; ++j) {
            const double norm = parts[j]->norm();
            if (norm == 0.0) continue;
            const double root = std::sqrt(norm);
            ctx.rank2_net.W.row(j) = (*parts[j] / root).transpose();
            ctx.rank2_net.a[j] = root;
        }
    }
    return ctx;
}

std::vector<BoundReport> proposition1_check(const TheoryContext& ctx) {
    std::vector<BoundReport> out;
    const auto d = ctx.X.cols();
    Eigen::JacobiSVD<Matrix> svd(ctx.X);
    const Vector& s = svd.singularValues();
    const double cond = s[0] / s[s.size() - 1];
    out.push_back(report("data_linearly_independent", 1e12, cond, cond < 1e12, "condition number"));
    double min_cos = 1.0;
    for (Eigen::Index k = 0; k < d; ++k) min_cos = std::min(min_cos, cos_angle(ctx.v_star, ctx.X.col(k)));
    const double c45 = std::cos(std::numbers::pi / 4.0);
    out.push_back(report("teacher_angle_below_45deg", c45, min_cos, min_cos > c45, "min_k cos(v*, x_k)"));
    const Vector xd2 = ctx.x_dag.row(1).transpose();
    const Vector xd3 = ctx.x_dag.row(2).transpose();
    const double cos_v = cos_angle(ctx.v_star, xd2);
    const double sin_23 = sin_angle(xd2, xd3);
    out.push_back(report("cos_vstar_xdag2_exceeds_sin_xdag2_xdag3", sin_23, cos_v, cos_v > sin_23));
    return out;
}

Rank2Result rank2_construction(const TheoryContext& ctx, const Dataset& ds) {
    Rank2Result res;
    res.net = ctx.rank2_net;
    if (!ctx.u_star.nonzero) {
        BoundReport r = report("rank2_preconditions", 0.0, 0.0, false, "u* is zero for this lambda");
        res.checks.push_back(r);
        return res;
    }
    const Vector xd2 = ctx.x_dag.row(1).transpose();
    const double z2 = ctx.u_star.u.dot(ctx.X.col(1));
    const double shortfall = ctx.zeta / xd2.norm();
    res.checks.push_back(report("rank2_zeta_positive", 0.0, ctx.zeta, ctx.zeta > 0.0));
    res.checks.push_back(report("rank2_shortfall_below_u_star_x2", z2, shortfall, shortfall < z2));
    double worst = 0.0;
    for (Eigen::Index k = 0; k < ds.n(); ++k)
        worst = std::max(worst, std::abs(res.net(ds.point(k)) - ctx.u_star.u.dot(ds.point(k))));
    res.checks.push_back(report("rank2_outputs_match_u_star", 1e-10, worst, worst <= 1e-10));
    const double sq = res.net.squared_norm();
    const double norm_bound = 2.0 * ctx.u_star.u.norm() - ctx.zeta * ctx.zeta / 2.0;
    res.checks.push_back(report("rank2_norm_bound", norm_bound, sq, sq <= norm_bound));
    const double loss = regularized_loss(res.net, ds.points, ds.labels, ctx.lambda);
    const double loss_bound = ctx.L_lambda_star - ctx.lambda * ctx.zeta * ctx.zeta / 4.0;
    res.checks.push_back(report("rank2_loss_below_L_star", loss_bound, loss, loss <= loss_bound));
    return res;
}

BoundReport init_probability(Eigen::Index m, std::size_t trials, const Dataset& ds, Rng& rng) {
    if (trials < 1) throw InvalidArgument("init_probability: trials must be >= 1");
    TrainConfig cfg;
    cfg.alpha = 1.0;
    cfg.width = m;
    cfg.init_mode = InitMode::SphereBalanced;
    std::size_t good = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const Network net = init_network(cfg, ds.d(), rng);
        const Matrix pre = net.W * ds.points.transpose();
        bool any_plus = false, degenerate = false;
        for (Eigen::Index i = 0; i < m; ++i) {
            bool active = false;
            for (Eigen::Index k = 0; k < ds.n(); ++k) {
                active = active || pre(i, k) > 0.0;
                degenerate = degenerate || pre(i, k) == 0.0;
            }
            any_plus = any_plus || (net.a[i] > 0.0 && active);
        }
        good += any_plus && !degenerate;
    }
    const double bound = 1.0 - std::pow(0.75, static_cast<double>(m));
    const double freq = static_cast<double>(good) / static_cast<double>(trials);
    const double sigma = std::sqrt(bound * (1.0 - bound) / static_cast<double>(trials));
    return report("init_probability_m" + std::to_string(m), bound, freq, freq >= bound - 3.0 * sigma,
                  "frequency of a positive active neuron at initialization");
}

LambdaThreshold theorem3_lambda_threshold(const Dataset& ds) {
    double pos = 0.0, neg = 0.0;
    for (Eigen::Index k = 0; k < ds.n(); ++k) {
        const double t = ds.labels[k] * ds.labels[k] * ds.points.row(k).squaredNorm();
        if (ds.labels[k] > 0.0) pos += t;
        else if (ds.labels[k] < 0.0) neg += t;
    }
    LambdaThreshold lt;
    lt.value = std::min(std::sqrt(pos), std::sqrt(neg));
    lt.proof_value = ds.n() > 0 ? lt.value / static_cast<double>(ds.n()) : 0.0;
    lt.applicable = pos > 0.0 && neg > 0.0;
    return lt;
}

GammaT1 gamma_and_T1(const Dataset& ds, double alpha, double epsilon) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("gamma_and_T1: alpha must be in (0,1)");
    if (!(epsilon > 0.0)) throw InvalidArgument("gamma_and_T1: epsilon must be > 0");
    GammaT1 g;
    g.gamma = correlation_vector(ds);
    const double norm = g.gamma.norm();
    if (norm == 0.0) throw InvalidArgument("gamma_and_T1: gamma is zero");
    g.T1 = epsilon * std::log(1.0 / alpha) / norm;
    return g;
}

BoundReport lemma_d3_check(const Dataset& ds, double lambda, const Network& global_net) {
    const LambdaThreshold lt = theorem3_lambda_threshold(ds);
    BoundReport r;
    r.name = "nonzero_outputs_at_global_minimum";
    r.bound_value = 1e-8;
    if (!lt.applicable || lambda > lt.value) {
        r.skipped = true;
        r.satisfied = true;
        r.note = lt.applicable ? "lambda above threshold" : "labels of one sign only";
        return r;
    }
    double smallest = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < ds.n(); ++k)
        if (std::abs(ds.labels[k]) > 1e-8) smallest = std::min(smallest, std::abs(global_net(ds.point(k))));
    r.empirical_value = smallest;
    r.satisfied = smallest > 1e-8;
    if (lambda > lt.proof_value) r.note = "lambda above max-norm/n; outputs may vanish here";
    return r;
}

void write_bound_reports_csv(std::ostream& out, const std::vector<BoundReport>& reports) {
    out << "check,bound,empirical,satisfied\n";
    for (const auto& r : reports) {
        out << r.name << ',' << csv::format(r.bound_value) << ','
            << (r.empirical_value ? csv::format(*r.empirical_value) : std::string()) << ','
            << (r.skipped ? "skipped" : (r.satisfied ? "true" : "false")) << '\n';
    }
}

}  // namespace relunet
