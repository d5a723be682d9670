#include "relunet/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "relunet/csv.hpp"

namespace relunet {

std::string to_string(InitMode mode) { return mode == InitMode::SphereBalanced ? "sphere" : "gaussian"; }

InitMode parse_init_mode(const std::string& text) {
    if (text == "sphere") return InitMode::SphereBalanced;
    if (text == "gaussian") return InitMode::GaussianBalanced;
    throw InvalidArgument("unknown init mode: " + text);
}

void TrainConfig::validate() const {
    if (!(alpha > 0.0)) throw InvalidArgument("alpha must be > 0");
    if (!(lambda > 0.0)) throw InvalidArgument("lambda must be > 0");
    if (!(lr > 0.0)) throw InvalidArgument("lr must be > 0");
    if (!(2.0 * lambda * lr < 1.0)) throw InvalidArgument("lr * 2 lambda must be < 1");
    if (width < 1) throw InvalidArgument("width must be >= 1");
    if (!(log_factor > 1.0)) throw InvalidArgument("log_factor must be > 1");
    if (!(epsilon > 0.0 && epsilon <= 0.5)) throw InvalidArgument("epsilon must be in (0, 1/2]");
}

Network init_network(const TrainConfig& cfg, Eigen::Index d, Rng& rng) {
    cfg.validate();
    Network net = Network::zeros(cfg.width, d);
    for (Eigen::Index i = 0; i < cfg.width; ++i) {
        Vector w(d);
        double norm = 0.0;
        do {
            for (Eigen::Index j = 0; j < d; ++j) w[j] = gaussian(rng);
            norm = w.norm();
        } while (norm == 0.0);
        if (cfg.init_mode == InitMode::SphereBalanced) {
            w *= cfg.alpha / norm;
            net.a[i] = coin(rng) ? cfg.alpha : -cfg.alpha;
        } else {
            w *= cfg.alpha;
            const double len = w.norm();
            net.a[i] = coin(rng) ? len : -len;
        }
        net.W.row(i) = w.transpose();
    }
    return net;
}

namespace {

// Angle between two nonzero vectors, accurate also for tiny angles.
double angle_between(const Vector& x, const Vector& y) {
    const Vector u = y.normalized();
    const double along = x.dot(u);
    return std::atan2((x - along * u).norm(), along);
}

// Correlations G_i = (2/n) sum_k (y_k - f(x_k)) 1[w_i.x_k > 0] x_k.
Matrix correlations(const Matrix& pre, const Vector& a, const Dataset& ds) {
    const auto n = ds.n();
    Vector r = ds.labels;
    for (Eigen::Index k = 0; k < n; ++k) {
        double f = 0.0;
        for (Eigen::Index i = 0; i < pre.rows(); ++i)
            if (pre(i, k) > 0.0) f += a[i] * pre(i, k);
        r[k] = 2.0 / static_cast<double>(n) * (ds.labels[k] - f);
    }
    Matrix masked(pre.rows(), n);
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index i = 0; i < pre.rows(); ++i) masked(i, k) = pre(i, k) > 0.0 ? r[k] : 0.0;
    return masked * ds.points;
}

}  // namespace

double refresh(FlowState& state, const Dataset& ds, double lambda) {
    const Network& th = state.theta;
    state.preactivations = th.W * ds.points.transpose();
    state.correlations = correlations(state.preactivations, th.a, ds);
    const Matrix& G = state.correlations;
    state.grad.W = 2.0 * lambda * th.W - th.a.asDiagonal() * G;
    state.grad.a = 2.0 * lambda * th.a - (th.W.cwiseProduct(G)).rowwise().sum();
    return state.grad.squared_norm();
}

FlowState make_state(Network theta, const Dataset& ds, double lambda) {
    if (theta.dim() != ds.d()) throw InvalidArgument("network dimension does not match dataset");
    FlowState s;
    s.theta = std::move(theta);
    refresh(s, ds, lambda);
    return s;
}

void gd_step(FlowState& state, const Dataset& ds, double lambda, double lr) {
    if (!(2.0 * lambda * lr < 1.0)) throw InvalidArgument("gd_step: lr * 2 lambda must be < 1");
    Network& th = state.theta;
    const double c = 1.0 - 2.0 * lambda * lr;
    // Decay and data terms are applied separately so that a neuron with zero
    // correlations is scaled by exactly c.
    const Matrix& G = state.correlations;
    const Vector wg = th.W.cwiseProduct(G).rowwise().sum();
    for (Eigen::Index i = 0; i < th.width(); ++i) {
        const double a_old = th.a[i];
        for (Eigen::Index j = 0; j < th.dim(); ++j) th.W(i, j) = c * th.W(i, j) + lr * a_old * G(i, j);
        th.a[i] = c * a_old + lr * wg[i];
    }
    ++state.epoch;
    const double big = std::max(th.W.cwiseAbs().maxCoeff(), th.a.cwiseAbs().maxCoeff());
    if (!std::isfinite(big) || big > 1e12) state.diverged = true;
    refresh(state, ds, lambda);
}

MetricsRow metrics(const Network& theta, const Gradient& grad, const Dataset& ds, double lambda, std::uint64_t epoch) {
    MetricsRow m;
    m.epoch = epoch;
    m.mse = mean_squared_error(theta, ds.points, ds.labels);
    m.theta_sq_norm = theta.squared_norm();
    m.reg_loss = m.mse + lambda * m.theta_sq_norm;
    m.num_pos_neurons = distinct_directions(theta);
    m.balance_drift = theta.balance_drift();
    m.grad_sq_norm = grad.squared_norm();
    return m;
}

TrainResult train(const TrainConfig& cfg, const Dataset& ds, double global_value, const TrainOptions& opts) {
    cfg.validate();
    Rng rng = make_rng(cfg.seed, {0x7261696eULL});
    TrainResult res;
    res.initial = init_network(cfg, ds.d(), rng);
    FlowState state = make_state(res.initial, ds, cfg.lambda);
    const Matrix initial_pre = state.preactivations;
    const double c = 1.0 - 2.0 * cfg.lambda * cfg.lr;
    const auto m = res.initial.width();
    const auto n = ds.n();

    std::uint64_t next_log = 0;
    auto log_point = [&] {
        res.series.push_back(metrics(state.theta, state.grad, ds, cfg.lambda, state.epoch));
        if (res.series.size() >= 2 && res.series.back().reg_loss > res.series[res.series.size() - 2].reg_loss)
            ++res.invariants.reg_loss_increases;
        if (opts.keep_snapshots) res.snapshots.push_back(state.theta);
    };

    Matrix W_prev;
    Vector a_prev;
    std::vector<char> dead(static_cast<std::size_t>(m));
    for (;;) {
        const double gsq = state.grad.squared_norm();
        const bool stop = gsq < cfg.grad_sq_stop || state.epoch >= cfg.max_epochs || state.diverged;
        if (state.epoch == next_log || stop) {
            log_point();
            next_log = std::max<std::uint64_t>(
                state.epoch + 1, static_cast<std::uint64_t>(std::ceil(static_cast<double>(state.epoch) * cfg.log_factor)));
        }
        if (stop) {
            res.converged = gsq < cfg.grad_sq_stop && !state.diverged;
            break;
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            bool all_negative = true;
            for (Eigen::Index k = 0; k < n && all_negative; ++k) all_negative = state.preactivations(i, k) < 0.0;
            dead[static_cast<std::size_t>(i)] = all_negative;
        }
        W_prev = state.theta.W;
        a_prev = state.theta.a;
        gd_step(state, ds, cfg.lambda, cfg.lr);
        const Network& th = state.theta;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (dead[static_cast<std::size_t>(i)]) {
                ++res.invariants.dead_steps_checked;
                bool exact = th.a[i] == c * a_prev[i];
                for (Eigen::Index j = 0; j < th.dim() && exact; ++j) exact = th.W(i, j) == c * W_prev(i, j);
                if (!exact) ++res.invariants.dead_decay_violations;
            }
            if ((th.a[i] > 0.0) != (res.initial.a[i] > 0.0) && th.a[i] != 0.0) ++res.invariants.sign_flips;
            if (ds.kind != DatasetKind::Orthogonal) continue;
            for (Eigen::Index k = 0; k < n; ++k)
                if (initial_pre(i, k) < 0.0 && state.preactivations(i, k) > 0.0) ++res.invariants.negative_side_violations;
        }
    }

    res.diverged = state.diverged;
    res.theta = state.theta;
    res.epochs_run = state.epoch;
    res.mse = res.series.back().mse;
    res.theta_sq_norm = res.series.back().theta_sq_norm;
    res.reg_loss = res.series.back().reg_loss;
    res.gap = res.reg_loss - global_value;
    return res;
}

Vector correlation_vector(const Dataset& ds) {
    if (ds.n() == 0) throw InvalidArgument("correlation_vector: empty dataset");
    return 2.0 / static_cast<double>(ds.n()) * (ds.points.transpose() * ds.labels);
}

FlowDiagnostics diagnostics(const Network& initial, const Network& current, const Network* previous,
                            const Dataset& ds, const TrainConfig& cfg) {
    FlowDiagnostics fd;
    const auto m = current.width();
    const Matrix pre0 = initial.W * ds.points.transpose();
    const Matrix pre = current.W * ds.points.transpose();
    fd.gamma = correlation_vector(ds);
    const double gnorm = fd.gamma.norm();
    fd.T1 = gnorm > 0.0 && cfg.alpha < 1.0 ? 0.5 * cfg.epsilon * std::log(1.0 / cfg.alpha) / gnorm : 0.0;
    fd.v = Vector::Zero(ds.d());
    fd.min_alignment = 1.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const int s = initial.a[i] >= 0.0 ? 1 : -1;
        fd.signs.push_back(s);
        std::vector<int> kp, kz;
        bool initially_active = false;
        for (Eigen::Index k = 0; k < ds.n(); ++k) {
            if (pre(i, k) > 0.0) kp.push_back(static_cast<int>(k));
            else if (pre(i, k) == 0.0) kz.push_back(static_cast<int>(k));
            initially_active = initially_active || pre0(i, k) > 0.0;
        }
        fd.K_plus.push_back(std::move(kp));
        fd.K_zero.push_back(std::move(kz));
        if (s == 1 && initially_active) {
            fd.I_plus.push_back(static_cast<std::size_t>(i));
            fd.v += current.a[i] * current.W.row(i).transpose();
            const double wn = current.W.row(i).norm();
            if (wn > 0.0 && gnorm > 0.0)
                fd.min_alignment = std::min(fd.min_alignment, current.W.row(i).dot(fd.gamma) / (wn * gnorm));
        }
    }
    fd.distinct_directions = distinct_directions(current);
    fd.balance_drift = current.balance_drift();
    if (previous != nullptr) {
        const Matrix prev = previous->W * ds.points.transpose();
        for (Eigen::Index i = 0; i < pre.rows(); ++i)
            for (Eigen::Index k = 0; k < pre.cols(); ++k)
                if ((prev(i, k) > 0.0) != (pre(i, k) > 0.0)) ++fd.activation_flips;
    }
    return fd;
}

std::size_t distinct_directions(const Network& net, double angle_thresh, double scaled_norm_thresh) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < net.width(); ++i)
        if (net.a[i] > 0.0 && std::abs(net.a[i]) * net.W.row(i).norm() >= scaled_norm_thresh) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Eigen::Index x, Eigen::Index y) { return net.W.row(x).norm() > net.W.row(y).norm(); });
    std::vector<Vector> reps;
    for (auto i : idx) {
        const Vector w = net.W.row(i).transpose();
        const bool joined =
            std::any_of(reps.begin(), reps.end(), [&](const Vector& r) { return angle_between(w, r) < angle_thresh; });
        if (!joined) reps.push_back(w);
    }
    return reps.size();
}

bool theta_in_Theta_ustar(const Network& net, const Vector& u_star, double tol) {
    const double un = u_star.norm();
    if (un == 0.0) throw InvalidArgument("theta_in_Theta_ustar: u_star must be nonzero");
    double sum_sq = 0.0;
    for (Eigen::Index i = 0; i < net.width(); ++i) {
        const double wn = net.W.row(i).norm();
        if (wn == 0.0 && net.a[i] == 0.0) continue;
        if (net.a[i] < 0.0 || std::abs(net.a[i] - wn) > tol) return false;
        if (wn == 0.0) return false;
        if (angle_between(net.W.row(i).transpose(), u_star) > tol) return false;
        sum_sq += net.a[i] * net.a[i];
    }
    return std::abs(sum_sq - un) <= tol;
}

void write_series_csv(std::ostream& out, const std::vector<MetricsRow>& series) {
    out << "epoch,mse,reg_loss,theta_sq_norm,num_pos_neurons,balance_drift,grad_sq_norm\n";
    for (const auto& r : series)
        out << r.epoch << ',' << csv::format(r.mse) << ',' << csv::format(r.reg_loss) << ','
            << csv::format(r.theta_sq_norm) << ',' << r.num_pos_neurons << ',' << csv::format(r.balance_drift) << ','
            << csv::format(r.grad_sq_norm) << '\n';
}

}  // namespace relunet
