#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "relunet/data.hpp"
#include "relunet/network.hpp"

namespace relunet {

enum class InitMode { SphereBalanced, GaussianBalanced };

std::string to_string(InitMode mode);
InitMode parse_init_mode(const std::string& text);

struct TrainConfig {
    double alpha = 1e-3;
    double lambda = 1e-5;
    double lr = 0.01;
    Eigen::Index width = 100;
    std::uint64_t max_epochs = 100000000;
    double grad_sq_stop = 1e-16;
    std::uint64_t seed = 0;
    InitMode init_mode = InitMode::GaussianBalanced;
    double log_factor = 1.25;  // geometric spacing of logged epochs
    double epsilon = 0.5;      // the small-initialization theorem's epsilon; T1 uses epsilon / 2

    void validate() const;
};

Network init_network(const TrainConfig& cfg, Eigen::Index d, Rng& rng);

struct FlowState {
    Network theta;
    std::uint64_t epoch = 0;
    Gradient grad;  // gradient at theta, filled by gd_step / refresh
    Matrix preactivations;  // m x n, W X^T at theta
    Matrix correlations;    // m x d, rows (2/n) sum_k (y_k - f(x_k)) 1[w_i.x_k > 0] x_k
    bool diverged = false;
};

FlowState make_state(Network theta, const Dataset& ds, double lambda);

// Recomputes grad and preactivations at state.theta. Returns the squared gradient norm.
double refresh(FlowState& state, const Dataset& ds, double lambda);

// One full-batch step. Uses state.grad (refresh first if theta changed outside
// gd_step) and leaves grad and preactivations refreshed at the new point.
// A neuron whose preactivations are all negative is multiplied by exactly
// (1 - 2 lambda lr).
void gd_step(FlowState& state, const Dataset& ds, double lambda, double lr);

struct MetricsRow {
    std::uint64_t epoch = 0;
    double mse = 0.0;
    double reg_loss = 0.0;
    double theta_sq_norm = 0.0;
    std::size_t num_pos_neurons = 0;
    double balance_drift = 0.0;
    double grad_sq_norm = 0.0;
};

// Exact dynamics invariants tracked at every step of train.
struct InvariantLog {
    std::uint64_t dead_steps_checked = 0;   // (neuron, step) pairs with all preactivations < 0
    std::uint64_t dead_decay_violations = 0;
    std::uint64_t negative_side_violations = 0;  // orthogonal data only: w_i(0).x_k < 0 but later w_i.x_k > 0
    std::uint64_t sign_flips = 0;
    std::uint64_t reg_loss_increases = 0;  // across logged epochs
};

struct TrainResult {
    Network initial;
    Network theta;
    std::uint64_t epochs_run = 0;
    double mse = 0.0;
    double reg_loss = 0.0;
    double theta_sq_norm = 0.0;
    double gap = 0.0;  // reg_loss - global_value
    bool converged = false;
    bool diverged = false;
    std::vector<MetricsRow> series;
    std::vector<Network> snapshots;  // theta at each logged epoch, when requested
    InvariantLog invariants;
};

struct TrainOptions {
    bool keep_snapshots = false;
};

TrainResult train(const TrainConfig& cfg, const Dataset& ds, double global_value, const TrainOptions& opts = {});

MetricsRow metrics(const Network& theta, const Gradient& grad, const Dataset& ds, double lambda, std::uint64_t epoch);

// gamma = (2/n) sum_k y_k x_k.
Vector correlation_vector(const Dataset& ds);

struct FlowDiagnostics {
    std::vector<int> signs;  // sign(a_i(0)), +1 or -1
    std::vector<std::size_t> I_plus;
    std::vector<std::vector<int>> K_plus;  // per neuron, {k : w_i.x_k > 0}
    std::vector<std::vector<int>> K_zero;  // per neuron, {k : w_i.x_k = 0}
    Vector gamma;
    double T1 = 0.0;
    Vector v;  // sum over I_plus of a_i w_i
    std::size_t distinct_directions = 0;
    double balance_drift = 0.0;
    std::size_t activation_flips = 0;
    double min_alignment = 0.0;  // min over I_plus of cos(w_i, gamma); 1 when I_plus is empty
};

// `previous` may be null; activation flips are counted against it.
FlowDiagnostics diagnostics(const Network& initial, const Network& current, const Network* previous,
                            const Dataset& ds, const TrainConfig& cfg);

std::size_t distinct_directions(const Network& net, double angle_thresh = 0.1, double scaled_norm_thresh = 1e-6);

bool theta_in_Theta_ustar(const Network& net, const Vector& u_star, double tol);

void write_series_csv(std::ostream& out, const std::vector<MetricsRow>& series);

}  // namespace relunet
