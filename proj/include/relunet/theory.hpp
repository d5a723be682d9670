#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "relunet/data.hpp"
#include "relunet/flow.hpp"
#include "relunet/network.hpp"

namespace relunet {

struct BoundReport {
    std::string name;
    double bound_value = 0.0;
    std::optional<double> empirical_value;
    bool satisfied = false;
    bool skipped = false;  // out of the statement's scope; not a failure
    std::string note;
};

struct UStar {
    Vector u;
    bool nonzero = false;  // false when lambda >= ||H v||, u = 0
    double norm_residual = 0.0;   // | ||H(v - u)|| - lambda |
    double align_residual = 0.0;  // | ubar . normalize(H(v - u)) - 1 |
    int iterations = 0;
};

struct TheoryContext {
    Vector v_star;
    Matrix X;      // d x d, column k is x_k
    Matrix x_dag;  // d x d, row k is the dual vector of x_k
    Matrix H;
    double mu_min = 0.0;
    double mu_max = 0.0;
    double lambda = 0.0;
    UStar u_star;
    double L_lambda_star = 0.0;
    double zeta = 0.0;
    Vector u1, u2;
    Network rank2_net;
    Vector gamma;
};

// Rows of X^{-1}: row k has inner product 1 with column k of X and 0 with the rest.
Matrix dual_basis(const Matrix& X);

double cos_angle(const Vector& u, const Vector& v);
double sin_angle(const Vector& u, const Vector& v);

// Minimizer of ||v - u||_H^2 + 2 lambda ||u||.
UStar compute_u_star(const Matrix& H, const Vector& v_star, double lambda);

// Requires an Assumption-1 style dataset (n = d >= 3, invertible data matrix).
TheoryContext make_theory_context(const Dataset& ds, double lambda);

std::vector<BoundReport> proposition1_check(const TheoryContext& ctx);

// ||v* - u*||_H^2 + 2 lambda ||u*||.
double L_lambda_star(const TheoryContext& ctx);

// Balanced member of Theta_{u*} with output weights split by `weights` (nonnegative, any scale).
Network theta_ustar_member(const Vector& u_star, const std::vector<double>& weights, Eigen::Index width);

struct Rank2Result {
    Network net;
    std::vector<BoundReport> checks;
};
Rank2Result rank2_construction(const TheoryContext& ctx, const Dataset& ds);

// Monte Carlo frequency of {I_plus nonempty and no preactivation exactly 0}
// under the sphere initialization, against 1 - (3/4)^m.
BoundReport init_probability(Eigen::Index m, std::size_t trials, const Dataset& ds, Rng& rng);

struct LambdaThreshold {
    double value = 0.0;        // min over label signs of sqrt(sum y_k^2 ||x_k||^2)
    double proof_value = 0.0;  // value / n, where the nonzero-output argument actually closes
    bool applicable = false;   // both label signs present
};
LambdaThreshold theorem3_lambda_threshold(const Dataset& ds);

struct GammaT1 {
    Vector gamma;
    double T1 = 0.0;
};
// `epsilon` is the alignment-phase exponent (half the theorem's epsilon).
GammaT1 gamma_and_T1(const Dataset& ds, double alpha, double epsilon);

// Skipped above the stated threshold. Between proof_value and value the check
// still runs and may fail; the note says so.
BoundReport lemma_d3_check(const Dataset& ds, double lambda, const Network& global_net);

// CSV `check,bound,empirical,satisfied`.
void write_bound_reports_csv(std::ostream& out, const std::vector<BoundReport>& reports);

}  // namespace relunet
