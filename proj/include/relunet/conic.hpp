#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "relunet/arrangement.hpp"
#include "relunet/data.hpp"
#include "relunet/network.hpp"

namespace relunet {

enum class ObjectiveKind { Regularized, MinNorm };
enum class SolveStatus { Optimal, MaxIter, Infeasible };

std::string to_string(SolveStatus status);

// Per-cone convex program in beta-space, beta_i = |a_i| w_i:
//   Regularized: min (1/n) || sum_i eps_i D_i X beta_i - y ||^2 + 2 lambda sum_i ||beta_i||
//   MinNorm:     min 2 sum_i ||beta_i||  s.t.  sum_i eps_i D_i X beta_i = y
// with beta_i in the closed cone of its row: <beta_i, x_k> >= 0 where bit k is
// set and <= 0 where it is not. eps_i = +1 when the sign bit is set.
struct ConeProgram {
    int n = 0;
    std::vector<NeuronPattern> rows;        // distinct rows, first-seen order
    std::vector<std::size_t> row_of;        // original row -> index into rows
    std::vector<std::size_t> first_source;  // rows[i] first appears at this original row
    Matrix points;
    Vector labels;
    double lambda = 0.0;
    ObjectiveKind kind = ObjectiveKind::Regularized;
};

struct SolveResult {
    std::vector<NeuronPattern> rows;
    std::vector<Vector> beta;  // one d-vector per row
    double objective_value = 0.0;
    double kkt_residual = 0.0;
    SolveStatus status = SolveStatus::MaxIter;
    int iterations = 0;
};

struct SolverOptions {
    double tol = 1e-8;
    int max_iterations = 200000;
    double feas_tol = 1e-9;
};

struct StationarityOptions {
    double boundary_tol = 5e-5;
    double grad_tol = 5e-5;
};

struct StationarityReport {
    double min_grad_inf_norm = 0.0;
    bool is_stationary = false;
    std::size_t boundary_count = 0;
    std::size_t tunable_count = 0;  // boundary ReLUs that actually enter the gradient
};

ConeProgram build_cone_program(const ActivationMatrix& A, const Dataset& ds, double lambda, ObjectiveKind kind);

SolveResult solve(const ConeProgram& cp, const SolverOptions& opts = {});

// Model outputs sum_i eps_i 1[bit_ik] <beta_i, x_k>.
Vector model_outputs(const ConeProgram& cp, const std::vector<Vector>& beta);

// Objective recomputed from beta: Regularized value, or 2 sum ||beta_i|| for MinNorm.
double cone_objective(const ConeProgram& cp, const std::vector<Vector>& beta);

// Largest violation of the closed sign constraints (0 when feasible).
double feasibility_violation(const ConeProgram& cp, const std::vector<Vector>& beta);

// Balanced network: row i goes to neuron slot[i]; remaining neurons are zero.
Network recover_network(const SolveResult& sr, std::size_t m, const std::vector<std::size_t>& slot);
// Width = number of rows, row i -> neuron i.
Network recover_network(const SolveResult& sr);

// Program over every realizable pattern with both output signs.
ConeProgram global_program(const Dataset& ds, double lambda, ObjectiveKind kind);
SolveResult global_optimum(const Dataset& ds, double lambda, ObjectiveKind kind, const SolverOptions& opts = {});

StationarityReport stationarity_check(const Network& net, const Dataset& ds, double lambda,
                                      const StationarityOptions& opts = {});

// CSV `row_bits,sign,beta_1..beta_d` preceded by `# objective,kkt_residual,status`.
void write_solve_result_csv(std::ostream& out, const SolveResult& sr, int n);

}  // namespace relunet
