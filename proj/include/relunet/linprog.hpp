#pragma once

#include "relunet/types.hpp"

namespace relunet {

struct LpResult {
    Vector z;
    double value = 0.0;
    bool optimal = false;
    bool unbounded = false;
};

// Dense tableau simplex for  max c^T z  s.t.  A z <= b, z >= 0  with b >= 0
// (the origin is feasible, so no phase one). Bland's rule prevents cycling.
LpResult simplex_maximize(const Matrix& A, const Vector& b, const Vector& c, int max_pivots = 100000);

struct MarginWitness {
    Vector w;             // ||w||_inf <= 1
    double margin = 0.0;  // min_j s_j <xhat_j, w> over unit-normalized rows
    bool feasible = false;
};

// Largest-margin w with signs[j] * <rows_j / ||rows_j||, w> >= margin for all j.
// `feasible` means the open cone is nonempty (margin > 1e-12).
MarginWitness max_margin_witness(const Matrix& rows, const Eigen::VectorXi& signs);

}  // namespace relunet
