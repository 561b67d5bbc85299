#pragma once

#include <utility>
#include <vector>

#include "isorank/matrix.hpp"
#include "isorank/partial.hpp"

namespace isorank {

// Weighted least-squares nondecreasing fit (pool adjacent violators), exact.
std::vector<double> isotonic_regression_1d(const std::vector<double>& v,
                                           const std::vector<double>& w);

struct ProjectionSettings {
    double tol = 1e-10;  // Frobenius change between Dykstra cycles
    int max_iter = 5000;
};

struct ProjectionResult {
    Matrix B;
    bool converged = true;
    int iterations = 0;
};

// Approximate projection onto bounded bi-isotonic matrices: Dykstra between
// the row- and column-monotone cones, clamped to [0,1], then exactly
// monotonized.
ProjectionResult project_bi_isotonic(const Matrix& y, const ProjectionSettings& settings = {});

// First-order optimality residual of a projection candidate: the fit's
// connected level components must have zero residual sum (or the one-sided
// sign when clamped at 0/1).  Zero for the exact projection; used to certify
// Dykstra beyond the brute-force oracle sizes.
double projection_certificate(const Matrix& y, const Matrix& fit, double level_tol = 1e-7);

// Plug-in reconstruction: empirical matrix from the (post-thinning) log,
// rows arranged by pi_hat, projected, then un-permuted.
Matrix estimate_matrix(const ObservationLog& second_half, const Permutation& pi_hat,
                       double lambda_effective, const ProjectionSettings& settings = {},
                       ProjectionResult* proj_stats = nullptr);

// Ranking by ascending row sums, ties by expert index.
Permutation borda_rank(const Matrix& y);
Permutation borda_rank(const ObservationLog& log);

struct PairwiseComparisons {
    std::vector<std::pair<int, int>> pc;  // (i, j) with i below j
    std::vector<int> phi;                 // dominance counts
};

struct PairwiseParams {
    TrisectionParams tris;
    std::optional<SampleBudget> budget_override;
    bool paper_delta = false;  // delta = [(lambda v 1) n^2 d]^-2
};

// Pairwise l_inf-optimal estimator: the WMP machinery on every 2-row
// subinstance; comparisons recorded only for clean ({}, {i}, {j}) root
// trisections.
Permutation pairwise_estimator(const ObservationLog& log, const PairwiseParams& params,
                               RngStream& rng, PairwiseComparisons* out = nullptr);

}  // namespace isorank
