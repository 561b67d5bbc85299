#pragma once

#include <array>
#include <vector>

#include "isorank/aggregation.hpp"
#include "isorank/matrix.hpp"

namespace isorank {

enum class TrisMode { HT, WM, WM_SR };

// Tuning for Pivot / dimension reduction / DoubleTrisection.  The paper's
// log-power prefactors are rescaled by `practical_scaling`; scaling = 1
// reproduces the paper's thresholds exactly ("paper mode").
struct TrisectionParams {
    double zeta = 1.0;    // callers replace 0 by zeta_eff = 2^-40
    double delta = 0.05;
    TrisMode mode = TrisMode::HT;
    double practical_scaling = 1.0 / 64;

    double pca_tol = 1e-8;
    int pca_max_iter = 10000;

    double beta_tris() const { return 4.0 * 1.4142135623730951 * zeta; }
    double beta_bar_tris() const { return 8.0 * 1.4142135623730951 * zeta; }
    double scaled_log(double x) const { return practical_scaling * std::log(x); }

    static double effective_zeta(double z) { return z > 0.0 ? z : 0x1.0p-40; }
};

// Aggressive (L, U) and conservative (L_bar, U_bar) sets; sorted expert ids.
struct TrisectionResult {
    std::vector<int> L, U, L_bar, U_bar;
    bool empty() const { return L.empty() && U.empty() && L_bar.empty() && U_bar.empty(); }
};

// Accumulated warnings from a DoubleTrisection run.
struct TrisectionDiag {
    long pca_nonconverged = 0;
    long rounds_skipped_empty_q = 0;
    long rounds_skipped_zero_w = 0;
};

// (Z, w, gamma, beta)-trisections at both confidence levels.  gamma is
// 1-based; ties in psi break by expert index.
TrisectionResult pivot(const AggregatedMatrix& z, const std::vector<double>& w, int gamma,
                       const TrisectionParams& params);

// Forward-minus-backward windowed mean at 0-based position k, padding 0 on
// the left of the series and 1 past its end.
double cusum(const std::vector<double>& ybar, int k, int width);

// {k : cusum(series, k, window) >= threshold} encoded at scale r.
std::vector<int> cusum_block_set(const std::vector<double>& series, int d, double threshold,
                                 int window, int r);

// CUSUM window used by the oblivious dimension reduction.
int cusum_window_cp(int p_size, double h, int r, int d, const TrisectionParams& params);

// Oblivious block selection Q_cp: questions whose CUSUM at scale r_tilde
// clears h/4, encoded at scale r.
std::vector<int> dimension_reduction_cp(const Matrix& y, const std::vector<int>& experts,
                                        double h, int r, const TrisectionParams& params);

// Ordered neighbor groups of the current leaf, nearest first.  Indices past
// the real groups behave as synthetic constant experts (rows of 1 above, 0
// below).
struct NeighborhoodContext {
    std::vector<std::vector<int>> above;
    std::vector<std::vector<int>> below;
};

// Memory-assisted block selection Q_WM: questions where both the neighborhood
// CUSUM and the width statistic clear h/16 at some scale r_cp.
std::vector<int> dimension_reduction_wm(const Matrix& y, const NeighborhoodContext& ctx,
                                        const std::vector<int>& experts, double h, int r,
                                        const TrisectionParams& params);

struct PcaDirection {
    std::vector<double> v;
    bool converged = true;
};

// Leading eigenvector of (Z1-Z1bar)(Z1-Z1bar)^T - (1/2) D D^T with
// D = Z1-Z1bar-Z2+Z2bar, via shifted power iteration.  Sign fixed so the
// largest-magnitude entry is positive.
PcaDirection pca_direction(const AggregatedMatrix& z1, const AggregatedMatrix& z2,
                           const TrisectionParams& params);

// Thresholded absolute image w+ = |v^T (Z3 - Z3bar)| * 1{ >= 2 zeta sqrt(2 log(2|Q|/delta)) }.
std::vector<double> threshold_weights(const std::vector<double>& v, const AggregatedMatrix& z3,
                                      const TrisectionParams& params);

// Full DoubleTrisection over all (h, r) rounds with 6 fresh samples.
TrisectionResult double_trisection(const std::array<const Matrix*, 6>& samples,
                                   const NeighborhoodContext& ctx, const std::vector<int>& experts,
                                   int gamma, const DyadicGrids& grids,
                                   const TrisectionParams& params, TrisectionDiag* diag = nullptr);

}  // namespace isorank
