#pragma once

// Test-only oracles, independent of the library's implementation paths.

#include <algorithm>
#include <cmath>
#include <vector>

#include "isorank/matrix.hpp"

namespace isorank::testing {

// Lower sets of the rows x cols grid poset (cell (i,j) <= (i',j') iff i<=i'
// and j<=j'), each encoded as a bitmask.  A set L is lower iff with every
// cell it contains all cells below-left of it.
inline std::vector<unsigned> grid_lower_sets(int rows, int cols) {
    int cells = rows * cols;
    std::vector<unsigned> out;
    for (unsigned mask = 0; mask < (1u << cells); ++mask) {
        bool ok = true;
        for (int i = 0; i < rows && ok; ++i)
            for (int j = 0; j < cols && ok; ++j) {
                if (!(mask >> (i * cols + j) & 1u)) continue;
                if (i > 0 && !(mask >> ((i - 1) * cols + j) & 1u)) ok = false;
                if (j > 0 && !(mask >> (i * cols + j - 1) & 1u)) ok = false;
            }
        if (ok) out.push_back(mask);
    }
    return out;
}

// Exact isotonic regression on the grid poset via the max-min formula
// (max over upper sets containing x of the min over lower sets containing x
// of the average over the intersection), then clamped to [0,1].  Exact for
// the box-constrained problem because clamping commutes with isotonic
// regression.
inline Matrix bi_isotonic_ls_oracle(const Matrix& y) {
    const int rows = y.rows(), cols = y.cols(), cells = rows * cols;
    std::vector<unsigned> lowers = grid_lower_sets(rows, cols);
    std::vector<unsigned> uppers;
    unsigned full = (cells == 32) ? 0xffffffffu : ((1u << cells) - 1u);
    for (unsigned l : lowers) uppers.push_back(full & ~l);

    auto avg = [&](unsigned mask) {
        double s = 0.0;
        int c = 0;
        for (int t = 0; t < cells; ++t)
            if (mask >> t & 1u) {
                s += y.data()[t];
                ++c;
            }
        return c ? s / c : 0.0;
    };

    Matrix fit(rows, cols);
    for (int t = 0; t < cells; ++t) {
        double best = -1e100;
        for (unsigned u : uppers) {
            if (!(u >> t & 1u)) continue;
            double worst = 1e100;
            for (unsigned l : lowers) {
                if (!(l >> t & 1u)) continue;
                unsigned inter = u & l;
                if (!inter) continue;
                worst = std::min(worst, avg(inter));
            }
            best = std::max(best, worst);
        }
        fit.data()[t] = std::clamp(best, 0.0, 1.0);
    }
    return fit;
}

// Exhaustive 2x2 oracle: the optimum takes values among clamped subset
// averages; enumerate all feasible assignments.
inline Matrix bi_isotonic_ls_oracle_2x2(const Matrix& y) {
    std::vector<double> candidates{0.0, 1.0};
    for (unsigned mask = 1; mask < 16; ++mask) {
        double s = 0.0;
        int c = 0;
        for (int t = 0; t < 4; ++t)
            if (mask >> t & 1u) {
                s += y.data()[t];
                ++c;
            }
        candidates.push_back(std::clamp(s / c, 0.0, 1.0));
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    Matrix best(2, 2);
    double best_obj = 1e100;
    for (double a : candidates)
        for (double b : candidates)
            for (double c : candidates)
                for (double d : candidates) {
                    if (a > b || a > c || b > d || c > d) continue;
                    double obj = (y(0, 0) - a) * (y(0, 0) - a) + (y(0, 1) - b) * (y(0, 1) - b) +
                                 (y(1, 0) - c) * (y(1, 0) - c) + (y(1, 1) - d) * (y(1, 1) - d);
                    if (obj < best_obj) {
                        best_obj = obj;
                        best(0, 0) = a;
                        best(0, 1) = b;
                        best(1, 0) = c;
                        best(1, 1) = d;
                    }
                }
    return best;
}

// Exact 1-D weighted isotonic fit by enumerating level-set partitions
// (contiguous blocks, each at its weighted mean, means nondecreasing across
// blocks picked by the best feasible partition).
inline std::vector<double> isotonic_1d_oracle(const std::vector<double>& v,
                                              const std::vector<double>& w) {
    const int n = static_cast<int>(v.size());
    std::vector<double> best;
    double best_obj = 1e100;
    // partitions of [0,n) into contiguous blocks, encoded by cut bitmask
    for (unsigned cuts = 0; cuts < (1u << (n - 1)); ++cuts) {
        std::vector<double> fit(n);
        double prev = -1e100;
        bool feasible = true;
        int start = 0;
        for (int i = 0; i < n; ++i) {
            bool end_block = (i == n - 1) || (cuts >> i & 1u);
            if (!end_block) continue;
            double sw = 0.0, sv = 0.0;
            for (int t = start; t <= i; ++t) {
                sw += w[t];
                sv += w[t] * v[t];
            }
            double mean = sv / sw;
            if (mean < prev - 1e-12) {
                feasible = false;
                break;
            }
            for (int t = start; t <= i; ++t) fit[t] = mean;
            prev = mean;
            start = i + 1;
        }
        if (!feasible) continue;
        double obj = 0.0;
        for (int t = 0; t < n; ++t) obj += w[t] * (fit[t] - v[t]) * (fit[t] - v[t]);
        if (obj < best_obj) {
            best_obj = obj;
            best = fit;
        }
    }
    return best;
}

}  // namespace isorank::testing
