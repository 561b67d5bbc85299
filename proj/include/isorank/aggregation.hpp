#pragma once

#include <vector>

#include "isorank/matrix.hpp"

namespace isorank {

// Dyadic scale and height grids: R = dyadics in [1, d], H = dyadics in
// [zeta^2/(nd), 1].
struct DyadicGrids {
    std::vector<int> scales;      // ascending powers of two
    std::vector<double> heights;  // ascending powers of two
};

DyadicGrids build_grids(int n, int d, double zeta);

// Block starts of the regular width-r grid, 0-based:
// {0, r, 2r, ..., floor(d/r)*r}.
std::vector<int> block_grid(int d, int r);

// Blocks of the scale-r grid whose window [l, l+r) meets D (0-based
// questions).  Sorted ascending.
std::vector<int> encode_set(const std::vector<int>& D, int r, int d);

// Block-aggregated matrix: Z_{i,l} = (1/sqrt r) * sum_{k in [l, l+r)} Y_{i,k},
// columns past d-1 read as 1 per the padding convention.
struct AggregatedMatrix {
    Matrix Z;                   // |P| x |Q|
    std::vector<int> experts;   // row labels (0-based expert ids)
    std::vector<int> starts;    // column labels (0-based block starts)
    int r = 1;
};

AggregatedMatrix encode_matrix(const Matrix& y, const std::vector<int>& experts,
                               const std::vector<int>& starts, int r);

// Column-wise arithmetic mean; throws on zero rows.
std::vector<double> column_mean(const Matrix& a);

// Padded partial sum of a length-d series: entries below index 0 count as 0,
// entries at index >= d count as 1.  Window is [a, b).
double padded_window_sum(const std::vector<double>& prefix, int d, long a, long b);

// Prefix sums for padded_window_sum: prefix[k] = sum of v[0..k).
std::vector<double> prefix_sums(const std::vector<double>& v);

}  // namespace isorank
