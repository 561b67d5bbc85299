#include "isorank/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace isorank {

DyadicGrids build_grids(int n, int d, double zeta) {
    if (n < 1 || d < 1) throw std::invalid_argument("build_grids: dimensions must be >= 1");
    if (zeta <= 0.0) throw std::invalid_argument("build_grids: zeta must be positive");
    DyadicGrids g;
    for (int r = 1; r <= d; r *= 2) g.scales.push_back(r);
    double lo = zeta * zeta / (static_cast<double>(n) * d);
    if (lo <= 1.0) {
        int k_min = static_cast<int>(std::ceil(std::log2(lo) - 1e-12));
        for (int k = k_min; k <= 0; ++k) g.heights.push_back(std::ldexp(1.0, k));
    }
    return g;
}

std::vector<int> block_grid(int d, int r) {
    if (r < 1 || d < 1) throw std::invalid_argument("block_grid: bad scale");
    std::vector<int> starts;
    for (int l = 0; l <= (d / r) * r; l += r) starts.push_back(l);
    return starts;
}

std::vector<int> encode_set(const std::vector<int>& D, int r, int d) {
    std::vector<char> hit(d / r + 1, 0);
    for (int k : D) {
        if (k < 0 || k >= d) throw std::invalid_argument("encode_set: question out of range");
        hit[k / r] = 1;
    }
    std::vector<int> out;
    for (int b = 0; b <= d / r; ++b)
        if (hit[b]) out.push_back(b * r);
    return out;
}

AggregatedMatrix encode_matrix(const Matrix& y, const std::vector<int>& experts,
                               const std::vector<int>& starts, int r) {
    if (r < 1) throw std::invalid_argument("encode_matrix: bad scale");
    const int d = y.cols();
    for (int l : starts)
        if (l < 0 || l % r != 0 || l > (d / r) * r)
            throw std::invalid_argument("encode_matrix: block start not on the scale-r grid");
    AggregatedMatrix a;
    a.experts = experts;
    a.starts = starts;
    a.r = r;
    a.Z = Matrix(static_cast<int>(experts.size()), static_cast<int>(starts.size()));
    const double inv_sqrt_r = 1.0 / std::sqrt(static_cast<double>(r));
    for (std::size_t p = 0; p < experts.size(); ++p) {
        int i = experts[p];
        if (i < 0 || i >= y.rows()) throw std::invalid_argument("encode_matrix: expert out of range");
        const double* row = y.row_ptr(i);
        for (std::size_t c = 0; c < starts.size(); ++c) {
            int l = starts[c];
            double s = 0.0;
            int real_end = std::min(l + r, d);
            for (int k = l; k < real_end; ++k) s += row[k];
            if (l + r > d) s += (l + r - std::max(l, d));  // overflow columns read 1
            a.Z(static_cast<int>(p), static_cast<int>(c)) = s * inv_sqrt_r;
        }
    }
    return a;
}

std::vector<double> column_mean(const Matrix& a) {
    if (a.rows() == 0) throw std::invalid_argument("column_mean: empty expert set");
    std::vector<double> mean(a.cols(), 0.0);
    for (int i = 0; i < a.rows(); ++i) {
        const double* row = a.row_ptr(i);
        for (int k = 0; k < a.cols(); ++k) mean[k] += row[k];
    }
    for (double& v : mean) v /= a.rows();
    return mean;
}

std::vector<double> prefix_sums(const std::vector<double>& v) {
    std::vector<double> p(v.size() + 1, 0.0);
    for (std::size_t k = 0; k < v.size(); ++k) p[k + 1] = p[k] + v[k];
    return p;
}

double padded_window_sum(const std::vector<double>& prefix, int d, long a, long b) {
    if (b <= a) return 0.0;
    long lo = std::clamp(a, 0L, static_cast<long>(d));
    long hi = std::clamp(b, 0L, static_cast<long>(d));
    double s = (hi > lo) ? prefix[hi] - prefix[lo] : 0.0;
    if (b > d) s += static_cast<double>(b - std::max(a, static_cast<long>(d)));
    return s;
}

}  // namespace isorank
