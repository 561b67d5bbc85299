#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace isorank {

// Dense row-major matrix of doubles.  Desk-scale problems only, so no sparse
// storage and no expression templates.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative dimension");
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

    const double* row_ptr(int i) const { return data_.data() + static_cast<std::size_t>(i) * cols_; }
    double* row_ptr(int i) { return data_.data() + static_cast<std::size_t>(i) * cols_; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

inline double frobenius_sq(const Matrix& a) {
    double s = 0.0;
    for (double x : a.data()) s += x * x;
    return s;
}

inline double frobenius_sq_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("frobenius_sq_diff: shape mismatch");
    double s = 0.0;
    for (std::size_t t = 0; t < a.data().size(); ++t) {
        double d = a.data()[t] - b.data()[t];
        s += d * d;
    }
    return s;
}

inline double row_dist_sq(const Matrix& m, int i, int j) {
    double s = 0.0;
    for (int k = 0; k < m.cols(); ++k) {
        double d = m(i, k) - m(j, k);
        s += d * d;
    }
    return s;
}

// perm[i] is the rank of expert i, 0-based.
using Permutation = std::vector<int>;

inline bool is_permutation_of_n(const Permutation& p, int n) {
    if (static_cast<int>(p.size()) != n) return false;
    std::vector<char> seen(n, 0);
    for (int v : p) {
        if (v < 0 || v >= n || seen[v]) return false;
        seen[v] = 1;
    }
    return true;
}

inline Permutation identity_permutation(int n) {
    Permutation p(n);
    std::iota(p.begin(), p.end(), 0);
    return p;
}

inline Permutation inverse_permutation(const Permutation& p) {
    Permutation inv(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = static_cast<int>(i);
    return inv;
}

// M_{pi^{-1}}: row r of the result is the row of M whose rank is r.
inline Matrix rows_by_rank(const Matrix& m, const Permutation& pi) {
    if (!is_permutation_of_n(pi, m.rows())) throw std::invalid_argument("rows_by_rank: not a permutation");
    Permutation inv = inverse_permutation(pi);
    Matrix out(m.rows(), m.cols());
    for (int r = 0; r < m.rows(); ++r)
        for (int k = 0; k < m.cols(); ++k) out(r, k) = m(inv[r], k);
    return out;
}

}  // namespace isorank
