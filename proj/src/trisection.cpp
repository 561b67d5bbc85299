#include "isorank/trisection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

namespace isorank {

namespace {

// Padded mean of a group of rows: real member sums plus `extra_ones`
// synthetic all-one experts, divided by `total` rows.  Window sums follow the
// 0-left / 1-right padding of the series.
struct MeanSeries {
    const std::vector<double>* sum_prefix = nullptr;  // length d+1
    double extra_ones = 0.0;
    double total = 0.0;
    int d = 0;

    double window_sum(long a, long b) const {
        if (b <= a) return 0.0;
        long lo = std::clamp(a, 0L, static_cast<long>(d));
        long hi = std::clamp(b, 0L, static_cast<long>(d));
        double s = 0.0;
        if (hi > lo) s = ((*sum_prefix)[hi] - (*sum_prefix)[lo] + extra_ones * (hi - lo)) / total;
        if (b > d) s += static_cast<double>(b - std::max(a, static_cast<long>(d)));
        return s;
    }
};

std::vector<double> group_sum_prefix(const Matrix& y, const std::vector<int>& experts) {
    std::vector<double> sums(y.cols(), 0.0);
    for (int i : experts) {
        const double* row = y.row_ptr(i);
        for (int k = 0; k < y.cols(); ++k) sums[k] += row[k];
    }
    return prefix_sums(sums);
}

// Capped: the callers only compare the result against scales <= d.
long dyadic_ceil(double x) {
    if (x <= 1.0) return 1;
    long r = 1;
    while (static_cast<double>(r) < x) {
        if (r >= (1L << 40)) return 1L << 40;
        r *= 2;
    }
    return r;
}

}  // namespace

TrisectionResult pivot(const AggregatedMatrix& z, const std::vector<double>& w, int gamma,
                       const TrisectionParams& params) {
    const int p = z.Z.rows();
    const int q = z.Z.cols();
    if (static_cast<int>(w.size()) != q) throw std::invalid_argument("pivot: weight length mismatch");
    if (gamma < 1 || gamma > p) throw std::invalid_argument("pivot: pivot rank out of range");
    double norm2 = 0.0, norm_inf = 0.0;
    for (double x : w) {
        if (x < 0.0) throw std::invalid_argument("pivot: weights must be nonnegative");
        norm2 += x * x;
        norm_inf = std::max(norm_inf, x);
    }
    if (norm2 <= 0.0) throw std::invalid_argument("pivot: zero weight vector");
    norm2 = std::sqrt(norm2);

    std::vector<double> psi(p, 0.0);
    for (int i = 0; i < p; ++i) {
        double s = 0.0;
        for (int l = 0; l < q; ++l) s += z.Z(i, l) * w[l];
        psi[i] = s / norm2;
    }

    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (psi[a] != psi[b]) return psi[a] < psi[b];
        return z.experts[a] < z.experts[b];
    });
    const double psi_gamma = psi[order[gamma - 1]];

    double log_term = std::sqrt(std::max(0.0, params.scaled_log(2.0 * p / params.delta)));
    double thr = params.beta_tris() * log_term;
    double thr_bar = params.beta_bar_tris() * log_term;
    if (params.mode == TrisMode::WM_SR) {
        thr += 4.0 * norm_inf / norm2;
        thr_bar += 8.0 * norm_inf / norm2;
    }

    TrisectionResult res;
    for (int i = 0; i < p; ++i) {
        if (psi[i] > psi_gamma + thr) res.U.push_back(z.experts[i]);
        if (psi[i] < psi_gamma - thr) res.L.push_back(z.experts[i]);
        if (psi[i] > psi_gamma + thr_bar) res.U_bar.push_back(z.experts[i]);
        if (psi[i] < psi_gamma - thr_bar) res.L_bar.push_back(z.experts[i]);
    }
    std::sort(res.L.begin(), res.L.end());
    std::sort(res.U.begin(), res.U.end());
    std::sort(res.L_bar.begin(), res.L_bar.end());
    std::sort(res.U_bar.begin(), res.U_bar.end());
    return res;
}

double cusum(const std::vector<double>& ybar, int k, int width) {
    if (width < 1) throw std::invalid_argument("cusum: width must be >= 1");
    std::vector<double> prefix = prefix_sums(ybar);
    const int d = static_cast<int>(ybar.size());
    double forward = padded_window_sum(prefix, d, k, k + static_cast<long>(width));
    double backward = padded_window_sum(prefix, d, k - static_cast<long>(width), k);
    return (forward - backward) / width;
}

std::vector<int> cusum_block_set(const std::vector<double>& series, int d, double threshold,
                                 int window, int r) {
    std::vector<double> prefix = prefix_sums(series);
    std::vector<int> hits;
    for (int k = 0; k < d; ++k) {
        double forward = padded_window_sum(prefix, d, k, k + static_cast<long>(window));
        double backward = padded_window_sum(prefix, d, k - static_cast<long>(window), k);
        if ((forward - backward) / window >= threshold) hits.push_back(k);
    }
    return encode_set(hits, r, d);
}

int cusum_window_cp(int p_size, double h, int r, int d, const TrisectionParams& params) {
    double r0 = 32.0 * params.zeta * params.zeta * params.scaled_log(2.0 * d / params.delta) /
                (p_size * h * h);
    long base = std::max(static_cast<long>(std::ceil(r0)), static_cast<long>(r));
    if (base < 1) base = 1;
    long window = 8 * base;
    return static_cast<int>(std::min(window, static_cast<long>(1) << 30));
}

std::vector<int> dimension_reduction_cp(const Matrix& y, const std::vector<int>& experts,
                                        double h, int r, const TrisectionParams& params) {
    if (experts.empty()) throw std::invalid_argument("dimension_reduction_cp: empty expert set");
    const int d = y.cols();
    std::vector<double> mean(d, 0.0);
    for (int i : experts)
        for (int k = 0; k < d; ++k) mean[k] += y(i, k);
    for (double& v : mean) v /= experts.size();
    int window = cusum_window_cp(static_cast<int>(experts.size()), h, r, d, params);
    return cusum_block_set(mean, d, h / 4.0, window, r);
}

namespace {

struct Neighborhood {
    MeanSeries up, down;
};

// Cached per-call state for the WM statistics on one sample.
struct WmState {
    int d = 0;
    std::vector<std::vector<double>> up_prefix, down_prefix;  // cumulative group sums
    std::vector<long> up_count, down_count;
    std::vector<double> own_prefix;
    long own_count = 0;

    static WmState build(const Matrix& y, const NeighborhoodContext& ctx,
                         const std::vector<int>& experts) {
        WmState st;
        st.d = y.cols();
        st.own_prefix = group_sum_prefix(y, experts);
        st.own_count = static_cast<long>(experts.size());

        auto accumulate = [&](const std::vector<std::vector<int>>& groups,
                              std::vector<std::vector<double>>& prefixes, std::vector<long>& counts) {
            std::vector<double> sums(st.d, 0.0);
            long cnt = 0;
            prefixes.push_back(prefix_sums(sums));
            counts.push_back(0);
            for (const auto& g : groups) {
                for (int i : g) {
                    const double* row = y.row_ptr(i);
                    for (int k = 0; k < st.d; ++k) sums[k] += row[k];
                }
                cnt += static_cast<long>(g.size());
                prefixes.push_back(prefix_sums(sums));
                counts.push_back(cnt);
            }
        };
        accumulate(ctx.above, st.up_prefix, st.up_count);
        accumulate(ctx.below, st.down_prefix, st.down_count);
        return st;
    }

    // Smallest neighborhood reaching `budget` experts; synthetic singletons
    // (all-one rows above, all-zero rows below) extend past the real groups.
    Neighborhood neighborhood(double budget) const {
        Neighborhood nb;
        nb.up = pick(up_prefix, up_count, budget, /*ones=*/true);
        nb.down = pick(down_prefix, down_count, budget, /*ones=*/false);
        return nb;
    }

    MeanSeries own_mean() const {
        return MeanSeries{&own_prefix, 0.0, static_cast<double>(own_count), d};
    }

private:
    MeanSeries pick(const std::vector<std::vector<double>>& prefixes, const std::vector<long>& counts,
                    double budget, bool ones) const {
        std::size_t t = 1;
        while (t < counts.size() && static_cast<double>(counts[t]) < budget) ++t;
        double synth = 0.0;
        if (t >= counts.size()) {
            t = counts.size() - 1;
            synth = std::max(0.0, std::ceil(budget - static_cast<double>(counts[t])));
            if (counts[t] + synth <= 0) synth = 1.0;
        }
        MeanSeries ms;
        ms.sum_prefix = &prefixes[t];
        ms.extra_ones = ones ? synth : 0.0;
        ms.total = static_cast<double>(counts[t]) + synth;
        ms.d = d;
        return ms;
    }
};

std::vector<int> wm_blocks(const WmState& st, double h, int r, const TrisectionParams& params) {
    const int d = st.d;
    const int n_scales = d >= 1 ? static_cast<int>(std::floor(std::log2(d))) + 1 : 1;
    const bool shifted = params.mode == TrisMode::WM_SR;
    const double zeta2 = params.zeta * params.zeta;
    const double log_term = params.scaled_log(4.0 * d * n_scales / params.delta);

    double r0 = (1 << 9) * log_term * zeta2 / (st.own_count * h * h);
    long r_tilde = 4L * std::max(dyadic_ceil(r0), static_cast<long>(r));

    std::vector<int> hits;
    for (long r_cp = 4L * r; r_cp <= r_tilde && r_cp <= d; r_cp *= 2) {
        double budget = (1 << 11) * log_term * zeta2 / (r_cp * h * h);
        Neighborhood nb = st.neighborhood(budget);

        long rc2 = 2 * r_cp;
        MeanSeries cusum_series;
        Neighborhood nb2;
        if (rc2 > r_tilde) {
            cusum_series = st.own_mean();
        } else {
            nb2 = st.neighborhood((1 << 11) * log_term * zeta2 / (rc2 * h * h));
            // CUSUM over the pooled neighborhood V+ u V-; combine the two
            // series through their window sums below.
        }

        for (int k = 0; k < d; ++k) {
            double width;
            if (!shifted) {
                width = (nb.up.window_sum(k - r_cp, k + r_cp) - nb.down.window_sum(k - r_cp, k + r_cp)) /
                        (2.0 * r_cp);
            } else {
                width = (nb.up.window_sum(k - r_cp, k + r_cp) -
                         nb.down.window_sum(k - r_cp - 1, k + r_cp - 1)) /
                        (2.0 * r_cp);
            }
            if (width < h / 16.0) continue;

            double forward, backward;
            auto window_pair = [&](const MeanSeries& a, const MeanSeries& b, double wa, double wb,
                                   long lo, long hi) {
                return (a.window_sum(lo, hi) * wa + b.window_sum(lo, hi) * wb) / (wa + wb);
            };
            if (rc2 > r_tilde) {
                forward = cusum_series.window_sum(k, k + rc2);
                backward = shifted ? cusum_series.window_sum(k - rc2 - 1, k - 1)
                                   : cusum_series.window_sum(k - rc2, k);
            } else {
                double wu = nb2.up.total, wd = nb2.down.total;
                forward = window_pair(nb2.up, nb2.down, wu, wd, k, k + rc2);
                backward = shifted ? window_pair(nb2.up, nb2.down, wu, wd, k - rc2 - 1, k - 1)
                                   : window_pair(nb2.up, nb2.down, wu, wd, k - rc2, k);
            }
            if ((forward - backward) / rc2 >= h / 16.0) hits.push_back(k);
        }
    }
    std::sort(hits.begin(), hits.end());
    hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
    return encode_set(hits, r, d);
}

}  // namespace

std::vector<int> dimension_reduction_wm(const Matrix& y, const NeighborhoodContext& ctx,
                                        const std::vector<int>& experts, double h, int r,
                                        const TrisectionParams& params) {
    if (experts.empty()) throw std::invalid_argument("dimension_reduction_wm: empty expert set");
    WmState st = WmState::build(y, ctx, experts);
    return wm_blocks(st, h, r, params);
}

PcaDirection pca_direction(const AggregatedMatrix& z1, const AggregatedMatrix& z2,
                           const TrisectionParams& params) {
    if (!z1.Z.same_shape(z2.Z)) throw std::invalid_argument("pca_direction: shape mismatch");
    const int p = z1.Z.rows();
    const int q = z1.Z.cols();
    if (p < 1) throw std::invalid_argument("pca_direction: empty expert set");
    if (p == 1) return PcaDirection{{1.0}, true};

    std::vector<double> m1 = column_mean(z1.Z);
    std::vector<double> m2 = column_mean(z2.Z);
    Matrix c1(p, q), dd(p, q);
    for (int i = 0; i < p; ++i)
        for (int l = 0; l < q; ++l) {
            c1(i, l) = z1.Z(i, l) - m1[l];
            dd(i, l) = c1(i, l) - (z2.Z(i, l) - m2[l]);
        }

    Matrix a(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j) {
            double s = 0.0;
            for (int l = 0; l < q; ++l) s += c1(i, l) * c1(j, l) - 0.5 * dd(i, l) * dd(j, l);
            a(i, j) = s;
            a(j, i) = s;
        }

    double shift = 0.0;
    for (int i = 0; i < p; ++i) {
        double row = 0.0;
        for (int j = 0; j < p; ++j) row += std::abs(a(i, j));
        shift = std::max(shift, row);
    }

    // Hash-based start: a structured start (constant, ramp) can sit inside an
    // eigenspace of the shifted matrix and stall the Rayleigh test.
    std::vector<double> x(p);
    for (int i = 0; i < p; ++i) {
        std::uint64_t u = static_cast<std::uint64_t>(i) + 0x9e3779b97f4a7c15ULL;
        u = (u ^ (u >> 30)) * 0xbf58476d1ce4e5b9ULL;
        u = (u ^ (u >> 27)) * 0x94d049bb133111ebULL;
        u ^= u >> 31;
        x[i] = (static_cast<double>(u >> 11) * 0x1.0p-53) - 0.5;
    }
    double nx = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
    for (double& v : x) v /= nx;

    bool converged = false;
    double rayleigh_prev = 0.0;
    std::vector<double> next(p);
    for (int it = 0; it < params.pca_max_iter; ++it) {
        for (int i = 0; i < p; ++i) {
            double s = shift * x[i];
            for (int j = 0; j < p; ++j) s += a(i, j) * x[j];
            next[i] = s;
        }
        double rayleigh = std::inner_product(next.begin(), next.end(), x.begin(), 0.0);
        double norm = std::sqrt(std::inner_product(next.begin(), next.end(), next.begin(), 0.0));
        if (norm <= 1e-300) { converged = true; break; }  // A == 0: any unit vector maximizes
        double step = 0.0;  // sign-aligned iterate change; the Rayleigh test alone
                            // is quadratically flat near eigenvectors
        double dot = 0.0;
        for (int i = 0; i < p; ++i) dot += x[i] * next[i] / norm;
        double sign = dot >= 0.0 ? 1.0 : -1.0;
        for (int i = 0; i < p; ++i) {
            double nv = sign * next[i] / norm;
            step = std::max(step, std::abs(nv - x[i]));
            x[i] = nv;
        }
        if (it > 0 && std::abs(rayleigh - rayleigh_prev) <= params.pca_tol * (1.0 + std::abs(rayleigh)) &&
            step <= 1e-7) {
            converged = true;
            break;
        }
        rayleigh_prev = rayleigh;
    }

    int arg = 0;
    for (int i = 1; i < p; ++i)
        if (std::abs(x[i]) > std::abs(x[arg])) arg = i;
    if (x[arg] < 0.0)
        for (double& v : x) v = -v;
    return PcaDirection{std::move(x), converged};
}

std::vector<double> threshold_weights(const std::vector<double>& v, const AggregatedMatrix& z3,
                                      const TrisectionParams& params) {
    const int p = z3.Z.rows();
    const int q = z3.Z.cols();
    if (static_cast<int>(v.size()) != p) throw std::invalid_argument("threshold_weights: length mismatch");
    std::vector<double> mean = column_mean(z3.Z);
    double thr = 2.0 * params.zeta *
                 std::sqrt(std::max(0.0, 2.0 * params.scaled_log(2.0 * q / params.delta)));
    std::vector<double> w(q, 0.0);
    for (int l = 0; l < q; ++l) {
        double zl = 0.0;
        for (int i = 0; i < p; ++i) zl += v[i] * (z3.Z(i, l) - mean[l]);
        if (std::abs(zl) >= thr) w[l] = std::abs(zl);
    }
    return w;
}

namespace {

void merge_into(std::vector<int>& dst, const std::vector<int>& src) {
    std::vector<int> merged;
    merged.reserve(dst.size() + src.size());
    std::set_union(dst.begin(), dst.end(), src.begin(), src.end(), std::back_inserter(merged));
    dst = std::move(merged);
}

void merge_result(TrisectionResult& acc, const TrisectionResult& r) {
    merge_into(acc.L, r.L);
    merge_into(acc.U, r.U);
    merge_into(acc.L_bar, r.L_bar);
    merge_into(acc.U_bar, r.U_bar);
}

}  // namespace

TrisectionResult double_trisection(const std::array<const Matrix*, 6>& samples,
                                   const NeighborhoodContext& ctx, const std::vector<int>& experts,
                                   int gamma, const DyadicGrids& grids,
                                   const TrisectionParams& params, TrisectionDiag* diag) {
    TrisectionResult acc;
    if (experts.size() <= 1) return acc;
    const Matrix& y1 = *samples[0];
    const int d = y1.cols();

    // Sample 1 feeds every dimension-reduction round; cache its group sums.
    std::vector<double> mean1(d, 0.0);
    for (int i : experts)
        for (int k = 0; k < d; ++k) mean1[k] += y1(i, k);
    for (double& v : mean1) v /= experts.size();
    WmState wm_state;
    const bool use_memory = params.mode != TrisMode::HT;
    if (use_memory) wm_state = WmState::build(y1, ctx, experts);

    for (double h : grids.heights) {
        for (int r : grids.scales) {
            std::vector<int> q_hat;
            if (use_memory) {
                q_hat = wm_blocks(wm_state, h, r, params);
            } else {
                int window = cusum_window_cp(static_cast<int>(experts.size()), h, r, d, params);
                q_hat = cusum_block_set(mean1, d, h / 4.0, window, r);
            }
            if (q_hat.empty()) {
                if (diag) ++diag->rounds_skipped_empty_q;
                continue;
            }

            AggregatedMatrix z2 = encode_matrix(*samples[1], experts, q_hat, r);
            std::vector<double> ones(q_hat.size(), 1.0);
            TrisectionResult avg = pivot(z2, ones, gamma, params);
            merge_result(acc, avg);

            std::vector<int> p_tilde;
            {
                std::vector<int> removed;
                std::set_union(avg.L_bar.begin(), avg.L_bar.end(), avg.U_bar.begin(), avg.U_bar.end(),
                               std::back_inserter(removed));
                std::set_difference(experts.begin(), experts.end(), removed.begin(), removed.end(),
                                    std::back_inserter(p_tilde));
            }
            if (p_tilde.empty()) continue;

            AggregatedMatrix z3 = encode_matrix(*samples[2], p_tilde, q_hat, r);
            AggregatedMatrix z4 = encode_matrix(*samples[3], p_tilde, q_hat, r);
            PcaDirection dir = pca_direction(z3, z4, params);
            if (!dir.converged) {
                if (diag) ++diag->pca_nonconverged;
                dir.v.assign(p_tilde.size(), 1.0 / std::sqrt(static_cast<double>(p_tilde.size())));
            }

            AggregatedMatrix z5 = encode_matrix(*samples[4], p_tilde, q_hat, r);
            std::vector<double> w_plus = threshold_weights(dir.v, z5, params);
            bool all_zero = std::all_of(w_plus.begin(), w_plus.end(), [](double x) { return x == 0.0; });
            if (all_zero) {
                if (diag) ++diag->rounds_skipped_zero_w;
                continue;
            }

            AggregatedMatrix z6 = encode_matrix(*samples[5], experts, q_hat, r);
            merge_result(acc, pivot(z6, w_plus, gamma, params));
        }
    }
    return acc;
}

}  // namespace isorank
