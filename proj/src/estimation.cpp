#include "isorank/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace isorank {

std::vector<double> isotonic_regression_1d(const std::vector<double>& v,
                                           const std::vector<double>& w) {
    if (v.size() != w.size()) throw std::invalid_argument("isotonic_regression_1d: length mismatch");
    for (double x : w)
        if (x <= 0.0) throw std::invalid_argument("isotonic_regression_1d: weights must be positive");
    const int n = static_cast<int>(v.size());
    std::vector<double> level(n), weight(n);
    std::vector<int> count(n);
    int blocks = 0;
    for (int i = 0; i < n; ++i) {
        level[blocks] = v[i];
        weight[blocks] = w[i];
        count[blocks] = 1;
        ++blocks;
        while (blocks > 1 && level[blocks - 2] > level[blocks - 1]) {
            double tw = weight[blocks - 2] + weight[blocks - 1];
            level[blocks - 2] = (level[blocks - 2] * weight[blocks - 2] +
                                 level[blocks - 1] * weight[blocks - 1]) / tw;
            weight[blocks - 2] = tw;
            count[blocks - 2] += count[blocks - 1];
            --blocks;
        }
    }
    std::vector<double> out;
    out.reserve(n);
    for (int b = 0; b < blocks; ++b) out.insert(out.end(), count[b], level[b]);
    return out;
}

namespace {

void project_rows_monotone(Matrix& m) {
    std::vector<double> w(m.cols(), 1.0);
    for (int i = 0; i < m.rows(); ++i) {
        std::vector<double> row(m.row_ptr(i), m.row_ptr(i) + m.cols());
        std::vector<double> fit = isotonic_regression_1d(row, w);
        std::copy(fit.begin(), fit.end(), m.row_ptr(i));
    }
}

void project_cols_monotone(Matrix& m) {
    std::vector<double> w(m.rows(), 1.0);
    std::vector<double> col(m.rows());
    for (int k = 0; k < m.cols(); ++k) {
        for (int i = 0; i < m.rows(); ++i) col[i] = m(i, k);
        std::vector<double> fit = isotonic_regression_1d(col, w);
        for (int i = 0; i < m.rows(); ++i) m(i, k) = fit[i];
    }
}

// Exact monotonization pass after clamping: max-accumulate along rows then
// columns, which keeps the result within 1e-9 of the Dykstra iterate.
void force_monotone(Matrix& m) {
    for (int i = 0; i < m.rows(); ++i)
        for (int k = 1; k < m.cols(); ++k) m(i, k) = std::max(m(i, k), m(i, k - 1));
    for (int k = 0; k < m.cols(); ++k)
        for (int i = 1; i < m.rows(); ++i) m(i, k) = std::max(m(i, k), m(i - 1, k));
}

}  // namespace

ProjectionResult project_bi_isotonic(const Matrix& y, const ProjectionSettings& settings) {
    for (double v : y.data())
        if (!std::isfinite(v)) throw std::invalid_argument("project_bi_isotonic: non-finite entry");
    if (settings.tol <= 0.0 || settings.max_iter < 1)
        throw std::invalid_argument("project_bi_isotonic: bad settings");

    ProjectionResult res;
    Matrix x = y;
    Matrix inc_row(y.rows(), y.cols(), 0.0), inc_col(y.rows(), y.cols(), 0.0);
    Matrix prev = x;
    res.converged = false;
    for (int it = 0; it < settings.max_iter; ++it) {
        // Dykstra cycle: row cone, then column cone, each with its increment.
        for (std::size_t t = 0; t < x.data().size(); ++t) x.data()[t] += inc_row.data()[t];
        Matrix before = x;
        project_rows_monotone(x);
        for (std::size_t t = 0; t < x.data().size(); ++t)
            inc_row.data()[t] = before.data()[t] - x.data()[t];

        for (std::size_t t = 0; t < x.data().size(); ++t) x.data()[t] += inc_col.data()[t];
        before = x;
        project_cols_monotone(x);
        for (std::size_t t = 0; t < x.data().size(); ++t)
            inc_col.data()[t] = before.data()[t] - x.data()[t];

        res.iterations = it + 1;
        if (it > 0 && frobenius_sq_diff(x, prev) <= settings.tol * settings.tol) {
            res.converged = true;
            break;
        }
        prev = x;
    }

    for (double& v : x.data()) v = std::clamp(v, 0.0, 1.0);
    force_monotone(x);
    for (double& v : x.data()) v = std::clamp(v, 0.0, 1.0);
    res.B = std::move(x);
    return res;
}

double projection_certificate(const Matrix& y, const Matrix& fit, double level_tol) {
    if (!y.same_shape(fit)) throw std::invalid_argument("projection_certificate: shape mismatch");
    const int rows = y.rows(), cols = y.cols();
    std::vector<int> component(static_cast<std::size_t>(rows) * cols, -1);
    double worst = 0.0;
    int next_component = 0;
    for (int start = 0; start < rows * cols; ++start) {
        if (component[start] >= 0) continue;
        // flood-fill the connected level set of equal fitted values
        double value = fit.data()[start];
        std::vector<int> stack{start};
        component[start] = next_component;
        double residual = 0.0;
        while (!stack.empty()) {
            int cell = stack.back();
            stack.pop_back();
            residual += y.data()[cell] - fit.data()[cell];
            int i = cell / cols, j = cell % cols;
            const int neighbors[4] = {i > 0 ? cell - cols : -1, i + 1 < rows ? cell + cols : -1,
                                      j > 0 ? cell - 1 : -1, j + 1 < cols ? cell + 1 : -1};
            for (int nb : neighbors) {
                if (nb < 0 || component[nb] >= 0) continue;
                if (std::abs(fit.data()[nb] - value) > level_tol) continue;
                component[nb] = next_component;
                stack.push_back(nb);
            }
        }
        // interior components can move both ways; clamped ones only inward
        double violation;
        if (value <= level_tol) violation = std::max(0.0, residual);
        else if (value >= 1.0 - level_tol) violation = std::max(0.0, -residual);
        else violation = std::abs(residual);
        worst = std::max(worst, violation);
        ++next_component;
    }
    return worst;
}

Matrix estimate_matrix(const ObservationLog& second_half, const Permutation& pi_hat,
                       double lambda_effective, const ProjectionSettings& settings,
                       ProjectionResult* proj_stats) {
    const int n = second_half.n, d = second_half.d;
    if (!is_permutation_of_n(pi_hat, n)) throw std::invalid_argument("estimate_matrix: bad permutation");
    if (lambda_effective <= 0.0) throw std::invalid_argument("estimate_matrix: bad intensity");

    Matrix y2(n, d, 0.0);
    for (const auto& r : second_half.records) y2(r.i, r.k) += r.y;
    for (double& v : y2.data()) v /= lambda_effective;

    Matrix arranged = rows_by_rank(y2, pi_hat);
    ProjectionResult proj = project_bi_isotonic(arranged, settings);
    if (proj_stats) *proj_stats = proj;

    Matrix out(n, d);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k) out(i, k) = proj.B(pi_hat[i], k);
    return out;
}

namespace {

Permutation rank_by_scores(const std::vector<double>& score) {
    const int n = static_cast<int>(score.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (score[a] != score[b]) return score[a] < score[b];
        return a < b;
    });
    Permutation pi(n);
    for (int r = 0; r < n; ++r) pi[order[r]] = r;
    return pi;
}

}  // namespace

Permutation borda_rank(const Matrix& y) {
    std::vector<double> sums(y.rows(), 0.0);
    for (int i = 0; i < y.rows(); ++i) {
        const double* row = y.row_ptr(i);
        for (int k = 0; k < y.cols(); ++k) sums[i] += row[k];
    }
    return rank_by_scores(sums);
}

Permutation borda_rank(const ObservationLog& log) {
    std::vector<double> sums(log.n, 0.0);
    for (const auto& r : log.records) sums[r.i] += r.y;
    return rank_by_scores(sums);
}

Permutation pairwise_estimator(const ObservationLog& log, const PairwiseParams& params,
                               RngStream& rng, PairwiseComparisons* out) {
    const int n = log.n, d = log.d;
    if (n < 2) throw std::invalid_argument("pairwise_estimator: need at least two experts");

    // Records grouped per expert once; each pair re-labels its two rows 0/1.
    std::vector<std::vector<ObsRecord>> by_expert(n);
    for (const auto& r : log.records) by_expert[r.i].push_back(r);

    TrisectionParams tris = params.tris;
    if (params.paper_delta) {
        double base = std::max(log.lambda, 1.0) * static_cast<double>(n) * n * d;
        tris.delta = 1.0 / (base * base);
    }

    PairwiseComparisons pc;
    pc.phi.assign(n, 0);
    long pair_id = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j, ++pair_id) {
            ObservationLog sub;
            sub.n = 2;
            sub.d = d;
            sub.lambda = log.lambda;
            for (const auto& r : by_expert[i]) sub.records.push_back({0, r.k, r.y});
            for (const auto& r : by_expert[j]) sub.records.push_back({1, r.k, r.y});

            ReductionPlan plan = plan_reduction(log.lambda, 2, d, tris.zeta, tris.delta,
                                                /*paper_mode=*/false, params.budget_override);
            if (plan.regime == Regime::very_small) continue;

            RngStream pair_rng = rng.substream(0x9c1u + static_cast<std::uint64_t>(pair_id));
            WmpTrace trace;
            estimate_wmp(sub, tris, plan, pair_rng, &trace);
            if (trace.reduction_failed || !trace.tree_result) continue;

            // Root trisection of the 2-expert tree.
            const SortingTree& tree = trace.tree_result->tree;
            if (tree.nodes[0].is_leaf()) continue;
            const auto& o = tree.nodes[tree.nodes[0].children[0]].members;
            const auto& p = tree.nodes[tree.nodes[0].children[1]].members;
            const auto& iset = tree.nodes[tree.nodes[0].children[2]].members;
            if (o.empty() && p.size() == 1 && iset.size() == 1) {
                int low = p[0] == 0 ? i : j;
                int high = iset[0] == 0 ? i : j;
                pc.pc.emplace_back(low, high);
                ++pc.phi[high];
            }
        }
    }

    Permutation pi = rank_by_scores(std::vector<double>(pc.phi.begin(), pc.phi.end()));
    if (out) *out = std::move(pc);
    return pi;
}

}  // namespace isorank
