#include "isorank/partial.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace isorank {

ObservationLog sample_poisson_observations(const ProblemInstance& inst, double lambda,
                                           const NoiseSpec& noise, RngStream& rng) {
    if (lambda <= 0.0) throw std::invalid_argument("sample_poisson_observations: lambda must be positive");
    ObservationLog log;
    log.n = inst.n;
    log.d = inst.d;
    log.lambda = lambda;
    for (int i = 0; i < inst.n; ++i) {
        for (int k = 0; k < inst.d; ++k) {
            long count = rng.poisson(lambda);
            for (long c = 0; c < count; ++c) {
                double y = inst.M(i, k);
                switch (noise.kind) {
                    case NoiseKind::none: break;
                    case NoiseKind::gaussian: y += noise.sigma * rng.normal(); break;
                    case NoiseKind::bernoulli:
                        if (y < 0.0 || y > 1.0)
                            throw std::invalid_argument("sample_poisson_observations: Bernoulli mean outside [0,1]");
                        y = rng.bernoulli(y) ? 1.0 : 0.0;
                        break;
                }
                log.records.push_back({i, k, y});
            }
        }
    }
    rng.shuffle(log.records);
    return log;
}

void save_log_csv(const ObservationLog& log, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_log_csv: cannot open " + path);
    f.precision(17);
    f << "i,k,y\n";
    for (const auto& r : log.records) f << r.i << "," << r.k << "," << r.y << "\n";
}

ObservationLog load_log_csv(const std::string& path, int n, int d, double lambda) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_log_csv: cannot open " + path);
    ObservationLog log;
    log.n = n;
    log.d = d;
    log.lambda = lambda;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (first && line.rfind("i,", 0) == 0) { first = false; continue; }
        first = false;
        std::istringstream ss(line);
        ObsRecord r;
        char comma;
        if (!(ss >> r.i >> comma >> r.k >> comma >> r.y))
            throw std::runtime_error("load_log_csv: malformed row '" + line + "'");
        if (r.i < 0 || r.i >= n || r.k < 0 || r.k >= d)
            throw std::runtime_error("load_log_csv: position out of bounds in '" + line + "'");
        log.records.push_back(r);
    }
    return log;
}

std::pair<ObservationLog, ObservationLog> split_log(const ObservationLog& log, RngStream& rng) {
    ObservationLog a, b;
    a.n = b.n = log.n;
    a.d = b.d = log.d;
    a.lambda = b.lambda = log.lambda / 2.0;  // post-thinning intensity
    for (const auto& r : log.records) (rng.bernoulli(0.5) ? a : b).records.push_back(r);
    return {std::move(a), std::move(b)};
}

double conformance_delta(double lambda, int n, int d, double zeta) {
    double zm = std::min(zeta > 0.0 ? zeta : 1.0, 1.0);
    double base = std::max(lambda, 1.0) * static_cast<double>(n) * d;
    return zm * zm / (base * base);
}

ReductionPlan plan_reduction(double lambda, int n, int d, double zeta, double delta,
                             bool paper_mode, std::optional<SampleBudget> budget_override) {
    if (lambda <= 0.0) throw std::invalid_argument("plan_reduction: lambda must be positive");
    ReductionPlan plan;
    plan.zeta_eff = zeta / std::sqrt(std::max(lambda, 1.0));
    plan.budget = budget_override ? *budget_override
                                  : (paper_mode ? SampleBudget::paper(n, d, plan.zeta_eff, delta)
                                                : SampleBudget::practical(n, d));
    double ups = static_cast<double>(std::max(plan.budget.upsilon_star(), 1L));
    plan.lambda_minus = lambda / (4.0 * ups);

    if (plan.lambda_minus <= 2.0 / d) {
        plan.regime = Regime::very_small;
    } else if (plan.lambda_minus <= 1.0) {
        plan.regime = Regime::small_sample;
        plan.l_lambda = static_cast<int>(std::floor(1.0 / plan.lambda_minus));
        plan.reduced_d = d / plan.l_lambda;
        plan.zeta_eff = zeta;  // one raw observation per reduced entry
    } else {
        plan.regime = Regime::large_sample;
        plan.reduced_d = d;
        plan.zeta_eff = zeta / std::sqrt(std::floor(plan.lambda_minus));
    }
    return plan;
}

ReductionOutcome reduce_observations(const ObservationLog& log, const ReductionPlan& plan) {
    if (plan.regime == Regime::very_small)
        throw std::invalid_argument("reduce_observations: nothing to build in the very-small regime");
    ReductionOutcome out;
    const long ups = plan.budget.upsilon_star();
    const int n = log.n;

    if (plan.regime == Regime::small_sample) {
        const int l = plan.l_lambda;
        const int rd = plan.reduced_d;
        // per (i, bin): the first Upsilon* observations in record order
        std::vector<std::vector<double>> cell(static_cast<std::size_t>(n) * rd);
        for (const auto& r : log.records) {
            int j = r.k / l;
            if (j >= rd) continue;  // trailing columns that fill no bin
            auto& c = cell[static_cast<std::size_t>(r.i) * rd + j];
            if (static_cast<long>(c.size()) < ups) {
                c.push_back(r.y);
                ++out.consumed;
            }
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < rd; ++j)
                if (static_cast<long>(cell[static_cast<std::size_t>(i) * rd + j].size()) < ups) {
                    out.deficient_i = i;
                    out.deficient_j = j;
                    return out;
                }
        out.samples.assign(ups, Matrix(n, rd));
        for (long s = 0; s < ups; ++s)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < rd; ++j)
                    out.samples[s](i, j) = cell[static_cast<std::size_t>(i) * rd + j][s];
        out.ok = true;
        return out;
    }

    // large sample: disjoint batches of floor(lambda_minus) observations per entry
    const long batch = static_cast<long>(std::floor(plan.lambda_minus));
    const long need = batch * ups;
    const int d = log.d;
    std::vector<std::vector<double>> cell(static_cast<std::size_t>(n) * d);
    for (const auto& r : log.records) {
        auto& c = cell[static_cast<std::size_t>(r.i) * d + r.k];
        if (static_cast<long>(c.size()) < need) {
            c.push_back(r.y);
            ++out.consumed;
        }
    }
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k)
            if (static_cast<long>(cell[static_cast<std::size_t>(i) * d + k].size()) < need) {
                out.deficient_i = i;
                out.deficient_j = k;
                return out;
            }
    out.samples.assign(ups, Matrix(n, d));
    for (long s = 0; s < ups; ++s)
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < d; ++k) {
                const auto& c = cell[static_cast<std::size_t>(i) * d + k];
                double sum = 0.0;
                for (long z = s * batch; z < (s + 1) * batch; ++z) sum += c[z];
                out.samples[s](i, k) = sum / batch;
            }
    out.ok = true;
    return out;
}

Permutation estimate_wmp(const ObservationLog& log, const TrisectionParams& params,
                         const ReductionPlan& plan, RngStream& rng, WmpTrace* trace) {
    if (trace) trace->regime = plan.regime;
    const int n = log.n;

    auto uniform_guess = [&]() {
        Permutation pi(n);
        std::iota(pi.begin(), pi.end(), 0);
        rng.shuffle(pi);
        return pi;
    };

    if (plan.regime == Regime::very_small) return uniform_guess();

    ReductionOutcome red = reduce_observations(log, plan);
    if (!red.ok) {
        if (trace) trace->reduction_failed = true;
        return uniform_guess();  // arbitrary permutation outside the good event
    }

    TrisectionParams p = params;
    p.zeta = plan.zeta_eff;
    Variant variant = plan.regime == Regime::small_sample ? Variant::WM_SR : Variant::WM;
    TreeSortResult res = estimate(red.samples, variant, p, plan.budget, rng);
    if (trace) trace->tree_result = res;
    return res.pi_hat;
}

}  // namespace isorank
