#include "isorank/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace isorank {

double group_variance(const Matrix& m, const std::vector<int>& members) {
    if (members.empty()) return 0.0;
    const int d = m.cols();
    std::vector<double> mean(d, 0.0);
    for (int i : members)
        for (int k = 0; k < d; ++k) mean[k] += m(i, k);
    for (double& v : mean) v /= members.size();
    double total = 0.0;
    for (int i : members)
        for (int k = 0; k < d; ++k) {
            double diff = m(i, k) - mean[k];
            total += diff * diff;
        }
    return total;
}

std::vector<int> population_cusum_blocks(const Matrix& m, const std::vector<int>& members,
                                         double threshold, int window, int r) {
    const int d = m.cols();
    std::vector<double> mean(d, 0.0);
    for (int i : members)
        for (int k = 0; k < d; ++k) mean[k] += m(i, k);
    for (double& v : mean) v /= members.size();
    return cusum_block_set(mean, d, threshold, window, r);
}

namespace {

// rank of each member within the group under pi_star (0-based)
std::vector<int> group_ranks(const std::vector<int>& group, const Permutation& pi_star) {
    std::vector<int> order = group;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return pi_star[a] < pi_star[b]; });
    std::vector<int> ranks;
    ranks.reserve(group.size());
    for (int i : group) {
        int r = 0;
        for (int j : order) {
            if (j == i) break;
            ++r;
        }
        ranks.push_back(r);
    }
    return ranks;
}

bool contains(const std::vector<int>& sorted, int x) {
    return std::binary_search(sorted.begin(), sorted.end(), x);
}

bool subset_of(const std::vector<int>& a, const std::vector<int>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

bool check_property2(const std::vector<int>& p_bar, int gamma, const TrisectionResult& tri,
                     const Permutation& pi_star) {
    if (!subset_of(tri.L_bar, tri.L) || !subset_of(tri.U_bar, tri.U)) return false;
    std::vector<int> ranks = group_ranks(p_bar, pi_star);
    auto rank_of = [&](int expert) {
        for (std::size_t t = 0; t < p_bar.size(); ++t)
            if (p_bar[t] == expert) return ranks[t];
        return -1;
    };
    // pivot consistency: L strictly below rank gamma, U strictly above
    for (int i : tri.L)
        if (rank_of(i) + 1 >= gamma + 1) return false;
    for (int j : tri.U)
        if (rank_of(j) + 1 <= gamma) return false;
    // settled prefix: everything below a conservative L-member is in L,
    // everything above a conservative U-member is in U
    for (int i : tri.L_bar) {
        int ri = rank_of(i);
        for (std::size_t t = 0; t < p_bar.size(); ++t)
            if (ranks[t] < ri && !contains(tri.L, p_bar[t])) return false;
    }
    for (int i : tri.U_bar) {
        int ri = rank_of(i);
        for (std::size_t t = 0; t < p_bar.size(); ++t)
            if (ranks[t] > ri && !contains(tri.U, p_bar[t])) return false;
    }
    return true;
}

bool check_property1(const BlockSortRecord& rec, const Permutation& pi_star) {
    // partition of G
    std::vector<int> merged = rec.o;
    merged.insert(merged.end(), rec.p.begin(), rec.p.end());
    merged.insert(merged.end(), rec.i.begin(), rec.i.end());
    std::sort(merged.begin(), merged.end());
    if (merged != rec.g) return false;
    if (!subset_of(rec.o_bar, rec.o) || !subset_of(rec.i_bar, rec.i)) return false;
    if (!subset_of(rec.p, rec.p_bar)) return false;
    // O entirely below I
    for (int i : rec.o)
        for (int j : rec.i)
            if (pi_star[i] >= pi_star[j]) return false;
    // settled prefix
    std::vector<int> ranks = group_ranks(rec.g, pi_star);
    auto rank_of = [&](int expert) {
        for (std::size_t t = 0; t < rec.g.size(); ++t)
            if (rec.g[t] == expert) return ranks[t];
        return -1;
    };
    for (int i : rec.o_bar) {
        int ri = rank_of(i);
        for (std::size_t t = 0; t < rec.g.size(); ++t)
            if (ranks[t] < ri && !contains(rec.o, rec.g[t])) return false;
    }
    for (int i : rec.i_bar) {
        int ri = rank_of(i);
        for (std::size_t t = 0; t < rec.g.size(); ++t)
            if (ranks[t] > ri && !contains(rec.i, rec.g[t])) return false;
    }
    // size caps; with gamma = floor(|G|/2) the aggressive upper set can hold
    // up to ceil(|G|/2) experts when |G| is odd
    std::size_t cap = (rec.g.size() + 1) / 2;
    if (rec.o.size() > cap || rec.i.size() > cap) return false;
    return true;
}

bool check_energy_capture(const Matrix& m, const std::vector<int>& members, double zeta) {
    double zeta_eff = TrisectionParams::effective_zeta(zeta);
    DyadicGrids grids = build_grids(m.rows(), m.cols(), zeta_eff);
    const double lhs = group_variance(m, members);
    const double budget = static_cast<double>(grids.scales.size()) * grids.heights.size();
    for (int r : grids.scales) {
        for (double h : grids.heights) {
            std::vector<int> q_star = population_cusum_blocks(m, members, h / 2.0, 8 * r, r);
            double captured = 0.0;
            if (!q_star.empty()) {
                AggregatedMatrix theta = encode_matrix(m, members, q_star, r);
                std::vector<double> mean = column_mean(theta.Z);
                double eta = std::sqrt(static_cast<double>(r)) * h;
                long hits = 0;
                for (int i = 0; i < theta.Z.rows(); ++i)
                    for (int l = 0; l < theta.Z.cols(); ++l)
                        if (std::abs(theta.Z(i, l) - mean[l]) >= eta) ++hits;
                captured = eta * eta * hits;
            }
            if (lhs <= 16.0 * zeta * zeta + 96.0 * budget * captured + 1e-12) return true;
        }
    }
    return false;
}

bool check_block_count_bound(const Matrix& m, const std::vector<int>& members, double zeta,
                             double delta) {
    double zeta_eff = TrisectionParams::effective_zeta(zeta);
    DyadicGrids grids = build_grids(m.rows(), m.cols(), zeta_eff);
    TrisectionParams paper;
    paper.zeta = zeta_eff;
    paper.delta = delta;
    paper.practical_scaling = 1.0;
    for (int r : grids.scales) {
        for (double h : grids.heights) {
            int window = cusum_window_cp(static_cast<int>(members.size()), h, r, m.cols(), paper);
            std::vector<int> q_bar = population_cusum_blocks(m, members, h / 8.0, window, r);
            double bound = 64.0 * static_cast<double>(window) / (static_cast<double>(r) * h);
            if (static_cast<double>(q_bar.size()) > bound + 1e-9) return false;
        }
    }
    return true;
}

LossGeneralCheck check_loss_general(const ProblemInstance& inst, const TreeSortTrace& trace,
                                    const Permutation& pi_hat, int t_inf) {
    LossGeneralCheck out;
    out.property1_everywhere = true;
    for (const auto& rec : trace.block_sorts)
        if (!check_property1(rec, inst.pi_star)) out.property1_everywhere = false;
    double sum = 0.0;
    for (const auto& depth : trace.cons_leaves_by_depth)
        for (const auto& p_bar : depth) sum += group_variance(inst.M, p_bar);
    out.lhs = perm_loss(inst.M, pi_hat, inst.pi_star);
    out.rhs = 10.0 * t_inf * sum;
    out.holds = out.lhs <= out.rhs + 1e-9;
    return out;
}

const char* flag_name(Flag f) {
    switch (f) {
        case Flag::pass: return "pass";
        case Flag::fail: return "fail";
        case Flag::na: return "na";
    }
    return "na";
}

LemmaFlags verify_lemmas(const ProblemInstance& inst, const TreeSortTrace* trace,
                         const Permutation* pi_hat, int t_inf) {
    LemmaFlags flags;
    std::vector<int> all(inst.n);
    std::iota(all.begin(), all.end(), 0);
    flags.energy_capture = check_energy_capture(inst.M, all, inst.zeta) ? Flag::pass : Flag::fail;
    flags.block_count =
        check_block_count_bound(inst.M, all, inst.zeta, 0.05) ? Flag::pass : Flag::fail;
    if (trace && pi_hat) {
        LossGeneralCheck lg = check_loss_general(inst, *trace, *pi_hat, t_inf);
        flags.loss_general = !lg.property1_everywhere ? Flag::na : (lg.holds ? Flag::pass : Flag::fail);
    }
    return flags;
}

ProblemInstance make_instance(const InstanceSpec& spec, RngStream& rng) {
    if (spec.kind == "staircase") {
        StaircaseConfig cfg;
        cfg.n = spec.n;
        cfg.d = spec.d;
        cfg.n_tilde = spec.n_tilde;
        cfg.d_tilde = spec.d_tilde;
        cfg.q = spec.q;
        cfg.upsilon = spec.upsilon;
        cfg.zeta = spec.zeta;
        cfg.lambda = spec.lambda0_lambda;
        return gen_staircase_instance(cfg, rng);
    }
    if (spec.kind == "two_block_simple")
        return gen_two_block_instance(spec.n, spec.d, spec.r, spec.h, TwoBlockLayout::simple_cp);
    if (spec.kind == "two_block_spectral")
        return gen_two_block_instance(spec.n, spec.d, spec.r, spec.h, TwoBlockLayout::spectral_toy);
    if (spec.kind == "random") return gen_random_bi_isotonic(spec.n, spec.d, spec.zeta, rng);
    if (spec.kind == "separated")
        return gen_separated_instance(spec.n, spec.d, spec.zeta, spec.lo, spec.hi, rng);
    if (spec.kind == "spurious") {
        SpuriousBlockConfig cfg;
        cfg.n = spec.n;
        cfg.d = spec.d;
        cfg.types = spec.types;
        cfg.window = spec.window;
        cfg.gap = spec.gap;
        cfg.spurious_jumps = spec.spurious_jumps;
        cfg.spurious_height = spec.spurious_height;
        cfg.zeta = spec.zeta;
        return gen_spurious_block_instance(cfg, rng);
    }
    throw std::invalid_argument("make_instance: unknown kind '" + spec.kind + "'");
}

namespace {

InstanceSpec instance_spec_from_json(const nlohmann::json& j) {
    InstanceSpec s;
    s.kind = j.value("kind", s.kind);
    s.n = j.value("n", s.n);
    s.d = j.value("d", s.d);
    s.zeta = j.value("zeta", s.zeta);
    s.n_tilde = j.value("n_tilde", s.n_tilde);
    s.d_tilde = j.value("d_tilde", s.d_tilde);
    s.q = j.value("q", s.q);
    s.upsilon = j.value("upsilon", s.upsilon);
    s.lambda0_lambda = j.value("lambda", s.lambda0_lambda);
    s.r = j.value("r", s.r);
    s.h = j.value("h", s.h);
    s.lo = j.value("lo", s.lo);
    s.hi = j.value("hi", s.hi);
    s.types = j.value("types", s.types);
    s.window = j.value("window", s.window);
    s.spurious_jumps = j.value("spurious_jumps", s.spurious_jumps);
    s.gap = j.value("gap", s.gap);
    s.spurious_height = j.value("spurious_height", s.spurious_height);
    return s;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ExperimentConfig cfg;
    if (j.contains("instance")) cfg.instance = instance_spec_from_json(j["instance"]);
    if (j.contains("estimators")) cfg.estimators = j["estimators"].get<std::vector<std::string>>();
    if (j.contains("noise")) {
        std::string kind = j["noise"].value("kind", "gaussian");
        cfg.noise.kind = kind == "gaussian" ? NoiseKind::gaussian
                                            : (kind == "bernoulli" ? NoiseKind::bernoulli : NoiseKind::none);
        cfg.noise.sigma = j["noise"].value("sigma", 1.0);
    }
    cfg.poisson = j.value("poisson", cfg.poisson);
    if (j.contains("lambdas")) cfg.lambdas = j["lambdas"].get<std::vector<double>>();
    cfg.upsilon = j.value("upsilon", cfg.upsilon);
    if (j.contains("seeds")) {
        cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    } else if (j.contains("seed_base")) {
        std::uint64_t base = j["seed_base"].get<std::uint64_t>();
        int count = j.value("seed_count", 1);
        cfg.seeds.clear();
        for (int s = 0; s < count; ++s) cfg.seeds.push_back(base + s);
    }
    cfg.delta = j.value("delta", cfg.delta);
    cfg.paper_mode = j.value("paper_mode", cfg.paper_mode);
    cfg.practical_scaling = j.value("practical_scaling", cfg.practical_scaling);
    if (j.contains("budget_override")) {
        SampleBudget b;
        b.tau_inf = j["budget_override"].value("tau_inf", 3);
        b.t_inf = j["budget_override"].value("t_inf", 1);
        b.paper_mode = j["budget_override"].value("paper_mode", false);
        cfg.budget_override = b;
    }
    cfg.check_property1 = j.value("check_property1", cfg.check_property1);
    cfg.check_lossgen = j.value("check_lossgen", cfg.check_lossgen);
    cfg.reconstruct = j.value("reconstruct", cfg.reconstruct);
    cfg.deterministic_timing = j.value("deterministic_timing", cfg.deterministic_timing);
    for (double l : cfg.lambdas)
        if (l <= 0.0) throw std::invalid_argument("config: lambdas must be positive");
    if (cfg.seeds.empty()) throw std::invalid_argument("config: at least one seed");
    return cfg;
}

namespace {

std::string format_double(double v) {
    std::ostringstream ss;
    ss.precision(12);
    ss << v;
    return ss.str();
}

Variant variant_of(const std::string& name) {
    if (name == "ht") return Variant::HT;
    if (name == "wm") return Variant::WM;
    if (name == "wm_sr") return Variant::WM_SR;
    throw std::invalid_argument("unknown tree estimator '" + name + "'");
}

struct CellTask {
    std::string estimator;
    double lambda;
    std::uint64_t seed;
    std::size_t slot;
};

}  // namespace

std::string ExperimentReport::to_csv() const {
    std::ostringstream out;
    out << "estimator,lambda,seed,perm_loss,linf_loss,lerr_loss,matrix_loss,prop1_ok,sandwich_ok,"
           "lossgen_ok,runtime_ms\n";
    for (const auto& r : rows) {
        out << r.estimator << "," << format_double(r.lambda) << "," << r.seed << ","
            << format_double(r.perm_loss) << "," << format_double(r.linf_loss) << ","
            << format_double(r.lerr_loss) << ","
            << (r.matrix_loss ? format_double(*r.matrix_loss) : std::string("na")) << ","
            << flag_name(r.prop1) << "," << flag_name(r.sandwich) << "," << flag_name(r.lossgen)
            << "," << r.runtime_ms << "\n";
    }
    return out.str();
}

namespace {

ReportRow run_cell(const ExperimentConfig& cfg, const std::string& estimator, double lambda,
                   std::uint64_t seed) {
    ReportRow row;
    row.estimator = estimator;
    row.lambda = cfg.poisson ? lambda : 0.0;
    row.seed = seed;
    auto start = std::chrono::steady_clock::now();
    try {
        RngStream rng(seed);
        RngStream gen_rng = rng.substream(1);
        RngStream noise_rng = rng.substream(2);
        RngStream algo_rng = rng.substream(3);

        ProblemInstance inst = make_instance(cfg.instance, gen_rng);
        TrisectionParams params;
        params.zeta = cfg.noise.zeta();
        params.delta = cfg.delta;
        params.practical_scaling = cfg.paper_mode ? 1.0 : cfg.practical_scaling;

        SampleBudget budget = cfg.budget_override
                                  ? *cfg.budget_override
                                  : (cfg.paper_mode
                                         ? SampleBudget::paper(inst.n, inst.d, params.zeta, cfg.delta)
                                         : SampleBudget::practical(inst.n, inst.d));

        Permutation pi_hat;
        std::optional<TreeSortTrace> trace;
        int trace_t_inf = budget.t_inf;

        if (cfg.poisson) {
            ObservationLog log = sample_poisson_observations(inst, lambda, cfg.noise, noise_rng);
            if (estimator == "wmp") {
                ReductionPlan plan = plan_reduction(lambda, inst.n, inst.d, params.zeta, cfg.delta,
                                                    cfg.paper_mode, cfg.budget_override);
                trace_t_inf = plan.budget.t_inf;
                if (cfg.reconstruct) {
                    RngStream split_rng = algo_rng.substream(7);
                    auto [first, second] = split_log(log, split_rng);
                    ReductionPlan half_plan =
                        plan_reduction(first.lambda, inst.n, inst.d, params.zeta, cfg.delta,
                                       cfg.paper_mode, cfg.budget_override);
                    WmpTrace wt;
                    pi_hat = estimate_wmp(first, params, half_plan, algo_rng, &wt);
                    if (wt.tree_result) trace = wt.tree_result->trace;
                    Matrix m_hat = estimate_matrix(second, pi_hat, second.lambda);
                    row.matrix_loss = frobenius_sq_diff(m_hat, inst.M);
                } else {
                    WmpTrace wt;
                    pi_hat = estimate_wmp(log, params, plan, algo_rng, &wt);
                    if (wt.tree_result) trace = wt.tree_result->trace;
                }
            } else if (estimator == "borda") {
                pi_hat = borda_rank(log);
            } else if (estimator == "pc") {
                PairwiseParams pp;
                pp.tris = params;
                pp.budget_override = cfg.budget_override;
                pi_hat = pairwise_estimator(log, pp, algo_rng);
            } else {
                throw std::invalid_argument("estimator '" + estimator + "' needs full observations");
            }
        } else {
            long pool = cfg.upsilon > 0 ? cfg.upsilon : budget.upsilon_star();
            if (estimator == "borda") {
                Matrix y = sample_observation(inst, cfg.noise, noise_rng);
                pi_hat = borda_rank(y);
            } else {
                std::vector<Matrix> samples =
                    sample_full_observations(inst, static_cast<int>(pool), cfg.noise, noise_rng);
                TreeSortResult res = estimate(samples, variant_of(estimator), params, budget, algo_rng);
                pi_hat = res.pi_hat;
                trace = res.trace;
            }
        }

        row.perm_loss = perm_loss(inst.M, pi_hat, inst.pi_star);
        row.linf_loss = linf_loss(inst.M, pi_hat, inst.pi_star);
        row.lerr_loss = lerr_loss(inst.M, pi_hat, inst.pi_star);

        if (trace && cfg.check_property1) {
            bool all_ok = true;
            for (const auto& rec : trace->block_sorts)
                if (!check_property1(rec, inst.pi_star)) all_ok = false;
            row.prop1 = all_ok ? Flag::pass : Flag::fail;
        }
        if (trace && cfg.check_lossgen) {
            LossGeneralCheck lg = check_loss_general(inst, *trace, pi_hat, trace_t_inf);
            row.lossgen = !lg.property1_everywhere ? Flag::na : (lg.holds ? Flag::pass : Flag::fail);
        }
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    auto end = std::chrono::steady_clock::now();
    row.runtime_ms = cfg.deterministic_timing
                         ? 0
                         : std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
    return row;
}

int thread_cap() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("ISORANK_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1) hw = std::min(hw, cap);
    }
    return hw;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    std::vector<CellTask> tasks;
    std::vector<double> lambdas = cfg.poisson ? cfg.lambdas : std::vector<double>{0.0};
    for (const auto& est : cfg.estimators)
        for (double lambda : lambdas)
            for (std::uint64_t seed : cfg.seeds)
                tasks.push_back({est, lambda, seed, tasks.size()});

    ExperimentReport report;
    report.rows.resize(tasks.size());

    int threads = std::min<int>(thread_cap(), static_cast<int>(tasks.size()));
    if (threads <= 1) {
        for (const auto& t : tasks)
            report.rows[t.slot] = run_cell(cfg, t.estimator, t.lambda, t.seed);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            while (true) {
                std::size_t idx = next.fetch_add(1);
                if (idx >= tasks.size()) break;
                const auto& t = tasks[idx];
                report.rows[t.slot] = run_cell(cfg, t.estimator, t.lambda, t.seed);
            }
        };
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return report;
}

MeanCi mean_ci(const std::vector<double>& xs) {
    MeanCi ci;
    ci.count = static_cast<int>(xs.size());
    if (xs.empty()) return ci;
    double sum = std::accumulate(xs.begin(), xs.end(), 0.0);
    ci.mean = sum / xs.size();
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - ci.mean) * (x - ci.mean);
        double se = std::sqrt(ss / (xs.size() - 1) / xs.size());
        ci.half_width = 1.959963984540054 * se;
    }
    return ci;
}

}  // namespace isorank
