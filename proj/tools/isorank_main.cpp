#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "isorank/estimation.hpp"
#include "isorank/harness.hpp"

using namespace isorank;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int cmd_gen(const std::string& kind, int n, int d, double zeta, double h, int r,
            std::uint64_t seed, const std::string& out, const std::string& csv) {
    InstanceSpec spec;
    spec.kind = kind;
    spec.n = n;
    spec.d = d;
    spec.zeta = zeta;
    spec.h = h;
    spec.r = r;
    RngStream rng(seed);
    ProblemInstance inst = make_instance(spec, rng);
    save_instance(inst, out);
    if (!csv.empty()) save_matrix_csv(inst.M, csv);
    std::cout << "wrote " << out << " (n=" << inst.n << ", d=" << inst.d << ")\n";
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& out, std::uint64_t seed_base,
            int seed_count, bool base_given) {
    ExperimentConfig cfg = config_from_json(read_file(config_path));
    if (seed_count > 0 || base_given) {
        int count = seed_count > 0 ? seed_count : static_cast<int>(cfg.seeds.size());
        cfg.seeds.clear();
        for (int s = 0; s < count; ++s) cfg.seeds.push_back(seed_base + s);
    }
    ExperimentReport report = run_experiment(cfg);
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot open " + out);
    f << report.to_csv();
    int errors = 0;
    for (const auto& row : report.rows)
        if (!row.error.empty()) {
            ++errors;
            std::cerr << "cell error (" << row.estimator << ", seed " << row.seed << "): " << row.error
                      << "\n";
        }
    std::cout << "wrote " << out << " (" << report.rows.size() << " rows, " << errors
              << " failed cells)\n";

    // per (estimator, lambda) mean perm_loss with a 95% CI, plus pairwise
    // loss ratios between estimators on the same lambda
    std::map<std::pair<std::string, double>, std::vector<double>> cells;
    for (const auto& row : report.rows)
        if (row.error.empty()) cells[{row.estimator, row.lambda}].push_back(row.perm_loss);
    std::map<double, std::vector<std::pair<std::string, double>>> by_lambda;
    for (const auto& [key, losses] : cells) {
        MeanCi ci = mean_ci(losses);
        std::cout << key.first << " lambda=" << key.second << ": mean perm_loss " << ci.mean
                  << " +- " << ci.half_width << " (" << ci.count << " seeds)\n";
        by_lambda[key.second].push_back({key.first, ci.mean});
    }
    for (const auto& [lambda, entries] : by_lambda)
        for (std::size_t a = 0; a < entries.size(); ++a)
            for (std::size_t b = 0; b < entries.size(); ++b)
                if (a != b && entries[b].second > 0)
                    std::cout << "ratio " << entries[a].first << "/" << entries[b].first
                              << " at lambda=" << lambda << ": "
                              << entries[a].second / entries[b].second << "\n";
    return 0;
}

int cmd_verify(int instances, int n, int d, std::uint64_t seed) {
    RngStream rng(seed);
    int energy_pass = 0, block_pass = 0;
    for (int t = 0; t < instances; ++t) {
        RngStream sub = rng.substream(t);
        ProblemInstance inst = gen_random_bi_isotonic(n, d, 1.0, sub);
        LemmaFlags flags = verify_lemmas(inst);
        energy_pass += flags.energy_capture == Flag::pass;
        block_pass += flags.block_count == Flag::pass;
    }
    std::cout << "energy-capture: " << energy_pass << "/" << instances << "\n";
    std::cout << "block-count bound: " << block_pass << "/" << instances << "\n";
    return (energy_pass == instances && block_pass == instances) ? 0 : 1;
}

int cmd_rank(const std::string& obs, int n, int d, double lambda, const std::string& estimator,
             double zeta, double delta, std::uint64_t seed, const std::string& mhat_out) {
    ObservationLog log = load_log_csv(obs, n, d, lambda);
    RngStream rng(seed);
    Permutation pi;
    if (estimator == "wmp") {
        TrisectionParams params;
        params.zeta = zeta;
        params.delta = delta;
        if (mhat_out.empty()) {
            ReductionPlan plan = plan_reduction(lambda, n, d, zeta, delta);
            pi = estimate_wmp(log, params, plan, rng);
        } else {
            // reconstruction: thin the log, rank on one half, project the other
            auto [first, second] = split_log(log, rng);
            ReductionPlan plan = plan_reduction(first.lambda, n, d, zeta, delta);
            pi = estimate_wmp(first, params, plan, rng);
            ProjectionResult stats;
            Matrix m_hat = estimate_matrix(second, pi, second.lambda, {}, &stats);
            save_matrix_csv(m_hat, mhat_out);
            std::cerr << "wrote " << mhat_out << " (projection "
                      << (stats.converged ? "converged" : "hit the iteration cap") << " after "
                      << stats.iterations << " cycles)\n";
        }
    } else if (estimator == "borda") {
        pi = borda_rank(log);
    } else if (estimator == "pc") {
        PairwiseParams pp;
        pp.tris.zeta = zeta;
        pp.tris.delta = delta;
        pi = pairwise_estimator(log, pp, rng);
    } else {
        throw std::runtime_error("unknown estimator '" + estimator + "' (wmp|borda|pc)");
    }
    // experts listed from lowest to highest rank
    Permutation inv = inverse_permutation(pi);
    for (int r = 0; r < n; ++r) std::cout << inv[r] << (r + 1 < n ? " " : "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"isorank: permutation recovery for noisy bi-isotonic matrices"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "generate a benchmark instance");
    std::string kind = "random", out = "instance.json", csv;
    int n = 8, d = 32, r = 4;
    double zeta = 1.0, h = 0.25;
    std::uint64_t seed = 1;
    gen->add_option("--kind", kind,
                    "staircase|two_block_simple|two_block_spectral|random|separated|spurious");
    gen->add_option("--n", n);
    gen->add_option("--d", d);
    gen->add_option("--zeta", zeta);
    gen->add_option("--height", h, "two-block signal amplitude");
    gen->add_option("--r", r);
    gen->add_option("--seed", seed);
    gen->add_option("--out", out);
    gen->add_option("--csv", csv, "also dump M as dense CSV");

    auto* run = app.add_subcommand("run", "run a Monte-Carlo experiment from a JSON config");
    std::string config_path, report_path = "report.csv";
    std::uint64_t seed_base = 42;
    int seed_count = 0;
    run->add_option("--config", config_path)->required();
    run->add_option("--out", report_path);
    run->add_option("--seed-base", seed_base);
    run->add_option("--seed-count", seed_count, "override the config's seed list");

    auto* verify = app.add_subcommand("verify", "run the deterministic lemma suites");
    int instances = 100, vn = 8, vd = 32;
    std::uint64_t vseed = 7;
    verify->add_option("--instances", instances);
    verify->add_option("--n", vn);
    verify->add_option("--d", vd);
    verify->add_option("--seed", vseed);

    auto* rank = app.add_subcommand("rank", "rank experts from an external observation log");
    std::string obs, estimator = "wmp", mhat_out;
    int rn = 0, rd = 0;
    double lambda = 1.0, rzeta = 1.0, rdelta = 0.05;
    std::uint64_t rseed = 1;
    rank->add_option("--obs", obs)->required();
    rank->add_option("--n", rn)->required();
    rank->add_option("--d", rd)->required();
    rank->add_option("--lambda", lambda)->required();
    rank->add_option("--estimator", estimator, "wmp|borda|pc");
    rank->add_option("--zeta", rzeta);
    rank->add_option("--delta", rdelta);
    rank->add_option("--seed", rseed);
    rank->add_option("--mhat-out", mhat_out, "also reconstruct M and write it as CSV (wmp)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(kind, n, d, zeta, h, r, seed, out, csv);
        if (run->parsed())
            return cmd_run(config_path, report_path, seed_base, seed_count,
                           run->count("--seed-base") > 0);
        if (verify->parsed()) return cmd_verify(instances, vn, vd, vseed);
        if (rank->parsed()) return cmd_rank(obs, rn, rd, lambda, estimator, rzeta, rdelta, rseed, mhat_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
