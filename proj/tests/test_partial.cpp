#include "doctest.h"
#include "isorank/partial.hpp"
#include "isorank/losses.hpp"

#include <map>
#include <numeric>

using namespace isorank;

TEST_CASE("poisson sampling moments") {
    RngStream rng(19);
    ProblemInstance inst = gen_random_bi_isotonic(2, 2, 1.0, rng);

    SUBCASE("tiny lambda: mean record count matches lambda n d") {
        const double lambda = 1e-3;
        const int trials = 20000;
        long total = 0;
        for (int t = 0; t < trials; ++t) {
            RngStream sub = rng.substream(t);
            total += static_cast<long>(
                sample_poisson_observations(inst, lambda, {NoiseKind::none, 0.0}, sub).records.size());
        }
        double mean = static_cast<double>(total) / trials;
        double expect = lambda * 4;
        double sigma = std::sqrt(expect / trials);
        CHECK(std::abs(mean - expect) <= 4 * sigma + 1e-9);
    }
    SUBCASE("noiseless values equal M at their positions") {
        ObservationLog log = sample_poisson_observations(inst, 3.0, {NoiseKind::none, 0.0}, rng);
        for (const auto& r : log.records) CHECK(r.y == inst.M(r.i, r.k));
    }
    SUBCASE("per-entry multiplicity has mean lambda") {
        const double lambda = 3.0;
        long count = 0;
        const int reps = 2000;
        for (int t = 0; t < reps; ++t) {
            RngStream sub = rng.substream(500000 + t);
            count += static_cast<long>(
                sample_poisson_observations(inst, lambda, {NoiseKind::none, 0.0}, sub).records.size());
        }
        double mean_per_entry = static_cast<double>(count) / (reps * 4.0);
        CHECK(mean_per_entry == doctest::Approx(lambda).epsilon(0.05));
    }
}

TEST_CASE("reduction plan regimes") {
    SampleBudget tiny;
    tiny.tau_inf = 1;
    tiny.t_inf = 1;  // Upsilon* = 6

    SUBCASE("regimes partition lambda") {
        // lambda_minus = lambda / 24 with the tiny budget, d = 8
        ReductionPlan a = plan_reduction(1.0, 4, 8, 1.0, 0.05, false, tiny);
        CHECK(a.regime == Regime::very_small);  // 1/24 <= 2/8
        ReductionPlan b = plan_reduction(12.0, 4, 8, 1.0, 0.05, false, tiny);
        CHECK(b.regime == Regime::small_sample);  // 0.5 in (0.25, 1]
        CHECK(b.l_lambda == 2);
        CHECK(b.reduced_d == 4);
        ReductionPlan c = plan_reduction(24.0 * 8, 4, 8, 1.0, 0.05, false, tiny);
        CHECK(c.regime == Regime::large_sample);  // lambda_minus = 8
    }
    SUBCASE("regime boundaries are exhaustive and exclusive") {
        for (double lambda : {0.01, 0.5, 3.0, 6.0, 6.001, 24.0, 24.001, 100.0}) {
            ReductionPlan p = plan_reduction(lambda, 4, 8, 1.0, 0.05, false, tiny);
            int which = (p.regime == Regime::very_small) + (p.regime == Regime::small_sample) +
                        (p.regime == Regime::large_sample);
            CHECK(which == 1);
            if (p.lambda_minus <= 2.0 / 8) CHECK(p.regime == Regime::very_small);
            else if (p.lambda_minus <= 1.0) CHECK(p.regime == Regime::small_sample);
            else CHECK(p.regime == Regime::large_sample);
        }
    }
}

TEST_CASE("reduction in the large regime") {
    RngStream rng(23);
    ProblemInstance inst = gen_random_bi_isotonic(3, 4, 1.0, rng);
    SampleBudget tiny;
    tiny.tau_inf = 1;
    tiny.t_inf = 1;

    SUBCASE("noiseless averaging returns M in every sample") {
        ReductionPlan plan = plan_reduction(96.0, 3, 4, 0.0, 0.05, false, tiny);
        REQUIRE(plan.regime == Regime::large_sample);
        ObservationLog log = sample_poisson_observations(inst, 96.0, {NoiseKind::none, 0.0}, rng);
        ReductionOutcome out = reduce_observations(log, plan);
        REQUIRE(out.ok);
        CHECK(out.samples.size() == 6);
        for (const auto& y : out.samples) CHECK(frobenius_sq_diff(y, inst.M) == doctest::Approx(0.0));
    }
    SUBCASE("gaussian averaging divides the variance by the batch size") {
        const double lambda = 96.0, zeta = 1.0;
        ReductionPlan plan = plan_reduction(lambda, 3, 4, zeta, 0.05, false, tiny);
        REQUIRE(plan.regime == Regime::large_sample);
        long batch = static_cast<long>(std::floor(plan.lambda_minus));
        double ss = 0.0;
        long count = 0;
        for (int t = 0; t < 300; ++t) {
            RngStream sub = rng.substream(t);
            ObservationLog log =
                sample_poisson_observations(inst, lambda, {NoiseKind::gaussian, zeta}, sub);
            ReductionOutcome out = reduce_observations(log, plan);
            if (!out.ok) continue;
            for (const auto& y : out.samples)
                for (int i = 0; i < 3; ++i)
                    for (int k = 0; k < 4; ++k) {
                        double e = y(i, k) - inst.M(i, k);
                        ss += e * e;
                        ++count;
                    }
        }
        REQUIRE(count > 0);
        CHECK(ss / count == doctest::Approx(zeta * zeta / batch).epsilon(0.1));
    }
}

TEST_CASE("reduction in the small regime") {
    SampleBudget tiny;
    tiny.tau_inf = 1;
    tiny.t_inf = 1;
    RngStream rng(29);
    ProblemInstance inst = gen_random_bi_isotonic(3, 8, 1.0, rng);

    // lambda_minus = 0.5, strictly above the very-small cutoff 2/8
    ReductionPlan plan = plan_reduction(12.0, 3, 8, 1.0, 0.05, false, tiny);
    REQUIRE(plan.regime == Regime::small_sample);
    CHECK(plan.l_lambda == 2);
    CHECK(plan.reduced_d == 4);

    SUBCASE("noiseless entries stay inside their column bin's range") {
        ObservationLog log = sample_poisson_observations(inst, 12.0, {NoiseKind::none, 0.0}, rng);
        ReductionOutcome out = reduce_observations(log, plan);
        REQUIRE(out.ok);
        for (const auto& y : out.samples)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 4; ++j) {
                    double lo = std::min(inst.M(i, 2 * j), inst.M(i, 2 * j + 1));
                    double hi = std::max(inst.M(i, 2 * j), inst.M(i, 2 * j + 1));
                    CHECK(y(i, j) >= lo - 1e-12);
                    CHECK(y(i, j) <= hi + 1e-12);
                }
    }
    SUBCASE("records are consumed at most once across samples") {
        // give every record a unique value, then count occurrences
        ObservationLog log = sample_poisson_observations(inst, 12.0, {NoiseKind::none, 0.0}, rng);
        for (std::size_t t = 0; t < log.records.size(); ++t)
            log.records[t].y = static_cast<double>(t);
        ReductionOutcome out = reduce_observations(log, plan);
        REQUIRE(out.ok);
        std::map<double, int> used;
        for (const auto& y : out.samples)
            for (double v : y.data()) ++used[v];
        for (const auto& [value, times] : used) CHECK(times == 1);
        CHECK(out.consumed == static_cast<long>(used.size()));
    }
    SUBCASE("missing observations surface as a modelled failure") {
        ObservationLog empty;
        empty.n = 3;
        empty.d = 8;
        empty.lambda = 12.0;
        ReductionOutcome out = reduce_observations(empty, plan);
        CHECK_FALSE(out.ok);
        CHECK(out.deficient_i == 0);
        CHECK(out.deficient_j == 0);
    }
}

TEST_CASE("wmp estimator across regimes") {
    SampleBudget tiny;
    tiny.tau_inf = 1;
    tiny.t_inf = 2;  // Upsilon* = 12
    TrisectionParams params;
    params.delta = 0.05;

    SUBCASE("very small lambda is a uniform guess") {
        RngStream rng(31);
        ProblemInstance inst = gen_random_bi_isotonic(3, 8, 1.0, rng);
        params.zeta = 1.0;
        ReductionPlan plan = plan_reduction(0.01, 3, 8, 1.0, 0.05, false, tiny);
        REQUIRE(plan.regime == Regime::very_small);
        std::map<Permutation, long> counts;
        const int trials = 12000;
        for (int t = 0; t < trials; ++t) {
            RngStream sub = rng.substream(t);
            ObservationLog log = sample_poisson_observations(inst, 0.01, {NoiseKind::none, 0.0}, sub);
            ++counts[estimate_wmp(log, params, plan, sub)];
        }
        REQUIRE(counts.size() == 6);
        double chi2 = 0.0;
        double expect = trials / 6.0;
        for (const auto& [pi, c] : counts) chi2 += (c - expect) * (c - expect) / expect;
        CHECK(chi2 < 25.0);  // 5 dof, far beyond the 99.9% quantile
    }
    SUBCASE("large lambda noiseless separated rows recover exactly") {
        RngStream rng(37);
        ProblemInstance inst = gen_separated_instance(4, 16, 0.0, 0.1, 0.9, rng);
        params.zeta = 0.0;
        params.practical_scaling = 1.0;
        SampleBudget budget;
        budget.tau_inf = 3;
        budget.t_inf = 2;  // Upsilon* = 36
        const double lambda = 300.0;  // lambda_minus = 300/144 > 1
        ReductionPlan plan = plan_reduction(lambda, 4, 16, 0.0, 0.05, false, budget);
        REQUIRE(plan.regime == Regime::large_sample);
        ObservationLog log = sample_poisson_observations(inst, lambda, {NoiseKind::none, 0.0}, rng);
        WmpTrace trace;
        Permutation pi = estimate_wmp(log, params, plan, rng, &trace);
        CHECK_FALSE(trace.reduction_failed);
        CHECK(perm_loss(inst.M, pi, inst.pi_star) == doctest::Approx(0.0));
    }
}

TEST_CASE("conformance delta formula") {
    CHECK(conformance_delta(1.0, 4, 8, 1.0) == doctest::Approx(1.0 / (32.0 * 32.0)));
    CHECK(conformance_delta(2.0, 4, 8, 0.5) == doctest::Approx(0.25 / (64.0 * 64.0)));
    CHECK(conformance_delta(0.5, 4, 8, 1.0) == doctest::Approx(1.0 / (32.0 * 32.0)));
}

TEST_CASE("observation log CSV round trip") {
    RngStream rng(41);
    ProblemInstance inst = gen_random_bi_isotonic(3, 5, 1.0, rng);
    ObservationLog log = sample_poisson_observations(inst, 2.0, {NoiseKind::gaussian, 1.0}, rng);
    std::string path = "/tmp/isorank_test_log.csv";
    save_log_csv(log, path);
    ObservationLog back = load_log_csv(path, 3, 5, 2.0);
    REQUIRE(back.records.size() == log.records.size());
    for (std::size_t t = 0; t < log.records.size(); ++t) {
        CHECK(back.records[t].i == log.records[t].i);
        CHECK(back.records[t].k == log.records[t].k);
        CHECK(back.records[t].y == doctest::Approx(log.records[t].y));
    }
}
