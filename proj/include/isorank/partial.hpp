#pragma once

#include <optional>
#include <string>
#include <vector>

#include "isorank/model.hpp"
#include "isorank/tree.hpp"

namespace isorank {

struct ObsRecord {
    int i = 0;  // expert, 0-based
    int k = 0;  // question, 0-based
    double y = 0.0;
};

// Poisson-sampled partial observations: Poi(lambda) independent draws per
// entry, record order shuffled.
struct ObservationLog {
    int n = 0, d = 0;
    double lambda = 0.0;
    std::vector<ObsRecord> records;
};

ObservationLog sample_poisson_observations(const ProblemInstance& inst, double lambda,
                                           const NoiseSpec& noise, RngStream& rng);

// CSV rows "i,k,y" (0-based indices).
void save_log_csv(const ObservationLog& log, const std::string& path);
ObservationLog load_log_csv(const std::string& path, int n, int d, double lambda);

// Independent Bernoulli(1/2) thinning into two sub-logs.
std::pair<ObservationLog, ObservationLog> split_log(const ObservationLog& log, RngStream& rng);

enum class Regime { very_small, small_sample, large_sample };

struct ReductionPlan {
    Regime regime = Regime::very_small;
    double lambda_minus = 0.0;  // lambda / (4 Upsilon*)
    int l_lambda = 0;           // column bin width (small regime)
    int reduced_d = 0;          // columns after reduction
    SampleBudget budget;        // carries Upsilon*
    double zeta_eff = 0.0;      // noise level for the downstream estimator
};

// Failure budget used by the theory's conformance runs:
// zeta_minus^2 [(lambda v 1) n d]^-2.
double conformance_delta(double lambda, int n, int d, double zeta);

// Regime selection for noise level zeta/sqrt(lambda v 1).  An explicit budget
// overrides the mode formulas (the practical default makes every desk-scale
// lambda "very small").
ReductionPlan plan_reduction(double lambda, int n, int d, double zeta, double delta,
                             bool paper_mode = false,
                             std::optional<SampleBudget> budget_override = std::nullopt);

// Outcome of the reduction: Upsilon* reduced matrices, or the first cell that
// lacked observations (a modelled event, not an error).
struct ReductionOutcome {
    bool ok = false;
    std::vector<Matrix> samples;
    int deficient_i = -1, deficient_j = -1;
    // audit: records consumed, each at most once
    long consumed = 0;
};

ReductionOutcome reduce_observations(const ObservationLog& log, const ReductionPlan& plan);

struct WmpTrace {
    Regime regime = Regime::very_small;
    bool reduction_failed = false;
    std::optional<TreeSortResult> tree_result;
};

// The assembled partial-observation estimator: uniform guess / WM-SR on
// binned columns / WM on averaged entries, per regime.
Permutation estimate_wmp(const ObservationLog& log, const TrisectionParams& params,
                         const ReductionPlan& plan, RngStream& rng, WmpTrace* trace = nullptr);

}  // namespace isorank
