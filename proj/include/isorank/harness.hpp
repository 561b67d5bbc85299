#pragma once

#include <optional>
#include <string>
#include <vector>

#include "isorank/estimation.hpp"
#include "isorank/losses.hpp"
#include "isorank/model.hpp"
#include "isorank/partial.hpp"
#include "isorank/tree.hpp"

namespace isorank {

// --- ground-truth property and lemma checks ---

// Sum of squared deviations of the group's rows from their mean row.
double group_variance(const Matrix& m, const std::vector<int>& members);

// Population CUSUM block set of the group's mean row at the given window and
// threshold, encoded at scale r.
std::vector<int> population_cusum_blocks(const Matrix& m, const std::vector<int>& members,
                                         double threshold, int window, int r);

// Trisection property: conservative containments, the settled-prefix
// condition, and rank consistency around the pivot.
bool check_property2(const std::vector<int>& p_bar, int gamma, const TrisectionResult& tri,
                     const Permutation& pi_star);

// BlockSort property: partition structure, settled-prefix condition, O below
// I, and the half-size caps.
bool check_property1(const BlockSortRecord& rec, const Permutation& pi_star);

// Energy capture: some (r, h) grid point satisfies
// ||M(P)-Mbar(P)||_F^2 <= 16 zeta^2 + 96|R||H| ||[Theta-Thetabar]_{sqrt(r) h}||_F^2.
bool check_energy_capture(const Matrix& m, const std::vector<int>& members, double zeta);

// Block-count bound |Qbar*_cp| <= 64 rtilde / (r h) at every grid point.
bool check_block_count_bound(const Matrix& m, const std::vector<int>& members, double zeta,
                             double delta);

// Conditional loss bound of the tree decomposition; requires the run trace.
struct LossGeneralCheck {
    bool property1_everywhere = false;
    bool holds = false;  // meaningful only when property1_everywhere
    double lhs = 0.0, rhs = 0.0;
};
LossGeneralCheck check_loss_general(const ProblemInstance& inst, const TreeSortTrace& trace,
                                    const Permutation& pi_hat, int t_inf);

enum class Flag { pass, fail, na };
const char* flag_name(Flag f);

struct LemmaFlags {
    Flag energy_capture = Flag::na;
    Flag block_count = Flag::na;
    Flag loss_general = Flag::na;
};

// Deterministic lemma suite on one instance (and optionally its run trace).
LemmaFlags verify_lemmas(const ProblemInstance& inst,
                         const TreeSortTrace* trace = nullptr,
                         const Permutation* pi_hat = nullptr, int t_inf = 0);

// --- experiment runner ---

struct InstanceSpec {
    std::string kind = "random";  // staircase | two_block_simple | two_block_spectral |
                                  // random | separated | spurious
    int n = 8, d = 32;
    double zeta = 1.0;
    // staircase
    int n_tilde = 2, d_tilde = 2, q = 1;
    double upsilon = 0.0, lambda0_lambda = 1.0;
    // two-block
    int r = 1;
    double h = 0.25;
    // separated
    double lo = 0.05, hi = 0.9;
    // spurious
    int types = 8, window = 4, spurious_jumps = 6;
    double gap = 0.25, spurious_height = 0.4;
};

ProblemInstance make_instance(const InstanceSpec& spec, RngStream& rng);

struct ExperimentConfig {
    InstanceSpec instance;
    std::vector<std::string> estimators{"wm"};  // ht | wm | wm_sr | borda | pc | wmp
    NoiseSpec noise{NoiseKind::gaussian, 1.0};
    bool poisson = false;                 // full observation pool otherwise
    std::vector<double> lambdas{1.0};     // poisson grid
    int upsilon = 0;                      // full-observation pool size; 0 = budget Upsilon*
    std::vector<std::uint64_t> seeds{1};
    double delta = 0.05;
    bool paper_mode = false;
    double practical_scaling = 1.0 / 64;
    std::optional<SampleBudget> budget_override;
    bool check_property1 = false;
    bool check_lossgen = false;
    bool reconstruct = false;             // wmp only: split the log and report matrix loss
    bool deterministic_timing = false;    // zero the runtime column (byte-identical reports)
};

ExperimentConfig config_from_json(const std::string& text);

struct ReportRow {
    std::string estimator;
    double lambda = 0.0;  // 0 for full-observation runs
    std::uint64_t seed = 0;
    double perm_loss = 0.0, linf_loss = 0.0, lerr_loss = 0.0;
    std::optional<double> matrix_loss;
    Flag prop1 = Flag::na, sandwich = Flag::na, lossgen = Flag::na;
    long runtime_ms = 0;
    std::string error;  // captured per-cell failure, run continues
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
    std::string to_csv() const;
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);

// --- small statistics helpers for the acceptance gates ---

struct MeanCi {
    double mean = 0.0;
    double half_width = 0.0;  // 95% normal approximation
    int count = 0;
};
MeanCi mean_ci(const std::vector<double>& xs);

}  // namespace isorank
