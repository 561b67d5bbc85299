#pragma once

#include <optional>
#include <string>
#include <vector>

#include "isorank/matrix.hpp"
#include "isorank/rng.hpp"

namespace isorank {

// A ranking problem: n experts (rows) by d questions (columns).  M reordered
// by pi_star^{-1} is bi-isotonic with entries in [0,1]; pi_star is one oracle
// representative (not unique when rows tie).
struct ProblemInstance {
    int n = 0;
    int d = 0;
    Matrix M;
    Permutation pi_star;
    double zeta = 0.0;
};

enum class NoiseKind { gaussian, bernoulli, none };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::gaussian;
    double sigma = 1.0;  // gaussian scale; ignored otherwise

    // Sub-Gaussian scale implied by the noise model (Bernoulli pinned to 1).
    double zeta() const {
        switch (kind) {
            case NoiseKind::gaussian: return sigma;
            case NoiseKind::bernoulli: return 1.0;
            case NoiseKind::none: return 0.0;
        }
        return 0.0;
    }
};

// Entry of the infinite bi-isotonic extension of M, 1-based indices:
// 0 left/above of the matrix, 1 right/below, M_{i,k} inside.
double padded_entry(const Matrix& m, long i, long k);

// True iff M reordered by pi^{-1} is row- and column-nondecreasing with
// entries in [0,1].
bool validate_bi_isotonic(const Matrix& m, const Permutation& pi);

// Adversarial staircase prior: M = C (x) U + upsilon*zeta/sqrt(lambda0) * B,
// with per-group packing subsets and q bumped blocks per group.
struct StaircaseConfig {
    int n = 0, d = 0;
    int n_tilde = 0;        // group size, power of 2 dividing n
    int d_tilde = 0;        // block count, power of 2 dividing d
    int q = 1;              // bumped blocks per group, q <= d_tilde
    double upsilon = 0.0;   // signal amplitude
    double zeta = 1.0;
    double lambda = 1.0;    // sampling effort entering lambda0

    double lambda0() const { return n_tilde * lambda * static_cast<double>(d) / d_tilde; }
    double bump() const;    // upsilon*zeta/sqrt(lambda0)
    bool condition_v_holds() const;  // 2*bump <= n_tilde/(4n) ^ 1/(4 d_tilde)
};

ProblemInstance gen_staircase_instance(const StaircaseConfig& cfg, RngStream& rng);

enum class TwoBlockLayout { simple_cp, spectral_toy };

// Two-type toy instances: simple_cp differs by h on one width-r block;
// spectral_toy is block-constant with the rank-one +/- pattern.
ProblemInstance gen_two_block_instance(int n, int d, int r, double h, TwoBlockLayout layout);

// count independent full observations Y = M + E.
std::vector<Matrix> sample_full_observations(const ProblemInstance& inst, int count,
                                             const NoiseSpec& noise, RngStream& rng);
Matrix sample_observation(const ProblemInstance& inst, const NoiseSpec& noise, RngStream& rng);

// --- benchmark generators beyond the named priors ---

// Random bi-isotonic matrix (cumulative nonnegative increments, rescaled into
// [0,1]) under a random row permutation.
ProblemInstance gen_random_bi_isotonic(int n, int d, double zeta, RngStream& rng);

// Strictly separated step rows: expert of rank t jumps lo -> hi at its own
// column; adjacent ranks differ on >= floor((d-1)/n) columns.
ProblemInstance gen_separated_instance(int n, int d, double zeta, double lo, double hi,
                                       RngStream& rng);

// Spurious-block family: all experts share a staircase with conspicuous jumps
// while the informative gaps between consecutive expert types sit on their own
// narrow windows in the right tail.  The common jumps fire the mean-expert
// CUSUM at every group yet carry no width.  Boundary gaps grow by level_mult
// per split level, so only the deepest splits are statistically hard.
struct SpuriousBlockConfig {
    int n = 0, d = 0;
    int types = 8;           // distinct expert levels (power of two)
    int window = 4;          // columns of each boundary's informative strip
    double gap = 0.25;       // hardest (deepest-level) boundary amplitude
    double level_mult = 1.0; // amplitude multiplier per split level
    int spurious_jumps = 6;  // common staircase jumps in the left region
    double spurious_height = 0.4;
    double zeta = 1.0;
};
ProblemInstance gen_spurious_block_instance(const SpuriousBlockConfig& cfg, RngStream& rng);

// JSON document {n, d, zeta, pi_star, M row-major}; dense CSV for matrices.
std::string instance_to_json(const ProblemInstance& inst);
ProblemInstance instance_from_json(const std::string& text);
void save_instance(const ProblemInstance& inst, const std::string& path);
ProblemInstance load_instance(const std::string& path);
void save_matrix_csv(const Matrix& m, const std::string& path);

}  // namespace isorank
