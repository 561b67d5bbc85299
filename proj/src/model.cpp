#include "isorank/model.hpp"

#include <cmath>
#include <numeric>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace isorank {

double padded_entry(const Matrix& m, long i, long k) {
    if (i <= 0 || k <= 0) return 0.0;
    if (i >= m.rows() + 1 || k >= m.cols() + 1) return 1.0;
    return m(static_cast<int>(i) - 1, static_cast<int>(k) - 1);
}

bool validate_bi_isotonic(const Matrix& m, const Permutation& pi) {
    if (!is_permutation_of_n(pi, m.rows()))
        throw std::invalid_argument("validate_bi_isotonic: permutation does not match matrix");
    Permutation inv = inverse_permutation(pi);
    const int n = m.rows(), d = m.cols();
    for (int r = 0; r < n; ++r) {
        const double* row = m.row_ptr(inv[r]);
        for (int k = 0; k < d; ++k) {
            if (row[k] < 0.0 || row[k] > 1.0) return false;
            if (k + 1 < d && row[k] > row[k + 1]) return false;
            if (r + 1 < n && row[k] > m(inv[r + 1], k)) return false;
        }
    }
    return true;
}

double StaircaseConfig::bump() const { return upsilon * zeta / std::sqrt(lambda0()); }

bool StaircaseConfig::condition_v_holds() const {
    double cap = std::min(n_tilde / (4.0 * n), 1.0 / (4.0 * d_tilde));
    return 2.0 * bump() <= cap;
}

namespace {

bool is_pow2(int x) { return x > 0 && (x & (x - 1)) == 0; }

// Rejection-sampled packing: size-m/2 subsets of [m], pairwise symmetric
// difference >= m/4.  The existence proof is Varshamov-Gilbert; here we only
// need `count` of them.
std::vector<std::vector<char>> sample_packing(int m, int count, RngStream& rng) {
    std::vector<std::vector<char>> kept;
    const double min_sep = m / 4.0;
    long attempts_left = 10L * m + 10L * count;
    while (static_cast<int>(kept.size()) < count) {
        if (attempts_left-- <= 0) {
            throw std::runtime_error(
                "gen_staircase_instance: packing generation failed after bounded retries "
                "(requested " + std::to_string(count) + " subsets of [" + std::to_string(m) + "])");
        }
        std::vector<int> sub = rng.sample_without_replacement(m, m / 2);
        std::vector<char> mask(m, 0);
        for (int x : sub) mask[x] = 1;
        bool ok = true;
        for (const auto& other : kept) {
            int symdiff = 0;
            for (int x = 0; x < m; ++x) symdiff += (mask[x] != other[x]);
            if (static_cast<double>(symdiff) < min_sep) { ok = false; break; }
        }
        if (ok) kept.push_back(std::move(mask));
    }
    return kept;
}

}  // namespace

ProblemInstance gen_staircase_instance(const StaircaseConfig& cfg, RngStream& rng) {
    if (cfg.n <= 0 || cfg.d <= 0) throw std::invalid_argument("gen_staircase_instance: bad dims");
    if (!is_pow2(cfg.n_tilde) || !is_pow2(cfg.d_tilde))
        throw std::invalid_argument("gen_staircase_instance: n_tilde/d_tilde must be powers of 2");
    if (cfg.n % cfg.n_tilde != 0 || cfg.d % cfg.d_tilde != 0)
        throw std::invalid_argument("gen_staircase_instance: n_tilde | n and d_tilde | d required");
    if (cfg.q < 1 || cfg.q > cfg.d_tilde) throw std::invalid_argument("gen_staircase_instance: q out of range");
    if (cfg.upsilon > 0.0 && !cfg.condition_v_holds())
        throw std::invalid_argument("gen_staircase_instance: amplitude violates the bi-isotonic envelope");

    const int n = cfg.n, d = cfg.d;
    const int groups = n / cfg.n_tilde;
    const int block_w = d / cfg.d_tilde;
    const double bump = cfg.upsilon > 0.0 ? cfg.bump() : 0.0;

    std::vector<std::vector<char>> packing;
    if (bump > 0.0 && cfg.n_tilde >= 2) packing = sample_packing(cfg.n_tilde, groups, rng);

    Matrix m(n, d);
    std::vector<char> bumped(n, 0);
    for (int iota = 0; iota < groups; ++iota) {
        std::vector<int> q_blocks;
        if (bump > 0.0) q_blocks = rng.sample_without_replacement(cfg.d_tilde, cfg.q);
        std::vector<char> in_q(cfg.d_tilde, 0);
        for (int b : q_blocks) in_q[b] = 1;
        for (int r = 0; r < cfg.n_tilde; ++r) {
            int i = iota * cfg.n_tilde + r;
            bool hi = bump > 0.0 && !packing.empty() && packing[iota][r];
            bumped[i] = hi;
            for (int kappa = 0; kappa < cfg.d_tilde; ++kappa) {
                double base = (iota + 1) * cfg.n_tilde / (4.0 * n) + (kappa + 1) / (4.0 * cfg.d_tilde);
                double v = base + (hi && in_q[kappa] ? bump : 0.0);
                for (int j = 0; j < block_w; ++j) m(i, kappa * block_w + j) = v;
            }
        }
    }

    // Oracle ranks: groups in order; unbumped before bumped within a group.
    Permutation pi(n);
    int rank = 0;
    for (int iota = 0; iota < groups; ++iota) {
        for (int r = 0; r < cfg.n_tilde; ++r)
            if (!bumped[iota * cfg.n_tilde + r]) pi[iota * cfg.n_tilde + r] = rank++;
        for (int r = 0; r < cfg.n_tilde; ++r)
            if (bumped[iota * cfg.n_tilde + r]) pi[iota * cfg.n_tilde + r] = rank++;
    }
    return ProblemInstance{n, d, std::move(m), std::move(pi), cfg.zeta};
}

ProblemInstance gen_two_block_instance(int n, int d, int r, double h, TwoBlockLayout layout) {
    if (n < 2 || n % 2 != 0) throw std::invalid_argument("gen_two_block_instance: n must be even and >= 2");
    if (r < 1 || d % r != 0) throw std::invalid_argument("gen_two_block_instance: r must divide d");
    if (h < 0.0 || h > 1.0) throw std::invalid_argument("gen_two_block_instance: h outside (0,1]");

    const int blocks = d / r;
    Matrix m(n, d);

    if (layout == TwoBlockLayout::simple_cp) {
        if (h > 0.5) throw std::invalid_argument("gen_two_block_instance: simple_cp needs h <= 1/2");
        // Types coincide except on one block where they differ by h.
        const int split = blocks / 2;  // block index where the step sits
        const double lo = 0.5 - h, hi = 0.5;
        for (int i = 0; i < n; ++i) {
            bool upper = i >= n / 2;
            for (int k = 0; k < d; ++k) {
                int b = k / r;
                double v;
                if (b < split) v = lo;
                else if (b > split) v = hi;
                else v = upper ? hi : lo;
                m(i, k) = v;
            }
        }
    } else {
        // Block-constant ramp plus the +/- pattern of the rank-one toy; three
        // informative blocks so E[Z - Zbar] has exactly three nonzero columns.
        if (blocks < 4) throw std::invalid_argument("gen_two_block_instance: spectral_toy needs d/r >= 4");
        if (h * (blocks + 1) > 1.0)
            throw std::invalid_argument("gen_two_block_instance: h too large for the [0,1] staircase");
        std::vector<char> s(blocks, 0);
        s[blocks / 4] = 1;
        s[blocks / 4 + 1] = 1;
        s[(3 * blocks) / 4] = 1;
        for (int i = 0; i < n; ++i) {
            bool upper = i >= n / 2;
            for (int k = 0; k < d; ++k) {
                int b = k / r;
                m(i, k) = (b + 1) * h + (upper && s[b] ? h : 0.0);
            }
        }
    }

    Permutation pi(n);
    for (int i = 0; i < n; ++i) pi[i] = i;  // lower type first, already ordered
    return ProblemInstance{n, d, std::move(m), std::move(pi), 1.0};
}

Matrix sample_observation(const ProblemInstance& inst, const NoiseSpec& noise, RngStream& rng) {
    Matrix y(inst.n, inst.d);
    switch (noise.kind) {
        case NoiseKind::none:
            y = inst.M;
            break;
        case NoiseKind::gaussian:
            for (int i = 0; i < inst.n; ++i)
                for (int k = 0; k < inst.d; ++k) y(i, k) = inst.M(i, k) + noise.sigma * rng.normal();
            break;
        case NoiseKind::bernoulli:
            for (int i = 0; i < inst.n; ++i)
                for (int k = 0; k < inst.d; ++k) {
                    double p = inst.M(i, k);
                    if (p < 0.0 || p > 1.0)
                        throw std::invalid_argument("sample_observation: Bernoulli needs entries in [0,1]");
                    y(i, k) = rng.bernoulli(p) ? 1.0 : 0.0;
                }
            break;
    }
    return y;
}

std::vector<Matrix> sample_full_observations(const ProblemInstance& inst, int count,
                                             const NoiseSpec& noise, RngStream& rng) {
    if (count < 1) throw std::invalid_argument("sample_full_observations: count >= 1 required");
    std::vector<Matrix> out;
    out.reserve(count);
    for (int s = 0; s < count; ++s) out.push_back(sample_observation(inst, noise, rng));
    return out;
}

ProblemInstance gen_random_bi_isotonic(int n, int d, double zeta, RngStream& rng) {
    // Sorted matrix from cumulative increments, rescaled into [0, 1].
    Matrix sorted(n, d);
    std::vector<double> row_inc(n), col_inc(d);
    for (int i = 0; i < n; ++i) row_inc[i] = rng.uniform01();
    for (int k = 0; k < d; ++k) col_inc[k] = rng.uniform01();
    double base = rng.uniform01() * 0.2;
    double rc = 0.0;
    for (int i = 0; i < n; ++i) {
        rc += row_inc[i];
        double cc = 0.0;
        for (int k = 0; k < d; ++k) {
            cc += col_inc[k];
            sorted(i, k) = base + rc + cc;
        }
    }
    double mx = sorted(n - 1, d - 1);
    for (double& v : sorted.data()) v /= (mx + base + 1e-12);

    Permutation pi(n);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);  // order[r] = expert placed at rank r
    Matrix m(n, d);
    for (int r = 0; r < n; ++r) {
        pi[order[r]] = r;
        for (int k = 0; k < d; ++k) m(order[r], k) = sorted(r, k);
    }
    return ProblemInstance{n, d, std::move(m), std::move(pi), zeta};
}

ProblemInstance gen_separated_instance(int n, int d, double zeta, double lo, double hi,
                                       RngStream& rng) {
    if (n < 1 || d < 2) throw std::invalid_argument("gen_separated_instance: bad dims");
    if (!(lo < hi) || lo < 0.0 || hi > 1.0)
        throw std::invalid_argument("gen_separated_instance: need 0 <= lo < hi <= 1");
    // Rank-t expert steps lo -> hi at column c_t; higher rank steps earlier.
    Matrix sorted(n, d);
    for (int t = 0; t < n; ++t) {
        int c = 1 + static_cast<int>(std::llround(static_cast<double>(n - 1 - t) * (d - 2) / std::max(1, n)));
        for (int k = 0; k < d; ++k) sorted(t, k) = (k >= c) ? hi : lo;
    }
    Permutation pi(n);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    Matrix m(n, d);
    for (int r = 0; r < n; ++r) {
        pi[order[r]] = r;
        for (int k = 0; k < d; ++k) m(order[r], k) = sorted(r, k);
    }
    return ProblemInstance{n, d, std::move(m), std::move(pi), zeta};
}

ProblemInstance gen_spurious_block_instance(const SpuriousBlockConfig& cfg, RngStream& rng) {
    const int n = cfg.n, d = cfg.d, T = cfg.types;
    if (n < T || n % T != 0) throw std::invalid_argument("gen_spurious_block_instance: types must divide n");
    if (!is_pow2(T)) throw std::invalid_argument("gen_spurious_block_instance: types must be a power of two");
    if (cfg.window < 1 || cfg.gap <= 0.0) throw std::invalid_argument("gen_spurious_block_instance: bad signal");

    // boundary b (types b-1 | b, 1-based b) carries gap * level_mult^(trailing zeros of b)
    std::vector<double> boundary_gap(T - 1);
    std::vector<int> boundary_level(T - 1);
    double total_gap = 0.0;
    for (int b = 1; b < T; ++b) {
        int level = 0;
        for (int x = b; (x & 1) == 0; x >>= 1) ++level;
        boundary_level[b - 1] = level;
        boundary_gap[b - 1] = cfg.gap * std::pow(cfg.level_mult, level);
        total_gap += boundary_gap[b - 1];
    }

    const int span = (T - 1) * cfg.window;
    const int spur_end = d - span - 2;
    if (spur_end < cfg.spurious_jumps + 2)
        throw std::invalid_argument("gen_spurious_block_instance: windows overflow the question range");
    if (cfg.spurious_height + total_gap > 1.0)
        throw std::invalid_argument("gen_spurious_block_instance: amplitude exceeds 1");

    // Common staircase: spurious jumps spread over the left region.
    std::vector<double> common(d, 0.0);
    {
        double level = 0.0;
        int stride = std::max(1, spur_end / (cfg.spurious_jumps + 1));
        int jumps = 0;
        for (int k = 0; k < d; ++k) {
            if (k > 0 && k < spur_end && k % stride == 0 && jumps < cfg.spurious_jumps) {
                level += cfg.spurious_height / cfg.spurious_jumps;
                ++jumps;
            }
            common[k] = level;
        }
    }

    // A boundary's strip is a suffix indicator, so a left strip makes the pair
    // differ on everything to its right.  Hand the easy (high-level) splits
    // the left strips and keep the hard ones local in the right tail.
    std::vector<int> by_difficulty(T - 1);
    std::iota(by_difficulty.begin(), by_difficulty.end(), 0);
    std::sort(by_difficulty.begin(), by_difficulty.end(), [&](int a, int b) {
        if (boundary_level[a] != boundary_level[b]) return boundary_level[a] > boundary_level[b];
        return a < b;
    });
    std::vector<int> strip_start(T - 1);
    for (int pos = 0; pos < T - 1; ++pos)
        strip_start[by_difficulty[pos]] = spur_end + pos * cfg.window;

    Matrix sorted(n, d);
    int per = n / T;
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < per; ++j) {
            int row = t * per + j;
            for (int k = 0; k < d; ++k) {
                double v = common[k];
                for (int b = 0; b < t; ++b)
                    if (k >= strip_start[b]) v += boundary_gap[b];
                sorted(row, k) = v;
            }
        }

    Permutation pi(n);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    Matrix m(n, d);
    for (int r = 0; r < n; ++r) {
        pi[order[r]] = r;
        for (int k = 0; k < d; ++k) m(order[r], k) = sorted(r, k);
    }
    return ProblemInstance{n, d, std::move(m), std::move(pi), cfg.zeta};
}

std::string instance_to_json(const ProblemInstance& inst) {
    nlohmann::json j;
    j["n"] = inst.n;
    j["d"] = inst.d;
    j["zeta"] = inst.zeta;
    j["pi_star"] = inst.pi_star;
    j["M"] = inst.M.data();
    return j.dump(2);
}

ProblemInstance instance_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ProblemInstance inst;
    inst.n = j.at("n").get<int>();
    inst.d = j.at("d").get<int>();
    inst.zeta = j.at("zeta").get<double>();
    inst.pi_star = j.at("pi_star").get<std::vector<int>>();
    std::vector<double> flat = j.at("M").get<std::vector<double>>();
    if (static_cast<long>(flat.size()) != static_cast<long>(inst.n) * inst.d)
        throw std::invalid_argument("instance_from_json: M size mismatch");
    inst.M = Matrix(inst.n, inst.d);
    inst.M.data() = std::move(flat);
    if (!is_permutation_of_n(inst.pi_star, inst.n))
        throw std::invalid_argument("instance_from_json: pi_star is not a permutation");
    return inst;
}

void save_instance(const ProblemInstance& inst, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_instance: cannot open " + path);
    f << instance_to_json(inst) << "\n";
}

ProblemInstance load_instance(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_instance: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return instance_from_json(ss.str());
}

void save_matrix_csv(const Matrix& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_matrix_csv: cannot open " + path);
    f.precision(17);
    for (int i = 0; i < m.rows(); ++i) {
        for (int k = 0; k < m.cols(); ++k) {
            if (k) f << ",";
            f << m(i, k);
        }
        f << "\n";
    }
}

}  // namespace isorank
