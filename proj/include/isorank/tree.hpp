#pragma once

#include <optional>
#include <string>
#include <vector>

#include "isorank/matrix.hpp"
#include "isorank/rng.hpp"
#include "isorank/trisection.hpp"

namespace isorank {

enum class NodeType { zero, p, one };

struct TreeNode {
    NodeType type = NodeType::zero;
    int depth = 0;
    int parent = -1;
    std::array<int, 3> children{-1, -1, -1};  // O, P, I
    std::vector<int> members;                 // sorted expert ids
    std::vector<int> cons_members;            // conservative counterpart (P_bar / O_bar / I_bar)

    bool is_leaf() const { return children[0] < 0; }
};

// Ternary-labelled hierarchical sorting tree; node 0 is the root [n].
struct SortingTree {
    std::vector<TreeNode> nodes;

    static SortingTree root_tree(int n);
    int add_children(int parent, std::vector<int> o, std::vector<int> p, std::vector<int> i,
                     std::vector<int> o_bar, std::vector<int> p_bar, std::vector<int> i_bar);

    // Leaf ids in the tree-induced (ternary O < P < I) order.
    std::vector<int> ordered_leaves() const;
    // Nonempty ZERO/ONE leaves in ternary order: the current sorting frontier.
    std::vector<int> active_leaves() const;
    // True iff the nonempty leaves partition [n].
    bool leaves_partition(int n) const;

    std::string to_json() const;
};

// Ordered line of same-frontier ZERO/ONE leaves around `leaf`; indices beyond
// the ends stand for synthetic constant experts (1 above, 0 below).
struct LeafLine {
    std::vector<int> leaf_ids;  // ascending rank order
    int self_index = -1;
};
LeafLine order_leaves(const SortingTree& tree, int leaf);

// Sample budget for TreeSort.  paper mode uses the theory constants; the
// practical default keeps desk-scale runs tractable.
struct SampleBudget {
    int tau_inf = 3;
    int t_inf = 1;
    bool paper_mode = false;

    long upsilon_star() const { return 6L * tau_inf * t_inf; }
    static SampleBudget practical(int n, int d);
    static SampleBudget paper(int n, int d, double zeta, double delta);
};

struct BudgetExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Hands out pool matrices by (depth, iteration, slot).  Paper mode forbids
// reuse; practical mode cycles the pool and counts reused draws.
class SampleScheduler {
public:
    SampleScheduler(const std::vector<Matrix>& pool, const SampleBudget& budget)
        : pool_(&pool), tau_inf_(budget.tau_inf), paper_mode_(budget.paper_mode) {}

    const Matrix& at(int depth, int tau, int slot);
    long reused_draws() const { return reused_; }

private:
    const std::vector<Matrix>* pool_;
    int tau_inf_;
    bool paper_mode_;
    long reused_ = 0;
};

// One BlockSort outcome, kept for post-hoc property checks.
struct BlockSortRecord {
    int depth = 0;
    std::vector<int> g;
    std::vector<int> o, p, i;
    std::vector<int> o_bar, p_bar, i_bar;
};

struct TreeSortTrace {
    std::vector<BlockSortRecord> block_sorts;
    // conservative p-leaves by depth (depth 1 .. t_inf): the P_bar sets of eq. loss_general
    std::vector<std::vector<std::vector<int>>> cons_leaves_by_depth;
    long reused_draws = 0;
    TrisectionDiag diag;
};

struct BlockSortResult {
    std::vector<int> o, p, i;
    std::vector<int> o_bar, p_bar, i_bar;
};

// Iterates DoubleTrisection on a leaf until tau_inf rounds (or, in practical
// mode, until an iteration adds nothing).
BlockSortResult block_sort(SampleScheduler& sched, int depth, const std::vector<int>& g,
                           const NeighborhoodContext& ctx, const DyadicGrids& grids,
                           const TrisectionParams& params, const SampleBudget& budget,
                           TrisectionDiag* diag = nullptr);

struct TreeSortResult {
    SortingTree tree;
    Permutation pi_hat;
    TreeSortTrace trace;
};

TreeSortResult tree_sort(const std::vector<Matrix>& samples, const TrisectionParams& params,
                         const SampleBudget& budget, RngStream& rng);

// Ranks from the final leaf order; within-leaf ranks drawn uniformly.
Permutation extract_permutation(const SortingTree& tree, RngStream& rng);

enum class Variant { HT, WM, WM_SR };

// Named estimators: variant selects the dimension-reduction/threshold mode.
TreeSortResult estimate(const std::vector<Matrix>& samples, Variant variant,
                        TrisectionParams params, const SampleBudget& budget, RngStream& rng);

}  // namespace isorank
