#include "isorank/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace isorank {

SortingTree SortingTree::root_tree(int n) {
    SortingTree t;
    TreeNode root;
    root.type = NodeType::zero;
    root.depth = 0;
    root.members.resize(n);
    std::iota(root.members.begin(), root.members.end(), 0);
    root.cons_members = root.members;
    t.nodes.push_back(std::move(root));
    return t;
}

int SortingTree::add_children(int parent, std::vector<int> o, std::vector<int> p, std::vector<int> i,
                              std::vector<int> o_bar, std::vector<int> p_bar, std::vector<int> i_bar) {
    if (!nodes[parent].is_leaf()) throw std::logic_error("add_children: parent already split");
    int depth = nodes[parent].depth + 1;
    auto push = [&](NodeType ty, std::vector<int> members, std::vector<int> cons) {
        TreeNode node;
        node.type = ty;
        node.depth = depth;
        node.parent = parent;
        node.members = std::move(members);
        node.cons_members = std::move(cons);
        nodes.push_back(std::move(node));
        return static_cast<int>(nodes.size()) - 1;
    };
    int io = push(NodeType::zero, std::move(o), std::move(o_bar));
    int ip = push(NodeType::p, std::move(p), std::move(p_bar));
    int ii = push(NodeType::one, std::move(i), std::move(i_bar));
    nodes[parent].children = {io, ip, ii};
    return io;
}

namespace {

void dfs_leaves(const SortingTree& t, int node, std::vector<int>& out) {
    const TreeNode& nd = t.nodes[node];
    if (nd.is_leaf()) {
        out.push_back(node);
        return;
    }
    dfs_leaves(t, nd.children[0], out);
    dfs_leaves(t, nd.children[1], out);
    dfs_leaves(t, nd.children[2], out);
}

}  // namespace

std::vector<int> SortingTree::ordered_leaves() const {
    std::vector<int> out;
    dfs_leaves(*this, 0, out);
    return out;
}

std::vector<int> SortingTree::active_leaves() const {
    std::vector<int> out;
    for (int leaf : ordered_leaves()) {
        const TreeNode& nd = nodes[leaf];
        if (nd.type != NodeType::p && !nd.members.empty()) out.push_back(leaf);
    }
    return out;
}

bool SortingTree::leaves_partition(int n) const {
    std::vector<char> seen(n, 0);
    long total = 0;
    for (int leaf : ordered_leaves()) {
        for (int i : nodes[leaf].members) {
            if (i < 0 || i >= n || seen[i]) return false;
            seen[i] = 1;
            ++total;
        }
    }
    return total == n;
}

std::string SortingTree::to_json() const {
    std::function<nlohmann::json(int)> walk = [&](int idx) {
        const TreeNode& nd = nodes[idx];
        nlohmann::json j;
        j["type"] = nd.type == NodeType::zero ? "0" : (nd.type == NodeType::p ? "p" : "1");
        j["depth"] = nd.depth;
        j["members"] = nd.members;
        j["conservative"] = nd.cons_members;
        if (!nd.is_leaf()) {
            j["children"] = nlohmann::json::array();
            for (int c : nd.children) j["children"].push_back(walk(c));
        }
        return j;
    };
    return walk(0).dump(2);
}

LeafLine order_leaves(const SortingTree& tree, int leaf) {
    LeafLine line;
    line.leaf_ids = tree.active_leaves();
    for (std::size_t j = 0; j < line.leaf_ids.size(); ++j)
        if (line.leaf_ids[j] == leaf) line.self_index = static_cast<int>(j);
    if (line.self_index < 0) throw std::invalid_argument("order_leaves: not an active leaf");
    return line;
}

SampleBudget SampleBudget::practical(int n, int d) {
    SampleBudget b;
    double nd = static_cast<double>(n) * d;
    b.tau_inf = std::max(3, static_cast<int>(std::ceil(std::log2(std::max(2.0, nd)))));
    b.t_inf = n > 1 ? static_cast<int>(std::ceil(std::log2(static_cast<double>(n)))) : 0;
    b.paper_mode = false;
    return b;
}

SampleBudget SampleBudget::paper(int n, int d, double zeta, double delta) {
    SampleBudget b;
    double zm = std::min(zeta > 0 ? zeta : TrisectionParams::effective_zeta(zeta), 1.0);
    double arg = static_cast<double>(n) * d / (delta * zm * zm);
    double tau = 4e7 * std::pow(std::log(std::max(arg, 2.0)), 7.0);
    b.tau_inf = tau > 2e9 ? 2000000000 : static_cast<int>(std::ceil(tau));
    b.t_inf = n > 1 ? static_cast<int>(std::ceil(std::log2(static_cast<double>(n)))) : 0;
    b.paper_mode = true;
    return b;
}

const Matrix& SampleScheduler::at(int depth, int tau, int slot) {
    long index = 6L * (static_cast<long>(tau_inf_) * depth + tau) + slot;
    long size = static_cast<long>(pool_->size());
    if (size == 0) throw BudgetExhausted("sample pool is empty");
    if (index >= size) {
        if (paper_mode_) throw BudgetExhausted("paper mode forbids sample reuse (index " +
                                               std::to_string(index) + " of " + std::to_string(size) + ")");
        ++reused_;
        index %= size;
    }
    return (*pool_)[index];
}

namespace {

std::vector<int> set_union_sorted(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

std::vector<int> set_diff_sorted(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

}  // namespace

BlockSortResult block_sort(SampleScheduler& sched, int depth, const std::vector<int>& g,
                           const NeighborhoodContext& ctx, const DyadicGrids& grids,
                           const TrisectionParams& params, const SampleBudget& budget,
                           TrisectionDiag* diag) {
    BlockSortResult res;
    if (g.size() <= 1) {
        res.p = g;
        res.p_bar = g;
        return res;
    }
    std::vector<int> o, i, o_bar, i_bar;
    for (int tau = 0; tau < budget.tau_inf; ++tau) {
        std::vector<int> settled = set_union_sorted(o_bar, i_bar);
        std::vector<int> remaining = set_diff_sorted(g, settled);
        if (remaining.empty()) break;

        int gamma = static_cast<int>(g.size()) / 2 - static_cast<int>(o_bar.size());
        gamma = std::clamp(gamma, 1, static_cast<int>(remaining.size()));

        std::array<const Matrix*, 6> samples{};
        for (int s = 0; s < 6; ++s) samples[s] = &sched.at(depth, tau, s);

        TrisectionResult tri = double_trisection(samples, ctx, remaining, gamma, grids, params, diag);

        std::size_t before = o.size() + i.size() + o_bar.size() + i_bar.size();
        o = set_union_sorted(o, tri.L);
        i = set_union_sorted(i, tri.U);
        o_bar = set_union_sorted(o_bar, tri.L_bar);
        i_bar = set_union_sorted(i_bar, tri.U_bar);
        std::size_t after = o.size() + i.size() + o_bar.size() + i_bar.size();
        if (!budget.paper_mode && after == before) break;  // no progress, stop early
    }

    std::vector<int> overlap;
    std::set_intersection(o.begin(), o.end(), i.begin(), i.end(), std::back_inserter(overlap));
    if (!overlap.empty()) {
        // Both differences taken against snapshots; overlapping experts fall
        // back into P.
        std::vector<int> o_snap = o, i_snap = i;
        o = set_diff_sorted(o_snap, i_snap);
        i = set_diff_sorted(i_snap, o_snap);
    }

    res.o = std::move(o);
    res.i = std::move(i);
    res.o_bar = std::move(o_bar);
    res.i_bar = std::move(i_bar);
    res.p = set_diff_sorted(g, set_union_sorted(res.o, res.i));
    res.p_bar = set_diff_sorted(g, set_union_sorted(res.o_bar, res.i_bar));
    return res;
}

TreeSortResult tree_sort(const std::vector<Matrix>& samples, const TrisectionParams& params_in,
                         const SampleBudget& budget, RngStream& rng) {
    if (samples.empty()) throw std::invalid_argument("tree_sort: need at least one sample");
    const int n = samples[0].rows();
    const int d = samples[0].cols();

    TrisectionParams params = params_in;
    params.zeta = TrisectionParams::effective_zeta(params_in.zeta);
    DyadicGrids grids = build_grids(n, d, params.zeta);

    TreeSortResult out;
    out.tree = SortingTree::root_tree(n);
    out.trace.cons_leaves_by_depth.assign(budget.t_inf + 1, {});
    SampleScheduler sched(samples, budget);

    for (int t = 0; t < budget.t_inf; ++t) {
        std::vector<int> frontier = out.tree.active_leaves();
        bool any_work = false;
        for (int leaf : frontier)
            if (out.tree.nodes[leaf].members.size() >= 2) any_work = true;
        if (!any_work) break;

        // All BlockSorts at this depth see the same (pre-split) frontier.
        std::vector<std::vector<int>> frontier_members;
        for (int leaf : frontier) frontier_members.push_back(out.tree.nodes[leaf].members);

        for (std::size_t j = 0; j < frontier.size(); ++j) {
            int leaf = frontier[j];
            const std::vector<int>& g = frontier_members[j];

            NeighborhoodContext ctx;
            for (std::size_t a = j + 1; a < frontier.size(); ++a) ctx.above.push_back(frontier_members[a]);
            for (std::size_t a = j; a-- > 0;) ctx.below.push_back(frontier_members[a]);

            BlockSortResult bs = block_sort(sched, t, g, ctx, grids, params, budget, &out.trace.diag);

            BlockSortRecord rec;
            rec.depth = t;
            rec.g = g;
            rec.o = bs.o;
            rec.p = bs.p;
            rec.i = bs.i;
            rec.o_bar = bs.o_bar;
            rec.p_bar = bs.p_bar;
            rec.i_bar = bs.i_bar;
            out.trace.block_sorts.push_back(std::move(rec));

            if (t + 1 <= budget.t_inf) out.trace.cons_leaves_by_depth[t + 1].push_back(bs.p_bar);
            out.tree.add_children(leaf, bs.o, bs.p, bs.i, bs.o_bar, bs.p_bar, bs.i_bar);
        }
    }

    out.trace.reused_draws = sched.reused_draws();
    out.pi_hat = extract_permutation(out.tree, rng);
    return out;
}

Permutation extract_permutation(const SortingTree& tree, RngStream& rng) {
    int n = static_cast<int>(tree.nodes[0].members.size());
    if (!tree.leaves_partition(n))
        throw std::logic_error("extract_permutation: leaves do not partition the experts");

    Permutation pi(n, -1);
    int lo = 0;
    for (int leaf : tree.ordered_leaves()) {
        const std::vector<int>& members = tree.nodes[leaf].members;
        if (members.empty()) continue;
        int size = static_cast<int>(members.size());
        if (size == 1) {
            pi[members[0]] = lo;
        } else {
            std::vector<int> ranks(size);
            std::iota(ranks.begin(), ranks.end(), lo);
            rng.shuffle(ranks);
            for (int j = 0; j < size; ++j) pi[members[j]] = ranks[j];
        }
        lo += size;
    }
    return pi;
}

TreeSortResult estimate(const std::vector<Matrix>& samples, Variant variant,
                        TrisectionParams params, const SampleBudget& budget, RngStream& rng) {
    switch (variant) {
        case Variant::HT: params.mode = TrisMode::HT; break;
        case Variant::WM: params.mode = TrisMode::WM; break;
        case Variant::WM_SR: params.mode = TrisMode::WM_SR; break;
    }
    return tree_sort(samples, params, budget, rng);
}

}  // namespace isorank
