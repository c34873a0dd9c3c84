#pragma once

// Seeded random RST trees plus the independent oracles the property suites
// check the library against. The oracles deliberately re-derive everything
// from first principles (top-down scans) instead of reusing library code.

#include <random>
#include <set>
#include <string>
#include <vector>

#include "rhetor/discourse.hpp"

namespace rhetor::testsupport {

inline const std::vector<std::string>& relation_pool() {
    static const std::vector<std::string> pool = {
        "elaboration", "explanation", "evidence", "background", "purpose",
        "justify",     "contrast",    "sequence", "joint",      "circumstance"};
    return pool;
}

inline RstNode random_node(std::mt19937& gen, int lo, int hi) {
    RstNode node;
    node.lo = lo;
    node.hi = hi;
    if (lo == hi) return node;

    const int size = hi - lo + 1;
    const int max_children = std::min(4, size);
    const int child_count = 2 + static_cast<int>(gen() % static_cast<unsigned>(max_children - 1));

    // Random contiguous partition of [lo, hi] into child_count parts.
    std::set<int> cuts;
    while (static_cast<int>(cuts.size()) < child_count - 1)
        cuts.insert(lo + static_cast<int>(gen() % static_cast<unsigned>(size - 1)));
    std::vector<int> bounds(cuts.begin(), cuts.end());
    bounds.push_back(hi);

    int start = lo;
    for (int bound : bounds) {
        RstNode child = random_node(gen, start, bound);
        child.nuclearity = Nuclearity::satellite;
        child.relation = relation_pool()[gen() % relation_pool().size()];
        node.children.push_back(std::move(child));
        start = bound + 1;
    }
    // At least one nucleus; occasionally several (multinuclear).
    node.children[gen() % node.children.size()].nuclearity = Nuclearity::nucleus;
    if (node.children.size() > 2 && gen() % 3 == 0)
        node.children[gen() % node.children.size()].nuclearity = Nuclearity::nucleus;
    return node;
}

inline RstTree random_tree(std::mt19937& gen, int max_edus = 50) {
    const int n = 1 + static_cast<int>(gen() % static_cast<unsigned>(max_edus));
    RstTree tree;
    tree.doc_id = "random-" + std::to_string(gen());
    for (int i = 1; i <= n; ++i)
        tree.edus.push_back({i, "unit " + std::to_string(i) + " text."});
    tree.root = random_node(gen, 1, n);
    return tree;
}

// Top-down ancestor chain: every node whose span contains the EDU, root
// first. Independent of path_to_root's leaf-up construction.
inline std::vector<const RstNode*> oracle_ancestry(const RstTree& tree, int edu_id) {
    std::vector<const RstNode*> chain;
    const RstNode* current = &tree.root;
    while (true) {
        chain.push_back(current);
        if (current->is_leaf()) break;
        const RstNode* next = nullptr;
        for (const auto& child : current->children)
            if (child.lo <= edu_id && edu_id <= child.hi) next = &child;
        if (next == nullptr) break;
        current = next;
    }
    return chain;
}

inline int oracle_depth(const RstTree& tree, int edu_id) {
    return static_cast<int>(oracle_ancestry(tree, edu_id).size()) - 1;
}

// Brute-force LCA: deepest common node of every target's ancestor chain.
inline const RstNode* oracle_lca(const RstTree& tree, const std::set<int>& edu_ids) {
    std::vector<std::vector<const RstNode*>> chains;
    for (int id : edu_ids) chains.push_back(oracle_ancestry(tree, id));
    const RstNode* lca = nullptr;
    for (std::size_t depth = 0;; ++depth) {
        const RstNode* candidate = nullptr;
        for (const auto& chain : chains) {
            if (depth >= chain.size()) return lca;
            if (candidate == nullptr) candidate = chain[depth];
            if (chain[depth] != candidate) return lca;
        }
        lca = candidate;
    }
}

inline int count_internal_nodes(const RstNode& node) {
    if (node.is_leaf()) return 0;
    int count = 1;
    for (const auto& c : node.children) count += count_internal_nodes(c);
    return count;
}

}  // namespace rhetor::testsupport
