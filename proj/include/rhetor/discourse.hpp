#pragma once

#include <array>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rhetor/detail/strings.hpp"
#include "rhetor/gateway.hpp"
#include "rhetor/jsonl.hpp"
#include "rhetor/prompts.hpp"

namespace rhetor {

struct Edu {
    int id = 0;  // 1-based, contiguous in document order
    std::string text;

    bool operator==(const Edu&) const = default;
};

enum class Nuclearity { nucleus, satellite };

inline std::string to_string(Nuclearity n) {
    return n == Nuclearity::nucleus ? "nucleus" : "satellite";
}

inline Nuclearity nuclearity_from_string(const std::string& s) {
    if (s == "nucleus") return Nuclearity::nucleus;
    if (s == "satellite") return Nuclearity::satellite;
    throw std::invalid_argument("unknown nuclearity: " + s);
}

struct RstNode {
    int lo = 0;  // inclusive EDU span
    int hi = 0;
    std::optional<Nuclearity> nuclearity;  // root is exempt
    std::string relation;                  // relation to the parent; open vocabulary
    std::vector<RstNode> children;

    bool is_leaf() const { return children.empty(); }

    bool operator==(const RstNode&) const = default;
};

struct RstTree {
    std::string doc_id;
    RstNode root;
    std::vector<Edu> edus;

    const Edu& edu(int id) const {
        if (id < 1 || id > static_cast<int>(edus.size()))
            throw std::out_of_range("EDU id out of range: " + std::to_string(id));
        return edus[static_cast<std::size_t>(id - 1)];
    }

    bool operator==(const RstTree&) const = default;
};

struct PathStep {
    std::array<int, 2> child_span{};
    std::string relation;
    std::optional<Nuclearity> nuclearity;
    std::array<int, 2> parent_span{};

    bool operator==(const PathStep&) const = default;
};

// Root-to-leaf ancestry flattened bottom-up: steps run from the target EDU's
// leaf toward the root.
struct LinearizedPath {
    int target_edu = 0;
    std::vector<PathStep> steps;
};

struct RstSubtree {
    RstNode root;
    std::set<int> covered_edus;
};

enum class StructureErrorKind { gap, overlap, no_nucleus, bad_span };

inline std::string to_string(StructureErrorKind k) {
    switch (k) {
        case StructureErrorKind::gap: return "gap";
        case StructureErrorKind::overlap: return "overlap";
        case StructureErrorKind::no_nucleus: return "no_nucleus";
        case StructureErrorKind::bad_span: return "bad_span";
    }
    return "bad_span";
}

class StructureError : public std::runtime_error {
public:
    StructureError(StructureErrorKind kind, std::string node_path, const std::string& what)
        : std::runtime_error("invalid tree structure at " + node_path + " [" + to_string(kind) +
                             "]: " + what),
          kind_(kind),
          node_path_(std::move(node_path)) {}

    StructureErrorKind kind() const { return kind_; }
    const std::string& node_path() const { return node_path_; }

private:
    StructureErrorKind kind_;
    std::string node_path_;
};

class UnknownEdu : public std::runtime_error {
public:
    explicit UnknownEdu(int id)
        : std::runtime_error("unknown EDU id: " + std::to_string(id)) {}
};

// Mann & Thompson's classic 23 relations plus tags common in parser output;
// anything else is accepted with a warning.
inline const std::set<std::string>& known_relations() {
    static const std::set<std::string> relations = {
        // classic 23
        "circumstance", "solutionhood", "elaboration", "background", "enablement",
        "motivation", "evidence", "justify", "volitional-cause", "non-volitional-cause",
        "volitional-result", "non-volitional-result", "purpose", "antithesis", "concession",
        "condition", "otherwise", "interpretation", "evaluation", "restatement", "summary",
        "sequence", "contrast",
        // common parser tagset extensions
        "explanation", "joint", "same-unit", "attribution", "span", "list", "cause",
        "result", "comparison", "temporal", "manner-means", "topic-comment"};
    return relations;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace detail {

inline void validate_node(const RstNode& node, const std::string& path,
                          std::vector<std::string>* warnings) {
    if (node.lo > node.hi || node.lo < 1)
        throw StructureError(StructureErrorKind::bad_span, path,
                             "span [" + std::to_string(node.lo) + "," + std::to_string(node.hi) +
                                 "] is not a valid range");
    if (node.is_leaf()) {
        if (node.lo != node.hi)
            throw StructureError(StructureErrorKind::bad_span, path,
                                 "leaf spans more than one EDU");
        return;
    }
    if (node.lo == node.hi)
        throw StructureError(StructureErrorKind::bad_span, path,
                             "single-EDU node must be a leaf");

    int expected_lo = node.lo;
    bool has_nucleus = false;
    for (std::size_t i = 0; i < node.children.size(); ++i) {
        const RstNode& child = node.children[i];
        const std::string child_path = path + ".children[" + std::to_string(i) + "]";
        if (!child.nuclearity)
            throw StructureError(StructureErrorKind::no_nucleus, child_path,
                                 "non-root node lacks nuclearity");
        has_nucleus = has_nucleus || *child.nuclearity == Nuclearity::nucleus;
        if (child.lo > expected_lo)
            throw StructureError(StructureErrorKind::gap, child_path,
                                 "child span starts at " + std::to_string(child.lo) +
                                     ", expected " + std::to_string(expected_lo));
        if (child.lo < expected_lo)
            throw StructureError(StructureErrorKind::overlap, child_path,
                                 "child span starts at " + std::to_string(child.lo) +
                                     ", overlapping the previous child");
        if (child.hi > node.hi)
            throw StructureError(StructureErrorKind::bad_span, child_path,
                                 "child span exceeds the parent span");
        if (warnings && !child.relation.empty() && !known_relations().count(child.relation))
            warnings->push_back("unknown relation \"" + child.relation + "\" at " + child_path);
        validate_node(child, child_path, warnings);
        expected_lo = child.hi + 1;
    }
    if (expected_lo != node.hi + 1)
        throw StructureError(StructureErrorKind::gap, path,
                             "children cover up to " + std::to_string(expected_lo - 1) +
                                 " but the span ends at " + std::to_string(node.hi));
    if (!has_nucleus)
        throw StructureError(StructureErrorKind::no_nucleus, path,
                             "internal node has no nucleus child");
}

}  // namespace detail

// Structural problems throw; unknown relations only warn.
inline std::vector<std::string> validate_tree(const RstTree& tree) {
    std::vector<std::string> warnings;
    const int n = static_cast<int>(tree.edus.size());
    if (n == 0)
        throw StructureError(StructureErrorKind::bad_span, "root", "tree has no EDUs");
    for (int i = 0; i < n; ++i) {
        if (tree.edus[static_cast<std::size_t>(i)].id != i + 1)
            throw StructureError(StructureErrorKind::bad_span, "root",
                                 "EDU ids are not contiguous from 1");
        if (tree.edus[static_cast<std::size_t>(i)].text.empty())
            throw StructureError(StructureErrorKind::bad_span, "root",
                                 "EDU " + std::to_string(i + 1) + " has empty text");
    }
    if (tree.root.lo != 1 || tree.root.hi != n)
        throw StructureError(StructureErrorKind::bad_span, "root",
                             "root span must cover all EDUs [1," + std::to_string(n) + "]");
    detail::validate_node(tree.root, "root", &warnings);
    return warnings;
}

// ---------------------------------------------------------------------------
// Serialization (pipeline JSON schema)
// ---------------------------------------------------------------------------

enum class TreeFormat { pipeline_json };

namespace detail {

inline json node_to_json(const RstNode& node, bool is_root) {
    json j{{"span", json::array({node.lo, node.hi})}};
    if (!is_root && node.nuclearity) j["nuclearity"] = to_string(*node.nuclearity);
    if (!node.relation.empty()) j["relation"] = node.relation;
    if (!node.is_leaf()) {
        json children = json::array();
        for (const auto& c : node.children) children.push_back(node_to_json(c, false));
        j["children"] = children;
    }
    return j;
}

inline RstNode node_from_json(const json& j, bool is_root, const std::string& path) {
    RstNode node;
    if (!j.contains("span") || !j["span"].is_array() || j["span"].size() != 2)
        throw FormatError("node at " + path + " lacks a two-element span");
    node.lo = j["span"][0].get<int>();
    node.hi = j["span"][1].get<int>();
    if (!is_root) {
        if (!j.contains("nuclearity"))
            throw FormatError("non-root node at " + path + " lacks nuclearity");
        node.nuclearity = nuclearity_from_string(j["nuclearity"].get<std::string>());
    }
    if (j.contains("relation")) node.relation = j["relation"].get<std::string>();
    if (j.contains("children")) {
        if (!j["children"].is_array())
            throw FormatError("children at " + path + " is not an array");
        std::size_t i = 0;
        for (const auto& c : j["children"]) {
            node.children.push_back(
                node_from_json(c, false, path + ".children[" + std::to_string(i) + "]"));
            ++i;
        }
    }
    return node;
}

}  // namespace detail

inline json serialize_tree(const RstTree& tree) {
    json edus = json::array();
    for (const auto& e : tree.edus) edus.push_back({{"id", e.id}, {"text", e.text}});
    return json{{"doc_id", tree.doc_id},
                {"edus", edus},
                {"root", detail::node_to_json(tree.root, true)}};
}

inline RstTree parse_tree(const json& j, TreeFormat format = TreeFormat::pipeline_json,
                          std::vector<std::string>* warnings = nullptr) {
    (void)format;
    RstTree tree;
    try {
        tree.doc_id = j.at("doc_id").get<std::string>();
        for (const auto& e : j.at("edus"))
            tree.edus.push_back({e.at("id").get<int>(), e.at("text").get<std::string>()});
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad tree JSON: ") + e.what());
    }
    if (!j.contains("root")) throw FormatError("tree JSON lacks a root node");
    tree.root = detail::node_from_json(j["root"], true, "root");
    auto w = validate_tree(tree);
    if (warnings) warnings->insert(warnings->end(), w.begin(), w.end());
    return tree;
}

inline RstTree parse_tree(const std::string& serialized,
                          TreeFormat format = TreeFormat::pipeline_json,
                          std::vector<std::string>* warnings = nullptr) {
    json j;
    try {
        j = json::parse(serialized);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("tree is not valid JSON: ") + e.what());
    }
    return parse_tree(j, format, warnings);
}

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

inline LinearizedPath path_to_root(const RstTree& tree, int edu_id) {
    if (edu_id < 1 || edu_id > static_cast<int>(tree.edus.size())) throw UnknownEdu(edu_id);

    std::vector<const RstNode*> chain;  // root first, leaf last
    const RstNode* current = &tree.root;
    chain.push_back(current);
    while (!current->is_leaf()) {
        const RstNode* next = nullptr;
        for (const auto& child : current->children)
            if (child.lo <= edu_id && edu_id <= child.hi) {
                next = &child;
                break;
            }
        if (next == nullptr) throw UnknownEdu(edu_id);  // unreachable on a valid tree
        chain.push_back(next);
        current = next;
    }

    LinearizedPath path;
    path.target_edu = edu_id;
    for (std::size_t i = chain.size(); i-- > 1;) {
        PathStep step;
        step.child_span = {chain[i]->lo, chain[i]->hi};
        step.relation = chain[i]->relation;
        step.nuclearity = chain[i]->nuclearity;
        step.parent_span = {chain[i - 1]->lo, chain[i - 1]->hi};
        path.steps.push_back(std::move(step));
    }
    return path;
}

namespace detail {

inline std::string span_text(const RstTree& tree, int lo, int hi) {
    std::string out;
    for (int id = lo; id <= hi; ++id) {
        if (!out.empty()) out.push_back(' ');
        out += tree.edu(id).text;
    }
    return out;
}

inline std::string span_repr(const RstTree& tree, int lo, int hi) {
    if (lo == hi) return tree.edu(lo).text;
    constexpr std::size_t k_summary_words = 12;
    const std::string joined = span_text(tree, lo, hi);
    std::string summary = truncate_words(joined, k_summary_words);
    if (summary.size() < joined.size()) summary += " ...";
    return "spans " + std::to_string(lo) + "-" + std::to_string(hi) + ": " + summary;
}

}  // namespace detail

// One line per step, target first:
//   "<child>" --<relation> (<nuclearity>)--> "<parent>"
inline std::string render_path(const LinearizedPath& path, const RstTree& tree) {
    if (path.steps.empty())
        return "\"" + detail::span_repr(tree, path.target_edu, path.target_edu) + "\"";
    std::string out;
    for (std::size_t i = 0; i < path.steps.size(); ++i) {
        const PathStep& s = path.steps[i];
        if (i > 0) out.push_back('\n');
        out += "\"" + detail::span_repr(tree, s.child_span[0], s.child_span[1]) + "\"";
        out += " --" + (s.relation.empty() ? std::string("span") : s.relation);
        out += " (" + (s.nuclearity ? to_string(*s.nuclearity) : std::string("nucleus")) + ")";
        out += "--> ";
        out += "\"" + detail::span_repr(tree, s.parent_span[0], s.parent_span[1]) + "\"";
    }
    return out;
}

// LLM rendering of one path into prose, with the 150-word budget enforced by
// a single repair attempt and a hard truncation after that.
inline std::string verbalize(const LinearizedPath& path, const RstTree& tree,
                             const std::string& target_text, Gateway& gateway,
                             const prompts::Library& library = prompts::Library::builtin(),
                             std::vector<std::string>* warnings = nullptr,
                             std::size_t word_limit = 150) {
    const std::string rendered = render_path(path, tree);
    CompletionRequest request;
    request.messages.push_back(
        {Role::user, library.render("path_verbalization", {{"Tree-Of-Discourse", rendered},
                                                           {"Target Text Span", target_text}})});
    CompletionResponse response = gateway.complete(request);
    if (detail::word_count(response.text) > word_limit) {
        CompletionRequest repair = request;
        repair.messages.push_back({Role::assistant, response.text});
        repair.messages.push_back({Role::user, "The explanation should not exceed " +
                                                   std::to_string(word_limit) + " words."});
        response = gateway.complete(repair);
        if (detail::word_count(response.text) > word_limit) {
            if (warnings)
                warnings->push_back("verbalization still over " + std::to_string(word_limit) +
                                    " words after repair; truncated");
            return detail::truncate_words(response.text, word_limit);
        }
    }
    return response.text;
}

// ---------------------------------------------------------------------------
// Subtrees
// ---------------------------------------------------------------------------

// Minimal connected subtree containing all requested EDUs: the full subtree
// under their lowest common ancestor.
inline RstSubtree extract_subtree(const RstTree& tree, const std::set<int>& edu_ids) {
    if (edu_ids.empty()) throw std::invalid_argument("extract_subtree needs at least one EDU id");
    for (int id : edu_ids)
        if (id < 1 || id > static_cast<int>(tree.edus.size())) throw UnknownEdu(id);

    const int min_id = *edu_ids.begin();
    const int max_id = *edu_ids.rbegin();
    const RstNode* lca = &tree.root;
    while (!lca->is_leaf()) {
        const RstNode* container = nullptr;
        for (const auto& child : lca->children)
            if (child.lo <= min_id && max_id <= child.hi) {
                container = &child;
                break;
            }
        if (container == nullptr) break;
        lca = container;
    }

    RstSubtree subtree;
    subtree.root = *lca;  // structural copy of the source node
    for (int id = lca->lo; id <= lca->hi; ++id) subtree.covered_edus.insert(id);
    return subtree;
}

// ---------------------------------------------------------------------------
// Deterministic stand-in tree
// ---------------------------------------------------------------------------

namespace detail {

inline RstNode fallback_node(int lo, int hi) {
    RstNode node;
    node.lo = lo;
    node.hi = hi;
    if (lo == hi) return node;
    RstNode first = fallback_node(lo, lo);
    first.nuclearity = Nuclearity::nucleus;
    first.relation = "elaboration";
    RstNode rest = fallback_node(lo + 1, hi);
    rest.nuclearity = Nuclearity::satellite;
    rest.relation = "elaboration";
    node.children.push_back(std::move(first));
    node.children.push_back(std::move(rest));
    return node;
}

}  // namespace detail

// Right-branching elaboration chain used when no external parser output is
// available; always passes validation.
inline RstTree fallback_tree(const std::vector<Edu>& edus, const std::string& doc_id = "") {
    if (edus.empty()) throw std::invalid_argument("fallback_tree needs at least one EDU");
    RstTree tree;
    tree.doc_id = doc_id;
    tree.edus = edus;
    tree.root = detail::fallback_node(1, static_cast<int>(edus.size()));
    validate_tree(tree);
    return tree;
}

// Paragraph/sentence split into EDUs for the fallback path.
inline std::vector<Edu> edus_from_text(const std::string& text) {
    std::vector<Edu> edus;
    std::string current;
    auto flush = [&]() {
        const std::string trimmed(detail::trim(current));
        if (!trimmed.empty()) edus.push_back({static_cast<int>(edus.size()) + 1, trimmed});
        current.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        current.push_back(text[i]);
        const char c = text[i];
        const bool sentence_end =
            (c == '.' || c == '!' || c == '?') &&
            (i + 1 >= text.size() || detail::is_space(text[i + 1]));
        const bool paragraph_end = c == '\n' && i + 1 < text.size() && text[i + 1] == '\n';
        if (sentence_end || paragraph_end) flush();
    }
    flush();
    return edus;
}

}  // namespace rhetor
